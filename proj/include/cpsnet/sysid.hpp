#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>

#include "cpsnet/plant.hpp"

namespace cpsnet::pn {

/// One input/output observation at step k.
struct IoPair {
  Vector u;
  Vector y;
};

/// One regression row: y_next observed one step after (y, u).
struct IoTransition {
  Vector y;
  Vector u;
  Vector y_next;
};

struct BehaviorEstimate {
  Matrix Ahat;  // p x p output-transition estimate
  Matrix Bhat;  // p x m
  std::size_t sample_count = 0;
  double residual_norm = 0.0;
  double condition = 0.0;
  double max_stderr = 0.0;  // largest coefficient standard error
};

enum class SysIdErrorKind { InsufficientSamples, InsufficientExcitation };

struct SysIdError {
  SysIdErrorKind kind;
  std::string message;
};

using SysIdResult = std::variant<BehaviorEstimate, SysIdError>;

inline constexpr std::size_t kDefaultMinSamples = 50;
inline constexpr double kMaxRegressorCondition = 1e8;

/// Least-squares fit of y_{k+1} = Ahat y_k + Bhat u_k.
SysIdResult identify_behavior(std::span<const IoTransition> rows,
                              std::size_t min_samples = kDefaultMinSamples,
                              double max_condition = kMaxRegressorCondition);

/// Same fit over a contiguous sequence of (u_k, y_k) pairs.
SysIdResult identify_behavior(std::span<const IoPair> sequence,
                              std::size_t min_samples = kDefaultMinSamples,
                              double max_condition = kMaxRegressorCondition);

/// Max-norm distance between the estimate and what the nominal model
/// predicts in output coordinates (C A C^-1, C B). Empty when C is not
/// square and invertible.
std::optional<double> behavior_deviation(const BehaviorEstimate& est, const StateSpaceModel& nominal);

}  // namespace cpsnet::pn
