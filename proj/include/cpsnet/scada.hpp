#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cpsnet::scada {

// Modbus/TCP application data unit: a 7-byte MBAP header followed by the
// function code and body. Big-endian throughout, no checksum.

inline constexpr std::size_t kHeaderSize = 7;
inline constexpr std::uint16_t kMinRegisters = 1;
inline constexpr std::uint16_t kMaxRegisters = 123;

inline constexpr std::uint8_t kFcReadHoldingRegisters = 0x03;
inline constexpr std::uint8_t kFcWriteMultipleRegisters = 0x10;
inline constexpr std::uint8_t kExceptionBit = 0x80;

enum class Function {
  ReadHoldingRegistersRequest,
  ReadHoldingRegistersResponse,
  WriteMultipleRegistersRequest,
  WriteMultipleRegistersResponse,
  ExceptionResponse,
};

std::string to_string(Function f);

/// One application frame. Which fields are meaningful depends on `function`:
///   read request     start_address, quantity
///   read response    register_values (start_address is not carried; keep 0)
///   write request    start_address, register_values
///   write response   start_address, quantity
///   exception        exception_function, exception_code
struct ScadaFrame {
  std::uint16_t transaction_id = 0;
  std::uint8_t unit_id = 0;
  Function function = Function::ReadHoldingRegistersRequest;
  std::uint16_t start_address = 0;
  std::uint16_t quantity = 0;
  std::vector<std::uint16_t> register_values;
  std::uint8_t exception_function = kFcReadHoldingRegisters;
  std::uint8_t exception_code = 0;

  bool operator==(const ScadaFrame&) const = default;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DecodeErrorKind {
  ShortBuffer,
  LengthMismatch,
  BadProtocolId,
  UnknownFunction,
  CountMismatch,
};

std::string to_string(DecodeErrorKind k);

struct DecodeError {
  DecodeErrorKind kind;
  std::size_t offset;  // byte offset where decoding stopped
  std::string detail;
};

using DecodeResult = std::variant<ScadaFrame, DecodeError>;

/// Throws EncodeError if the frame violates a protocol bound.
std::vector<std::uint8_t> encode_frame(const ScadaFrame& frame);

/// Never throws and never reads outside `bytes`.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

/// Fixed-point mapping of engineering values onto 16-bit registers:
/// value = offset + count * scale, one or two registers per value.
struct RegisterCodec {
  double scale = 0.001;
  double offset = -32.768;
  int registers_per_value = 1;

  void validate() const;
  double min_value() const { return offset; }
  double max_value() const;
};

/// Throws EncodeError for values outside the codec range.
std::vector<std::uint16_t> pack_measurement(std::span<const double> values, const RegisterCodec& codec);
std::vector<double> unpack_measurement(std::span<const std::uint16_t> registers, const RegisterCodec& codec);

/// Like pack_measurement but saturates at the range ends. Returns true when
/// any value had to be clamped.
bool pack_clamped(std::span<const double> values, const RegisterCodec& codec,
                  std::vector<std::uint16_t>& out);

}  // namespace cpsnet::scada
