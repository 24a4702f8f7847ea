#include "cpsnet/scada.hpp"

#include <cmath>

namespace cpsnet::scada {

std::string to_string(Function f) {
  switch (f) {
    case Function::ReadHoldingRegistersRequest: return "read-holding-registers-request";
    case Function::ReadHoldingRegistersResponse: return "read-holding-registers-response";
    case Function::WriteMultipleRegistersRequest: return "write-multiple-registers-request";
    case Function::WriteMultipleRegistersResponse: return "write-multiple-registers-response";
    case Function::ExceptionResponse: return "exception-response";
  }
  return "unknown";
}

std::string to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::ShortBuffer: return "short-buffer";
    case DecodeErrorKind::LengthMismatch: return "length-mismatch";
    case DecodeErrorKind::BadProtocolId: return "bad-protocol-id";
    case DecodeErrorKind::UnknownFunction: return "unknown-function";
    case DecodeErrorKind::CountMismatch: return "count-mismatch";
  }
  return "unknown";
}

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

void check_count(std::size_t n) {
  if (n < kMinRegisters || n > kMaxRegisters) {
    throw EncodeError("register count " + std::to_string(n) + " outside [1, 123]");
  }
}

DecodeError fail(DecodeErrorKind kind, std::size_t offset, std::string detail) {
  return DecodeError{kind, offset, std::move(detail)};
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const ScadaFrame& f) {
  std::vector<std::uint8_t> pdu;
  switch (f.function) {
    case Function::ReadHoldingRegistersRequest:
      check_count(f.quantity);
      pdu.push_back(kFcReadHoldingRegisters);
      put16(pdu, f.start_address);
      put16(pdu, f.quantity);
      break;
    case Function::ReadHoldingRegistersResponse:
      check_count(f.register_values.size());
      pdu.push_back(kFcReadHoldingRegisters);
      pdu.push_back(static_cast<std::uint8_t>(2 * f.register_values.size()));
      for (auto v : f.register_values) put16(pdu, v);
      break;
    case Function::WriteMultipleRegistersRequest:
      check_count(f.register_values.size());
      pdu.push_back(kFcWriteMultipleRegisters);
      put16(pdu, f.start_address);
      put16(pdu, static_cast<std::uint16_t>(f.register_values.size()));
      pdu.push_back(static_cast<std::uint8_t>(2 * f.register_values.size()));
      for (auto v : f.register_values) put16(pdu, v);
      break;
    case Function::WriteMultipleRegistersResponse:
      check_count(f.quantity);
      pdu.push_back(kFcWriteMultipleRegisters);
      put16(pdu, f.start_address);
      put16(pdu, f.quantity);
      break;
    case Function::ExceptionResponse:
      if (f.exception_function != kFcReadHoldingRegisters &&
          f.exception_function != kFcWriteMultipleRegisters) {
        throw EncodeError("exception for unsupported function code");
      }
      pdu.push_back(static_cast<std::uint8_t>(f.exception_function | kExceptionBit));
      pdu.push_back(f.exception_code);
      break;
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + pdu.size());
  put16(out, f.transaction_id);
  put16(out, 0);  // protocol id
  put16(out, static_cast<std::uint16_t>(pdu.size() + 1));
  out.push_back(f.unit_id);
  out.insert(out.end(), pdu.begin(), pdu.end());
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderSize + 1) {
    return fail(DecodeErrorKind::ShortBuffer, b.size(), "frame shorter than header and function code");
  }
  ScadaFrame f;
  f.transaction_id = get16(b, 0);
  if (get16(b, 2) != 0) return fail(DecodeErrorKind::BadProtocolId, 2, "protocol id is not zero");
  const std::size_t length = get16(b, 4);
  if (length != b.size() - 6) {
    return fail(DecodeErrorKind::LengthMismatch, 4,
                "length field " + std::to_string(length) + " but " + std::to_string(b.size() - 6) +
                    " bytes follow");
  }
  f.unit_id = b[6];
  const std::uint8_t fc = b[7];
  const std::size_t body = kHeaderSize + 1;
  const std::size_t body_len = b.size() - body;

  if (fc & kExceptionBit) {
    const std::uint8_t base = fc & static_cast<std::uint8_t>(~kExceptionBit);
    if (base != kFcReadHoldingRegisters && base != kFcWriteMultipleRegisters) {
      return fail(DecodeErrorKind::UnknownFunction, 7, "unknown function code " + std::to_string(fc));
    }
    if (body_len < 1) return fail(DecodeErrorKind::ShortBuffer, b.size(), "missing exception code");
    if (body_len != 1) return fail(DecodeErrorKind::CountMismatch, body + 1, "trailing bytes after exception code");
    f.function = Function::ExceptionResponse;
    f.exception_function = base;
    f.exception_code = b[body];
    return f;
  }

  if (fc == kFcReadHoldingRegisters) {
    // Request bodies are exactly 4 bytes; response bodies are 1 + 2N (odd).
    if (body_len == 4) {
      f.function = Function::ReadHoldingRegistersRequest;
      f.start_address = get16(b, body);
      f.quantity = get16(b, body + 2);
      if (f.quantity < kMinRegisters || f.quantity > kMaxRegisters) {
        return fail(DecodeErrorKind::CountMismatch, body + 2, "quantity out of range");
      }
      return f;
    }
    if (body_len < 1) return fail(DecodeErrorKind::ShortBuffer, b.size(), "missing byte count");
    const std::size_t byte_count = b[body];
    if (byte_count == 0 || byte_count % 2 != 0 || byte_count / 2 > kMaxRegisters) {
      return fail(DecodeErrorKind::CountMismatch, body, "invalid byte count");
    }
    if (body_len - 1 != byte_count) {
      return fail(DecodeErrorKind::CountMismatch, body, "byte count disagrees with frame length");
    }
    f.function = Function::ReadHoldingRegistersResponse;
    for (std::size_t i = 0; i < byte_count / 2; ++i) f.register_values.push_back(get16(b, body + 1 + 2 * i));
    return f;
  }

  if (fc == kFcWriteMultipleRegisters) {
    if (body_len < 4) return fail(DecodeErrorKind::ShortBuffer, b.size(), "truncated write body");
    f.start_address = get16(b, body);
    const std::uint16_t quantity = get16(b, body + 2);
    if (quantity < kMinRegisters || quantity > kMaxRegisters) {
      return fail(DecodeErrorKind::CountMismatch, body + 2, "quantity out of range");
    }
    if (body_len == 4) {
      f.function = Function::WriteMultipleRegistersResponse;
      f.quantity = quantity;
      return f;
    }
    const std::size_t byte_count = b[body + 4];
    if (byte_count != 2u * quantity) {
      return fail(DecodeErrorKind::CountMismatch, body + 4, "byte count disagrees with quantity");
    }
    if (body_len - 5 != byte_count) {
      return fail(DecodeErrorKind::CountMismatch, body + 4, "byte count disagrees with frame length");
    }
    f.function = Function::WriteMultipleRegistersRequest;
    for (std::size_t i = 0; i < quantity; ++i) f.register_values.push_back(get16(b, body + 5 + 2 * i));
    return f;
  }

  return fail(DecodeErrorKind::UnknownFunction, 7, "unknown function code " + std::to_string(fc));
}

void RegisterCodec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw EncodeError("codec scale must be positive");
  if (!std::isfinite(offset)) throw EncodeError("codec offset must be finite");
  if (registers_per_value != 1 && registers_per_value != 2) {
    throw EncodeError("registers_per_value must be 1 or 2");
  }
}

namespace {

double max_count(const RegisterCodec& c) { return c.registers_per_value == 1 ? 65535.0 : 4294967295.0; }

void emit(std::uint64_t count, const RegisterCodec& c, std::vector<std::uint16_t>& out) {
  if (c.registers_per_value == 2) out.push_back(static_cast<std::uint16_t>(count >> 16));
  out.push_back(static_cast<std::uint16_t>(count & 0xFFFF));
}

}  // namespace

double RegisterCodec::max_value() const { return offset + max_count(*this) * scale; }

std::vector<std::uint16_t> pack_measurement(std::span<const double> values, const RegisterCodec& codec) {
  codec.validate();
  std::vector<std::uint16_t> out;
  out.reserve(values.size() * codec.registers_per_value);
  for (double v : values) {
    const double count = std::round((v - codec.offset) / codec.scale);
    if (!std::isfinite(count) || count < 0.0 || count > max_count(codec)) {
      throw EncodeError("value " + std::to_string(v) + " outside codec range");
    }
    emit(static_cast<std::uint64_t>(count), codec, out);
  }
  return out;
}

bool pack_clamped(std::span<const double> values, const RegisterCodec& codec,
                  std::vector<std::uint16_t>& out) {
  codec.validate();
  out.clear();
  bool clamped = false;
  for (double v : values) {
    double count = std::round((v - codec.offset) / codec.scale);
    if (std::isnan(count) || count < 0.0) {
      count = 0.0;
      clamped = true;
    } else if (count > max_count(codec)) {
      count = max_count(codec);
      clamped = true;
    }
    emit(static_cast<std::uint64_t>(count), codec, out);
  }
  return clamped;
}

std::vector<double> unpack_measurement(std::span<const std::uint16_t> registers, const RegisterCodec& codec) {
  codec.validate();
  const auto per = static_cast<std::size_t>(codec.registers_per_value);
  if (registers.size() % per != 0) throw EncodeError("register count is not a multiple of registers_per_value");
  std::vector<double> out;
  out.reserve(registers.size() / per);
  for (std::size_t i = 0; i < registers.size(); i += per) {
    std::uint64_t count = registers[i];
    if (per == 2) count = (count << 16) | registers[i + 1];
    out.push_back(codec.offset + static_cast<double>(count) * codec.scale);
  }
  return out;
}

}  // namespace cpsnet::scada
