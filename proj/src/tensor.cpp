#include "ucdl/tensor.hpp"

#include <sstream>

namespace ucdl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FilterTooLarge: return "FilterTooLarge";
    case ErrorCode::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorCode::NonPositiveBeta: return "NonPositiveBeta";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroFilter: return "ZeroFilter";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::RoiTooLarge: return "RoiTooLarge";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "zero-length dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

void check_same_shape(const Shape& a, const Shape& b, const char* where) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

double norm(const ComplexImage& a) { return std::sqrt(norm_squared(a)); }

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace ucdl
