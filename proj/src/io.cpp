#include "ucdl/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ucdl::io {
namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorCode::Io, "truncated tensor data");
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  void expect_magic() {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), kMagic, 4) != 0) {
      throw Error(ErrorCode::Io, "missing UCDL magic");
    }
    pos_ = 4;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const ComplexImage& x) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(4 + 8 + 8 * x.ndim() + 4 + 16 * x.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(x.ndim()));
  for (std::size_t d : x.shape()) put<std::uint64_t>(out, d);
  put<std::uint32_t>(out, kDtypeComplex128);
  for (double v : x.channels()) put<double>(out, v);
  return out;
}

ComplexImage decode_tensor(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  in.expect_magic();
  if (const auto version = in.get<std::uint32_t>(); version != kFormatVersion) {
    throw Error(ErrorCode::Io, "unsupported tensor format version " + std::to_string(version));
  }
  const auto ndim = in.get<std::uint32_t>();
  if (ndim == 0 || ndim > 16) throw Error(ErrorCode::Io, "bad tensor rank " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& d : shape) d = in.get<std::uint64_t>();
  if (const auto dtype = in.get<std::uint32_t>(); dtype != kDtypeComplex128) {
    throw Error(ErrorCode::Io, "unsupported dtype tag " + std::to_string(dtype));
  }
  const std::size_t n = shape_size(shape);
  if (in.remaining() != 16 * n) throw Error(ErrorCode::Io, "tensor payload length mismatch");
  ComplexImage x(shape);
  for (double& v : x.channels()) v = in.get<double>();
  return x;
}

void write_tensor(const std::filesystem::path& path, const ComplexImage& x) {
  const auto bytes = encode_tensor(x);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

ComplexImage read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height) throw Error(ErrorCode::ShapeMismatch, "PGM pixel count mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os << text;
}

}  // namespace ucdl::io
