#include "owlkit/npy.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <string_view>

#include "owlkit/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "owlkit NPY payloads are written in native little-endian order");

namespace owlkit::npy {

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kPreambleSize = 10;  // magic + version + u16 header length
constexpr std::size_t kAlignment = 64;

// Minimal parser for the Python literal dict in an NPY header.
class HeaderParser {
public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  struct Fields {
    std::optional<std::string> descr;
    std::optional<bool> fortran_order;
    std::optional<std::vector<std::uint64_t>> shape;
  };

  Fields parse() {
    Fields fields;
    expect('{');
    skip_ws();
    while (peek() != '}') {
      const std::string key = parse_string();
      expect(':');
      skip_ws();
      if (key == "descr") {
        fields.descr = parse_string();
      } else if (key == "fortran_order") {
        fields.fortran_order = parse_bool();
      } else if (key == "shape") {
        fields.shape = parse_tuple();
      } else {
        bad("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
      } else if (peek() != '}') {
        bad("expected ',' or '}'");
      }
    }
    ++pos_;
    skip_ws();
    if (pos_ != text_.size()) bad("trailing characters after header dict");
    return fields;
  }

private:
  [[noreturn]] void bad(const std::string& what) const {
    fail(ErrorKind::Format, "NPY header: " + what);
  }

  char peek() const {
    if (pos_ >= text_.size()) bad("unexpected end of header");
    return text_[pos_];
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) bad(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') bad("expected quoted string");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) bad("unterminated string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    bad("expected True or False");
  }

  std::vector<std::uint64_t> parse_tuple() {
    expect('(');
    std::vector<std::uint64_t> dims;
    skip_ws();
    while (peek() != ')') {
      if (!std::isdigit(static_cast<unsigned char>(peek()))) bad("shape entries must be integers");
      std::uint64_t value = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        const std::uint64_t digit = static_cast<std::uint64_t>(text_[pos_] - '0');
        if (value > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) bad("shape overflow");
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
      } else if (peek() != ')') {
        bad("expected ',' or ')' in shape");
      }
    }
    ++pos_;
    return dims;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

DType parse_descr(const std::string& d) {
  if (d == "<f4") return DType::Float32;
  if (d == "<f8") return DType::Float64;
  if (d == "<i8") return DType::Int64;
  fail(ErrorKind::Format, "unsupported NPY dtype '" + d + "'");
}

} // namespace

std::string descr(DType dtype) {
  switch (dtype) {
    case DType::Float32: return "<f4";
    case DType::Float64: return "<f8";
    case DType::Int64: return "<i8";
  }
  return "";
}

std::size_t item_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::Int64: return 8;
  }
  return 0;
}

std::uint64_t Array::element_count() const {
  std::uint64_t count = 1;
  for (const auto dim : shape) {
    if (dim != 0 && count > std::numeric_limits<std::uint64_t>::max() / dim) {
      fail(ErrorKind::Format, "NPY shape product overflows");
    }
    count *= dim;
  }
  return count;
}

template <typename T> std::vector<T> Array::values() const {
  if (dtype != dtype_of<T>()) {
    fail(ErrorKind::Format, "NPY dtype " + descr(dtype) + " does not match requested " +
                                descr(dtype_of<T>()));
  }
  std::vector<T> out(payload.size() / sizeof(T));
  std::memcpy(out.data(), payload.data(), out.size() * sizeof(T));
  return out;
}

template <typename T>
Array Array::from(std::span<const T> data, std::vector<std::uint64_t> shape) {
  Array array;
  array.dtype = dtype_of<T>();
  array.shape = std::move(shape);
  if (array.element_count() != data.size()) {
    fail(ErrorKind::Shape, "NPY shape does not match element count");
  }
  array.payload.resize(data.size_bytes());
  std::memcpy(array.payload.data(), data.data(), data.size_bytes());
  return array;
}

template std::vector<float> Array::values<float>() const;
template std::vector<double> Array::values<double>() const;
template std::vector<std::int64_t> Array::values<std::int64_t>() const;
template Array Array::from<float>(std::span<const float>, std::vector<std::uint64_t>);
template Array Array::from<double>(std::span<const double>, std::vector<std::uint64_t>);
template Array Array::from<std::int64_t>(std::span<const std::int64_t>, std::vector<std::uint64_t>);

std::string header_text(const Array& array) {
  std::string dict = "{'descr': '" + descr(array.dtype) + "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    if (i > 0) dict += ", ";
    dict += std::to_string(array.shape[i]);
  }
  if (array.shape.size() == 1) dict += ",";
  dict += "), }";
  // Pad with spaces so the payload starts on a 64-byte boundary; newline last.
  const std::size_t unpadded = kPreambleSize + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
  dict.append(padded - unpadded, ' ');
  dict += '\n';
  return dict;
}

std::vector<std::byte> encode(const Array& array) {
  if (array.payload.size() != array.element_count() * item_size(array.dtype)) {
    fail(ErrorKind::Shape, "NPY payload size does not match shape");
  }
  const std::string header = header_text(array);
  if (header.size() > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorKind::Format, "NPY header too long for version 1.0");
  }
  std::vector<std::byte> out;
  out.reserve(kPreambleSize + header.size() + array.payload.size());
  for (const char c : kMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<std::byte>(len & 0xFF));
  out.push_back(static_cast<std::byte>(len >> 8));
  for (const char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), array.payload.begin(), array.payload.end());
  return out;
}

Array decode(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreambleSize) fail(ErrorKind::Format, "file too short for an NPY preamble");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    fail(ErrorKind::Format, "missing NPY magic string");
  }
  const auto major = std::to_integer<unsigned>(bytes[6]);
  const auto minor = std::to_integer<unsigned>(bytes[7]);
  if (major != 1 || minor != 0) {
    fail(ErrorKind::Format, "unsupported NPY version " + std::to_string(major) + "." +
                                std::to_string(minor));
  }
  const std::size_t header_len =
      std::to_integer<std::size_t>(bytes[8]) | (std::to_integer<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreambleSize + header_len) fail(ErrorKind::Format, "truncated NPY header");

  std::string header(header_len, '\0');
  std::memcpy(header.data(), bytes.data() + kPreambleSize, header_len);
  const auto fields = HeaderParser(header).parse();
  if (!fields.descr || !fields.fortran_order || !fields.shape) {
    fail(ErrorKind::Format, "NPY header missing descr, fortran_order or shape");
  }
  if (*fields.fortran_order) fail(ErrorKind::Format, "Fortran-order NPY arrays are not supported");

  Array array;
  array.dtype = parse_descr(*fields.descr);
  array.shape = *fields.shape;
  const auto payload = bytes.subspan(kPreambleSize + header_len);
  const std::uint64_t expected = array.element_count() * item_size(array.dtype);
  if (payload.size() != expected) {
    fail(ErrorKind::Format, "NPY payload is " + std::to_string(payload.size()) +
                                " bytes but shape declares " + std::to_string(expected));
  }
  array.payload.assign(payload.begin(), payload.end());
  return array;
}

Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "failed reading " + path.string());
  try {
    return decode(std::as_bytes(std::span(raw)));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

void write(const std::filesystem::path& path, const Array& array) {
  const auto bytes = encode(array);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

} // namespace owlkit::npy
