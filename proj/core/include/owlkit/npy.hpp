#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace owlkit::npy {

/// Element types understood by the reader and writer. Features are '<f4',
/// labels '<i8'; '<f8' carries fitted state tensors so they round-trip exactly.
enum class DType { Float32, Float64, Int64 };

std::string descr(DType dtype);
std::size_t item_size(DType dtype);

template <typename T> constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::Float32; }
template <> constexpr DType dtype_of<double>() { return DType::Float64; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::Int64; }

/// An in-memory NPY v1.0 array: C-order, little-endian payload.
struct Array {
  DType dtype = DType::Float32;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> payload;

  std::uint64_t element_count() const;

  template <typename T> std::vector<T> values() const;

  template <typename T>
  static Array from(std::span<const T> data, std::vector<std::uint64_t> shape);
};

Array decode(std::span<const std::byte> bytes);
std::vector<std::byte> encode(const Array& array);

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Array& array);

/// Header dictionary text exactly as written (padded, newline-terminated).
std::string header_text(const Array& array);

} // namespace owlkit::npy
