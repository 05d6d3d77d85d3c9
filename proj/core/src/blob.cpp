#include "refdense/blob.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "refdense/errors.hpp"

namespace refdense {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'D', 'N'};

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw IoError("tensor blob: truncated stream");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

void write_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

double read_f64_le(std::istream& is) {
  std::uint64_t bits = read_le<std::uint64_t>(is);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void write_f32_le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_le<std::uint32_t>(os, bits);
}

float read_f32_le(std::istream& is) {
  std::uint32_t bits = read_le<std::uint32_t>(is);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void TensorBlob::add(const std::string& name, const Tensor& t, Dtype dtype) {
  if (has(name)) throw IoError("tensor blob: duplicate tensor name " + name);
  if (name.size() > std::numeric_limits<std::uint16_t>::max())
    throw IoError("tensor blob: name too long");
  names_.push_back(name);
  entries_.push_back({t, dtype});
}

bool TensorBlob::has(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

Tensor TensorBlob::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return entries_[i].tensor;
  throw IoError("tensor blob: no tensor named " + name);
}

TensorBlob::Dtype TensorBlob::dtype_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return entries_[i].dtype;
  throw IoError("tensor blob: no tensor named " + name);
}

void TensorBlob::write(std::ostream& os) const {
  os.write(kMagic, 4);
  write_le<std::uint16_t>(os, kVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(names_.size()));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const std::string& name = names_[i];
    const Entry& e = entries_[i];
    write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = e.tensor.shape();
    os.put(static_cast<char>(shape.size()));
    for (int ext : shape) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ext));
    os.put(static_cast<char>(e.dtype));
    if (e.dtype == Dtype::f64) {
      for (double v : e.tensor.values()) write_f64_le(os, v);
    } else {
      for (double v : e.tensor.values())
        write_f32_le(os, static_cast<float>(v));
    }
  }
  if (!os) throw IoError("tensor blob: write failed");
}

TensorBlob TensorBlob::read(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("tensor blob: bad magic");
  const auto version = read_le<std::uint16_t>(is);
  if (version != kVersion)
    throw IoError("tensor blob: unsupported version " +
                  std::to_string(version));
  const auto count = read_le<std::uint32_t>(is);
  TensorBlob blob;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int rank = is.get();
    if (!is || rank < 1) throw IoError("tensor blob: bad rank");
    Shape shape(rank);
    for (int r = 0; r < rank; ++r)
      shape[r] = static_cast<int>(read_le<std::uint32_t>(is));
    const int dtype_tag = is.get();
    if (dtype_tag != 0 && dtype_tag != 1)
      throw IoError("tensor blob: bad dtype tag " + std::to_string(dtype_tag));
    const Dtype dtype = static_cast<Dtype>(dtype_tag);
    std::vector<double> values(numel_of(shape));
    for (auto& v : values)
      v = dtype == Dtype::f64 ? read_f64_le(is)
                              : static_cast<double>(read_f32_le(is));
    blob.add(name, Tensor::from(std::move(shape), std::move(values)), dtype);
  }
  return blob;
}

void TensorBlob::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("tensor blob: cannot open for write: " + path);
  write(os);
}

TensorBlob TensorBlob::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("tensor blob: cannot open: " + path);
  return read(is);
}

}  // namespace refdense
