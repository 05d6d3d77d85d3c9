#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "refdense/tensor.hpp"

namespace refdense {

// Binary tensor container shared by feature files, embedding tables and
// checkpoints.
//
//   magic "RFDN" | version u16 | count u32
//   per tensor:  name_len u16, name bytes, rank u8, extents u32 each,
//                dtype u8 (0 = f64, 1 = f32), raw little-endian payload
//
// Entries keep insertion order so that a load/save round trip is
// byte-identical.
class TensorBlob {
 public:
  static constexpr std::uint16_t kVersion = 1;

  enum class Dtype : std::uint8_t { f64 = 0, f32 = 1 };

  void add(const std::string& name, const Tensor& t, Dtype dtype = Dtype::f64);
  bool has(const std::string& name) const;
  Tensor get(const std::string& name) const;  // throws IoError when missing
  Dtype dtype_of(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  void write(std::ostream& os) const;
  static TensorBlob read(std::istream& is);

  void save(const std::string& path) const;
  static TensorBlob load(const std::string& path);

 private:
  struct Entry {
    Tensor tensor;
    Dtype dtype;
  };
  std::vector<std::string> names_;
  std::vector<Entry> entries_;
};

}  // namespace refdense
