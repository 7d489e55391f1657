#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uniex/ndiff.hpp"

namespace uniex {

// Named, ordered collection of trainable leaves.
//
// Checkpoint layout (all integers and reals little-endian):
//   magic   "UNIEXPRM" (8 bytes)
//   version u32 (= 1)
//   count   u64
//   count x { name_len u32, name bytes, rank u32, dims u64[rank], data f64[prod(dims)] }
// Entries are written in lexicographic name order.
class ParamStore {
 public:
  static constexpr std::uint32_t kCheckpointVersion = 1;

  nd::Var add(const std::string& name, nd::Array value);
  nd::Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::vector<nd::Var> vars() const;
  std::size_t tensor_count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Independent copy; the new store shares no nodes with this one.
  ParamStore clone() const;

  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

  bool values_equal(const ParamStore& other) const;

 private:
  std::map<std::string, nd::Var> params_;
};

}  // namespace uniex
