#include "uniex/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uniex {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'E', 'X', 'P', 'R', 'M'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("checkpoint: unexpected end of file");
  }
  return v;
}

}  // namespace

nd::Var ParamStore::add(const std::string& name, nd::Array value) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto var = nd::parameter(std::move(value));
  params_.emplace(name, var);
  return var;
}

nd::Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::vector<nd::Var> ParamStore::vars() const {
  std::vector<nd::Var> out;
  for (const auto& [_, v] : params_) out.push_back(v);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, v] : params_) out.add(name, v.value());
  return out;
}

void ParamStore::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, params_.size());
    for (const auto& [name, v] : params_) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      const auto& shape = v.shape();
      put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
      for (auto d : shape) put<std::uint64_t>(os, d);
      const auto& data = v.value().raw();
      os.write(reinterpret_cast<const char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("short write on checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = take<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = take<std::uint64_t>(is);
  ParamStore store;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = take<std::uint32_t>(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated name");
    const auto rank = take<std::uint32_t>(is);
    nd::Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(take<std::uint64_t>(is));
    std::vector<double> data(nd::shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
    }
    store.add(name, nd::Array(std::move(shape), std::move(data)));
  }
  return store;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, v] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end()) return false;
    if (!(v.value() == it->second.value())) return false;
  }
  return true;
}

}  // namespace uniex
