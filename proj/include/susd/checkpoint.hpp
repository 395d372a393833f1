#pragma once

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "susd/error.hpp"
#include "susd/mat.hpp"
#include "susd/mlp.hpp"

namespace susd {

// Named-array container persisted as manifest.json (name, shape, dtype,
// byte offset per array) next to one raw little-endian params.bin blob.
// A save/load cycle at the same dtype is bit-exact.
class Checkpoint {
 public:
  nlohmann::json meta;  // free-form run metadata stored in the manifest

  template <typename S>
  void put(const std::string& name, const Mat<S>& m) {
    Entry e;
    e.dtype = dtype_name<S>();
    e.rows = m.rows;
    e.cols = m.cols;
    e.bytes.resize(m.v.size() * sizeof(S));
    std::memcpy(e.bytes.data(), m.v.data(), e.bytes.size());
    entries_[name] = std::move(e);
  }

  template <typename S>
  Mat<S> get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("checkpoint: missing array '" + name + "'");
    const Entry& e = it->second;
    if (e.dtype == "f64") return decode<double>(e).template cast<S>();
    if (e.dtype == "f32") return decode<float>(e).template cast<S>();
    throw IoError("checkpoint: unknown dtype '" + e.dtype + "'");
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  template <typename S>
  void put_mlp(const std::string& prefix, const Mlp<S>& net) {
    for (const auto& [name, p] : net.param_map(prefix)) put(name, *p);
  }

  // Fills an already-shaped network in place.
  template <typename S>
  void get_mlp(const std::string& prefix, Mlp<S>& net) const {
    for (auto& [name, p] : net.param_map(prefix)) {
      Mat<S> loaded = get<S>(name);
      if (!loaded.same_shape(*p))
        throw IoError("checkpoint: shape mismatch for '" + name + "'");
      *p = std::move(loaded);
    }
  }

  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);

  bool operator==(const Checkpoint& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (const auto& [k, e] : entries_) {
      auto it = o.entries_.find(k);
      if (it == o.entries_.end()) return false;
      const Entry& f = it->second;
      if (e.dtype != f.dtype || e.rows != f.rows || e.cols != f.cols ||
          e.bytes != f.bytes)
        return false;
    }
    return true;
  }

 private:
  struct Entry {
    std::string dtype;
    int rows = 0;
    int cols = 0;
    std::vector<unsigned char> bytes;
  };

  template <typename S>
  static const char* dtype_name() {
    if constexpr (sizeof(S) == 8) return "f64";
    else return "f32";
  }

  template <typename T>
  static Mat<T> decode(const Entry& e) {
    Mat<T> m(e.rows, e.cols);
    if (e.bytes.size() != m.v.size() * sizeof(T))
      throw IoError("checkpoint: blob size mismatch");
    std::memcpy(m.v.data(), e.bytes.data(), e.bytes.size());
    return m;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace susd
