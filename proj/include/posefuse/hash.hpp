#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace posefuse {

/// FNV-1a, 64 bit.
class Fnv1a {
 public:
  void update(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_value(const T& v) {
    update(&v, sizeof(T));
  }
  template <typename Derived>
  void update_matrix(const Eigen::DenseBase<Derived>& m) {
    update_value(static_cast<std::int64_t>(m.rows()));
    update_value(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) update_value(m(i, j));
  }
  template <typename T>
  void update_vector(const std::vector<T>& v) {
    update_value(static_cast<std::int64_t>(v.size()));
    if (!v.empty()) update(v.data(), v.size() * sizeof(T));
  }
  void update_string(const std::string& s) {
    update_value(static_cast<std::int64_t>(s.size()));
    update(s.data(), s.size());
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t h);

}  // namespace posefuse
