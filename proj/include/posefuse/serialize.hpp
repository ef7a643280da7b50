#pragma once

#include "posefuse/common.hpp"

#include <cstring>
#include <string>

namespace posefuse {

/// Append-only little-endian blob (the host byte order on supported targets).
class BlobWriter {
 public:
  template <typename T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint64_t>(s.size()));
    buf_ += s;
  }
  template <typename Derived>
  void put_matrix(const Eigen::DenseBase<Derived>& m) {
    put(static_cast<std::int64_t>(m.rows()));
    put(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put(static_cast<double>(m(i, j)));
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class BlobReader {
 public:
  explicit BlobReader(const std::string& bytes) : buf_(bytes) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > buf_.size()) throw Error(Errc::ParseError, "truncated blob", static_cast<long>(pos_));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (pos_ + n > buf_.size()) throw Error(Errc::ParseError, "truncated blob", static_cast<long>(pos_));
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Reads into `m`, which must already have the stored dimensions.
  template <typename Derived>
  void get_matrix(Eigen::DenseBase<Derived>& m, const char* field) {
    const auto rows = get<std::int64_t>();
    const auto cols = get<std::int64_t>();
    if (rows != m.rows() || cols != m.cols()) throw Error(Errc::ParseError, field);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace posefuse
