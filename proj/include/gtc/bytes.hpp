#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

namespace gtc::bytes {

/// Little-endian append-only writer.
class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    static_assert(sizeof(T) == sizeof(U));
    U u = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      buf_.push_back(static_cast<std::byte>(u & 0xffu));
      u >>= 8;
    }
  }

  void put_doubles(std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::byte*>(values.data());
      buf_.insert(buf_.end(), p, p + values.size_bytes());
    } else {
      for (double v : values) put(v);
    }
  }

  void put_raw(std::span<const std::byte> raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  std::vector<std::byte> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::byte> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> data) : data_(data) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U u = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      u |= static_cast<U>(std::to_integer<std::uint8_t>(data_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }

  void get_doubles(std::span<double> out) {
    if constexpr (std::endian::native == std::endian::little) {
      need(out.size_bytes());
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (double& v : out) v = get<double>();
    }
  }

  std::span<const std::byte> get_raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw std::runtime_error("truncated buffer");
  }

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

}  // namespace gtc::bytes
