#pragma once

#include "choir/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace choir::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer
{
public:
  void bytes(void const *p, size_t n)
  {
    auto const *b = static_cast<std::uint8_t const *>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  template <typename T> void put(T v) { bytes(&v, sizeof(T)); }
  void f32(double v) { put(static_cast<float>(v)); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
  std::vector<std::uint8_t> buf_;
};

class Reader
{
public:
  explicit Reader(std::vector<std::uint8_t> const &buf)
    : buf_(buf)
  {
  }
  size_t offset() const { return pos_; }
  bool atEnd() const { return pos_ == buf_.size(); }

  void need(size_t n) const
  {
    if (pos_ + n > buf_.size()) {
      fail(ErrorCode::Malformed, "unexpected end of data at byte offset " + std::to_string(pos_));
    }
  }
  void expectMagic(std::string_view m)
  {
    need(m.size());
    if (std::memcmp(buf_.data() + pos_, m.data(), m.size()) != 0) {
      fail(ErrorCode::Malformed, "bad magic at byte offset " + std::to_string(pos_));
    }
    pos_ += m.size();
  }
  template <typename T> T get()
  {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  double f32() { return static_cast<double>(get<float>()); }
  std::string str(size_t n)
  {
    need(n);
    std::string s(reinterpret_cast<char const *>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

private:
  std::vector<std::uint8_t> const &buf_;
  size_t pos_ = 0;
};

} // namespace choir::binary
