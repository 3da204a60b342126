#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace radis {

// FNV-1a, 64 bit.
class Fnv1a {
 public:
  void update(const void* data, size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
  void update(std::span<const T> values) {
    update(values.data(), values.size_bytes());
  }
  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(uint64_t v);

}  // namespace radis
