#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stepamc {

// 64-bit FNV-1a, used for vocabulary fingerprints and artifact content hashes.
class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept;
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view bytes);
std::string hash_file(const std::string& path);

}  // namespace stepamc
