#pragma once

#include <cstdint>
#include <string_view>

namespace fedleak {

// Sub-seed derivation used everywhere a component needs its own RNG stream:
//
//   derive_seed(master, tag, index) =
//       splitmix64(splitmix64(master ^ fnv1a64(tag)) + index)
//
// where splitmix64 is the finalizer of Steele et al. and fnv1a64 the 64-bit
// FNV-1a hash of the tag bytes. Tags name the role ("client", "init", ...).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

}  // namespace fedleak
