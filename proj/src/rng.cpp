#include "omiga/rng.hpp"

namespace omiga {

uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index) {
  // FNV-1a over the stream name, then splitmix64 finalization.
  uint64_t h = 14695981039346656037ull;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  uint64_t z = master ^ h ^ (index * 0x9e3779b97f4a7c15ull);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace omiga
