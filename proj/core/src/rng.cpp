#include "lookout/rng.hpp"

namespace lookout {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index) {
  std::uint64_t h = mix_seed(root);
  for (char c : label) h = mix_seed(h ^ static_cast<unsigned char>(c));
  return mix_seed(h ^ mix_seed(index + 0x51ed27ull));
}

}  // namespace lookout
