#include "salp/rng.hpp"

namespace salp {

uint64_t derive_seed(uint64_t root, const std::string& label) {
  // FNV-1a over the label, mixed into the root through one splitmix round.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  Rng mixer(root ^ h);
  return mixer.next_u64();
}

}  // namespace salp
