#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ppdem {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Labeled substreams derived from one master seed. Independent concerns
// (graph placement, parameter init, dual noise, masks, trials, jitter) draw
// from their own streams, so changing e.g. the trial count cannot perturb
// the generated topology.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }

  std::uint64_t derive(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
    for (char ch : label) {
      h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master_ ^ h) + index);
  }

  std::mt19937_64 stream(std::string_view label, std::uint64_t index = 0) const {
    return std::mt19937_64(derive(label, index));
  }

 private:
  std::uint64_t master_;
};

}  // namespace ppdem
