#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ptrner {

// Derives independent, named random streams from one master seed so that
// e.g. the shuffle order can be re-seeded without disturbing initialization.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }
  std::uint64_t derive(std::string_view name) const;
  std::mt19937_64 stream(std::string_view name) const { return std::mt19937_64(derive(name)); }

 private:
  std::uint64_t master_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ptrner
