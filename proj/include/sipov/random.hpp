#pragma once

// Seeded random variates with named, independent substreams. Each substream
// is derived from (seed, name) alone, so draws on one never shift another.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <variant>

namespace sipov {

struct Exponential {
  double rate;
};
struct Deterministic {
  double value;
};
struct Bernoulli {
  double p;
};
struct Uniform {};

using Distribution = std::variant<Exponential, Deterministic, Bernoulli, Uniform>;

class Substream {
 public:
  explicit Substream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double exponential(double rate);
  bool bernoulli(double p);

  /// Samples `dist`; Bernoulli yields 0.0 or 1.0.
  double draw(const Distribution& dist);

 private:
  std::mt19937_64 engine_;
};

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  Substream& stream(std::string_view name);
  double draw(std::string_view name, const Distribution& dist) { return stream(name).draw(dist); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

 private:
  std::uint64_t seed_;
  std::map<std::string, Substream, std::less<>> streams_;
};

}  // namespace sipov
