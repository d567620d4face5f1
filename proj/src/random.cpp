#include "sipov/random.hpp"

#include <cmath>

#include "sipov/errors.hpp"

namespace sipov {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double Substream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Substream::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ParameterError("exponential rate must be > 0");
  return -std::log1p(-uniform()) / rate;
}

bool Substream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("bernoulli p must lie in [0, 1]");
  if (p == 0.0) return false;
  if (p == 1.0) return true;
  return uniform() < p;
}

double Substream::draw(const Distribution& dist) {
  return std::visit(
      [this](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return exponential(d.rate);
        } else if constexpr (std::is_same_v<T, Deterministic>) {
          if (!std::isfinite(d.value)) throw ParameterError("deterministic value must be finite");
          return d.value;
        } else if constexpr (std::is_same_v<T, Bernoulli>) {
          return bernoulli(d.p) ? 1.0 : 0.0;
        } else {
          return uniform();
        }
      },
      dist);
}

std::uint64_t RandomStream::derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

Substream& RandomStream::stream(std::string_view name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(std::string(name), Substream(derive_seed(seed_, name))).first;
  }
  return it->second;
}

}  // namespace sipov
