#pragma once

// Driving noises (Brownian, compound Poisson, symmetric alpha-stable and
// Brownian plus compound Poisson) and reproducible per-replica streams.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "retard/errors.hpp"

namespace retard {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// One replica's random stream. The engine seed is a hash of (seed, replica),
// so any replica can be regenerated alone and in any order.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t replica)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(replica * 0xD1B54A32D192ED03ULL + 1))) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double exponential(double mean) {
    return mean * std::exponential_distribution<double>(1.0)(engine_);
  }
  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<long>(mean)(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class JumpLawKind { exponential, normal, pareto };

struct JumpLaw {
  JumpLawKind kind = JumpLawKind::exponential;
  double mean = 1.0;   // exponential
  double sd = 1.0;     // normal (centred)
  double alpha = 2.0;  // pareto tail index
  double xmin = 1.0;   // pareto scale

  static JumpLaw exponential(double mean) {
    if (!(mean > 0.0)) throw DomainError("exponential jump mean must be positive");
    return {JumpLawKind::exponential, mean, 1.0, 2.0, 1.0};
  }
  static JumpLaw normal(double sd) {
    if (!(sd > 0.0)) throw DomainError("normal jump sd must be positive");
    return {JumpLawKind::normal, 1.0, sd, 2.0, 1.0};
  }
  static JumpLaw pareto(double alpha, double xmin) {
    if (!(alpha > 0.0) || !(xmin > 0.0)) throw DomainError("pareto needs alpha > 0 and xmin > 0");
    return {JumpLawKind::pareto, 1.0, 1.0, alpha, xmin};
  }

  // int_{|z|>1} |z|^p nu(dz) < infinity for p = 1 and p = 2.
  bool finite_first_moment() const { return kind != JumpLawKind::pareto || alpha > 1.0; }
  bool finite_second_moment() const { return kind != JumpLawKind::pareto || alpha > 2.0; }

  double first_moment() const {
    switch (kind) {
      case JumpLawKind::exponential: return mean;
      case JumpLawKind::normal: return 0.0;
      case JumpLawKind::pareto:
        return alpha > 1.0 ? alpha * xmin / (alpha - 1.0) : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double second_moment() const {
    switch (kind) {
      case JumpLawKind::exponential: return 2.0 * mean * mean;
      case JumpLawKind::normal: return sd * sd;
      case JumpLawKind::pareto:
        return alpha > 2.0 ? alpha * xmin * xmin / (alpha - 2.0)
                           : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double sample(Stream& s) const {
    switch (kind) {
      case JumpLawKind::exponential: return s.exponential(mean);
      case JumpLawKind::normal: return sd * s.normal();
      case JumpLawKind::pareto: return xmin * std::pow(1.0 - s.uniform(), -1.0 / alpha);
    }
    return 0.0;
  }
};

enum class NoiseKind { brownian, compound_poisson, alpha_stable, brownian_plus_compound_poisson };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::brownian;
  double rate = 0.0;
  JumpLaw jump{};
  double alpha = 2.0;
  double scale = 1.0;
  double drift = 0.0;

  static NoiseSpec brownian() { return {}; }

  static NoiseSpec compound_poisson(double rate, JumpLaw law) {
    if (!(rate > 0.0)) throw DomainError("compound Poisson rate must be positive");
    NoiseSpec n;
    n.kind = NoiseKind::compound_poisson;
    n.rate = rate;
    n.jump = law;
    return n;
  }

  static NoiseSpec alpha_stable(double alpha, double scale) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("stable index must lie in (0, 2]");
    if (!(scale > 0.0)) throw DomainError("stable scale must be positive");
    NoiseSpec n;
    n.kind = NoiseKind::alpha_stable;
    n.alpha = alpha;
    n.scale = scale;
    return n;
  }

  static NoiseSpec brownian_plus_compound_poisson(double drift, double rate, JumpLaw law) {
    NoiseSpec n = compound_poisson(rate, law);
    n.kind = NoiseKind::brownian_plus_compound_poisson;
    n.drift = drift;
    return n;
  }

  // Big jumps have a finite first moment.
  bool first_moment_condition() const {
    switch (kind) {
      case NoiseKind::brownian: return true;
      case NoiseKind::alpha_stable: return alpha > 1.0;
      default: return jump.finite_first_moment();
    }
  }

  // Big jumps have a finite second moment.
  bool second_moment_condition() const {
    switch (kind) {
      case NoiseKind::brownian: return true;
      case NoiseKind::alpha_stable: return alpha >= 2.0;
      default: return jump.finite_second_moment();
    }
  }

  // E Z(1), when finite.
  double mean_per_unit_time() const {
    switch (kind) {
      case NoiseKind::brownian: return 0.0;
      case NoiseKind::alpha_stable: return 0.0;
      case NoiseKind::compound_poisson: return rate * jump.first_moment();
      case NoiseKind::brownian_plus_compound_poisson: return drift + rate * jump.first_moment();
    }
    return 0.0;
  }
};

// Symmetric standard alpha-stable draw, E exp(iuX) = exp(-|u|^alpha), by the
// Chambers-Mallows-Stuck construction.
inline double sample_symmetric_stable(double alpha, Stream& s) {
  const double v = std::numbers::pi * (s.uniform() - 0.5);
  if (alpha == 1.0) return std::tan(v);
  double w = s.exponential(1.0);
  while (w == 0.0) w = s.exponential(1.0);
  const double a = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha);
  const double b = std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
  return a * b;
}

inline double sample_compound_poisson(double rate, const JumpLaw& law, double dt, Stream& s) {
  const long k = s.poisson(rate * dt);
  double acc = 0.0;
  for (long j = 0; j < k; ++j) acc += law.sample(s);
  return acc;
}

inline double sample_levy_increment(const NoiseSpec& noise, double dt, Stream& s) {
  if (!(dt > 0.0)) throw DomainError("increment step must be positive");
  switch (noise.kind) {
    case NoiseKind::brownian: return std::sqrt(dt) * s.normal();
    case NoiseKind::compound_poisson: return sample_compound_poisson(noise.rate, noise.jump, dt, s);
    case NoiseKind::alpha_stable:
      return noise.scale * std::pow(dt, 1.0 / noise.alpha) * sample_symmetric_stable(noise.alpha, s);
    case NoiseKind::brownian_plus_compound_poisson: {
      const double gauss = std::sqrt(dt) * s.normal();
      return noise.drift * dt + gauss + sample_compound_poisson(noise.rate, noise.jump, dt, s);
    }
  }
  return 0.0;
}

inline std::vector<double> sample_increments(const NoiseSpec& noise, double dt, std::size_t count,
                                             Stream& s) {
  std::vector<double> out(count);
  for (auto& x : out) x = sample_levy_increment(noise, dt, s);
  return out;
}

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::brownian: return "brownian";
    case NoiseKind::compound_poisson: return "compound_poisson";
    case NoiseKind::alpha_stable: return "alpha_stable";
    case NoiseKind::brownian_plus_compound_poisson: return "brownian_plus_compound_poisson";
  }
  return "?";
}

}  // namespace retard
