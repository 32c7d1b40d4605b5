#pragma once

// Characteristic functions of linear retarded and neutral delay equations and
// a rightmost-root locator built on argument-principle counting.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "retard/errors.hpp"
#include "retard/measures.hpp"

namespace retard {

using Complex = std::complex<double>;

enum class CharKind { retarded, neutral };

struct CharSpec {
  CharKind kind = CharKind::retarded;
  SignedMeasure mu;
  std::optional<SignedMeasure> rho;

  static CharSpec retarded(SignedMeasure mu) {
    return CharSpec{CharKind::retarded, std::move(mu), std::nullopt};
  }

  static CharSpec neutral(SignedMeasure rho, SignedMeasure mu) {
    if (!(total_variation(rho) < 1.0)) {
      throw DomainError("neutral characteristic function needs Var(rho) < 1");
    }
    return CharSpec{CharKind::neutral, std::move(mu), std::move(rho)};
  }

  // Largest delay present in either measure; sets the oscillation rate of
  // e^{lambda theta} along vertical lines.
  double delay_depth() const {
    double d = mu.support_depth();
    if (rho) d = std::max(d, rho->support_depth());
    return d;
  }
};

struct TransformValue {
  Complex value;       // int e^{lambda s} m(ds)
  Complex derivative;  // int s e^{lambda s} m(ds)
};

inline constexpr int kSimpsonIntervals = 256;

inline TransformValue measure_transform(const SignedMeasure& m, Complex lambda) {
  TransformValue out{};
  for (const auto& a : m.atoms()) {
    const Complex e = std::exp(lambda * a.theta);
    out.value += a.weight * e;
    out.derivative += a.weight * a.theta * e;
  }
  for (const auto& p : m.density()) {
    const double h = (p.hi - p.lo) / kSimpsonIntervals;
    Complex v{}, d{};
    for (int j = 0; j <= kSimpsonIntervals; ++j) {
      const double s = p.lo + j * h;
      const double w = (j == 0 || j == kSimpsonIntervals) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      const Complex e = std::exp(lambda * s);
      v += w * e;
      d += w * s * e;
    }
    out.value += p.value * v * (h / 3.0);
    out.derivative += p.value * d * (h / 3.0);
  }
  return out;
}

inline Complex char_retarded(Complex lambda, const SignedMeasure& mu) {
  return lambda - measure_transform(mu, lambda).value;
}

inline Complex char_neutral(Complex lambda, const SignedMeasure& rho, const SignedMeasure& mu) {
  return lambda - lambda * measure_transform(rho, lambda).value -
         measure_transform(mu, lambda).value;
}

struct CharValue {
  Complex value;
  Complex derivative;
};

inline CharValue characteristic(const CharSpec& spec, Complex lambda) {
  const auto tm = measure_transform(spec.mu, lambda);
  if (spec.kind == CharKind::retarded || !spec.rho) {
    return {lambda - tm.value, 1.0 - tm.derivative};
  }
  const auto tr = measure_transform(*spec.rho, lambda);
  return {lambda - lambda * tr.value - tm.value,
          1.0 - tr.value - lambda * tr.derivative - tm.derivative};
}

struct Box {
  double re_lo = 0.0;
  double re_hi = 0.0;
  double im_lo = 0.0;
  double im_hi = 0.0;

  double width() const { return re_hi - re_lo; }
  double height() const { return im_hi - im_lo; }
  Complex center() const { return {0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)}; }
  bool contains(Complex z, double slack = 0.0) const {
    return z.real() >= re_lo - slack && z.real() <= re_hi + slack &&
           z.imag() >= im_lo - slack && z.imag() <= im_hi + slack;
  }
  Box expanded(double e) const { return {re_lo - e, re_hi + e, im_lo - e, im_hi + e}; }
};

struct ContourOptions {
  int min_points_per_side = 64;
  double contour_tolerance = 1e-9;  // relative to 1 + |lambda|
  int max_refinement_depth = 40;
};

namespace detail {

class ContourWalker {
 public:
  ContourWalker(const CharSpec& spec, const ContourOptions& opts) : spec_(spec), opts_(opts) {}

  double winding(const Box& box) {
    if (!(box.width() > 0.0) || !(box.height() > 0.0)) {
      throw DomainError("contour box must have positive width and height");
    }
    phase_ = 0.0;
    const std::array<Complex, 5> corners{
        Complex{box.re_lo, box.im_lo}, Complex{box.re_hi, box.im_lo},
        Complex{box.re_hi, box.im_hi}, Complex{box.re_lo, box.im_hi},
        Complex{box.re_lo, box.im_lo}};
    for (std::size_t s = 0; s < 4; ++s) side(corners[s], corners[s + 1]);
    return phase_ / (2.0 * std::numbers::pi);
  }

 private:
  Complex eval(Complex z) const {
    const Complex f = characteristic(spec_, z).value;
    if (!std::isfinite(f.real()) || !std::isfinite(f.imag()) ||
        std::abs(f) < opts_.contour_tolerance * (1.0 + std::abs(z))) {
      throw ContourNearZero("characteristic function vanishes near the contour");
    }
    return f;
  }

  void side(Complex a, Complex b) {
    const double len = std::abs(b - a);
    // e^{lambda theta} turns at rate |theta| <= depth along the side; keep
    // the initial spacing well under a quarter turn.
    const double depth = std::max(spec_.delay_depth(), 1e-3);
    const int n = std::max(opts_.min_points_per_side,
                           static_cast<int>(std::ceil(4.0 * len * depth / std::numbers::pi)));
    Complex z0 = a;
    Complex f0 = eval(z0);
    for (int j = 1; j <= n; ++j) {
      const Complex z1 = (j == n) ? b : a + (b - a) * (static_cast<double>(j) / n);
      const Complex f1 = eval(z1);
      piece(z0, f0, z1, f1, 0);
      z0 = z1;
      f0 = f1;
    }
  }

  void piece(Complex z0, Complex f0, Complex z1, Complex f1, int depth) {
    const double d = std::arg(f1 / f0);
    if (std::abs(d) < 0.5 * std::numbers::pi) {
      phase_ += d;
      return;
    }
    if (depth >= opts_.max_refinement_depth) {
      throw ContourNearZero("argument of the characteristic function unresolved on contour");
    }
    const Complex zm = 0.5 * (z0 + z1);
    const Complex fm = eval(zm);
    piece(z0, f0, zm, fm, depth + 1);
    piece(zm, fm, z1, f1, depth + 1);
  }

  const CharSpec& spec_;
  ContourOptions opts_;
  double phase_ = 0.0;
};

}  // namespace detail

// Number of zeros (with multiplicity) of the characteristic function inside
// the box, from the winding number of its image along the boundary.
inline int count_roots_in_box(const CharSpec& spec, const Box& box,
                              const ContourOptions& opts = {}) {
  detail::ContourWalker walker(spec, opts);
  const double w = walker.winding(box);
  const double r = std::round(w);
  if (std::abs(w - r) > 0.25 || r < 0.0) {
    throw ContourNearZero("winding number not close to a non-negative integer");
  }
  return static_cast<int>(r);
}

struct RootSearchOptions {
  double imag_cap = 50.0;       // |Im| limit when no finite a-priori bound applies
  double sigma_floor = -40.0;   // deepest left edge tried
  double residual_tolerance = 1e-10;
  int max_bisection_depth = 60;
  int jitter_retries = 5;
  ContourOptions contour{};
};

struct RootReport {
  std::vector<Complex> roots;
  Box box;                                   // final search rectangle
  double v0_estimate = -std::numeric_limits<double>::infinity();
  bool certified_negative = false;
  std::optional<double> essential_abscissa;  // neutral root-chain abscissa
  bool complete = true;                      // box covered every root right of its left edge
};

// Newton iteration on the characteristic function; nullopt when it stalls.
inline std::optional<Complex> newton_refine(const CharSpec& spec, Complex z,
                                            double tolerance = 1e-10, int max_iter = 100) {
  for (int it = 0; it < max_iter; ++it) {
    const auto cv = characteristic(spec, z);
    if (std::abs(cv.value) < tolerance) return z;
    if (std::abs(cv.derivative) == 0.0) return std::nullopt;
    const Complex step = cv.value / cv.derivative;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
  }
  if (std::abs(characteristic(spec, z).value) < tolerance) return z;
  return std::nullopt;
}

inline bool stability_interval_check(double a, double b) { return a < b && b < -a; }

// Coefficients (lambda1, lambda2) of 2x(ax+by) <= -lambda1 x^2 + lambda2 y^2.
inline std::pair<double, double> dissipativity_margin(double a, double b, double eps) {
  if (!(eps > 0.0)) throw DomainError("dissipativity_margin needs eps > 0");
  return {-2.0 * a - eps, b * b / eps};
}

namespace detail {

inline constexpr std::array<double, 6> kJitter{0.0, 1.0, 1.618, 2.414, 3.303, 4.236};

// Count with outward box perturbations when a root hugs the boundary.
inline std::pair<int, Box> count_with_jitter(const CharSpec& spec, Box box,
                                             const RootSearchOptions& opts,
                                             bool left_edge_only = false) {
  const double unit = 1e-3 * std::max(1.0, std::max(box.width(), box.height()) * 1e-2);
  for (int attempt = 0; attempt <= opts.jitter_retries; ++attempt) {
    const double e = unit * kJitter[static_cast<std::size_t>(attempt) % kJitter.size()];
    Box b = box;
    if (left_edge_only) {
      b.re_lo -= e;
    } else {
      b = box.expanded(e);
    }
    try {
      return {count_roots_in_box(spec, b, opts.contour), b};
    } catch (const ContourNearZero&) {
      if (attempt == opts.jitter_retries) throw;
    }
  }
  throw ContourNearZero("unreachable");
}

class RootLocator {
 public:
  RootLocator(const CharSpec& spec, const RootSearchOptions& opts) : spec_(spec), opts_(opts) {}

  void locate(const Box& box, int n_inside, int depth, std::vector<Complex>& out) {
    if (n_inside <= 0) return;
    if (depth > opts_.max_bisection_depth) {
      throw BudgetExceeded("root bisection exceeded its depth limit");
    }
    const double size = std::max(box.width(), box.height());
    const bool tiny = size < 1e-7 * (1.0 + std::abs(box.center()));
    if (n_inside == 1 || tiny) {
      const auto z = newton_refine(spec_, box.center(), opts_.residual_tolerance);
      if (z && box.contains(*z, 1e-9 * (1.0 + size))) {
        for (int k = 0; k < (tiny ? n_inside : 1); ++k) out.push_back(*z);
        return;
      }
      if (tiny) throw BudgetExceeded("Newton refinement failed inside a resolved box");
    }
    static constexpr std::array<double, 5> kSplits{0.5, 0.5371, 0.4629, 0.5813, 0.4187};
    const bool split_re = box.width() >= box.height();
    for (double frac : kSplits) {
      Box lo = box, hi = box;
      if (split_re) {
        const double m = box.re_lo + frac * box.width();
        lo.re_hi = m;
        hi.re_lo = m;
      } else {
        const double m = box.im_lo + frac * box.height();
        lo.im_hi = m;
        hi.im_lo = m;
      }
      int n_lo = 0, n_hi = 0;
      try {
        n_lo = count_roots_in_box(spec_, lo, opts_.contour);
        n_hi = count_roots_in_box(spec_, hi, opts_.contour);
      } catch (const ContourNearZero&) {
        continue;
      }
      if (n_lo + n_hi != n_inside) continue;
      locate(lo, n_lo, depth + 1, out);
      locate(hi, n_hi, depth + 1, out);
      return;
    }
    throw ContourNearZero("no clean split line found while bisecting a root box");
  }

 private:
  const CharSpec& spec_;
  RootSearchOptions opts_;
};

// Abscissa where sum |c_k| e^{s theta_k} over the atoms of rho equals one;
// neutral root chains accumulate on that vertical line.
inline std::optional<double> essential_abscissa(const SignedMeasure& rho) {
  double delayed = 0.0, at_zero = 0.0;
  for (const auto& a : rho.atoms()) {
    if (a.theta < 0.0) delayed += std::abs(a.weight);
    else at_zero += std::abs(a.weight);
  }
  if (delayed == 0.0 || at_zero >= 1.0) return std::nullopt;
  auto h = [&](double s) {
    double acc = -1.0;
    for (const auto& a : rho.atoms()) acc += std::abs(a.weight) * std::exp(s * a.theta);
    return acc;
  };
  double lo = -1.0, hi = 1.0;
  while (h(lo) <= 0.0) lo *= 2.0;
  while (h(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Smallest sigma with transform_bound(rho, sigma) <= target (bound is
// non-increasing in sigma).
inline double abscissa_for_bound(const SignedMeasure& rho, double target) {
  double lo = -1.0, hi = 0.0;
  while (transform_bound(rho, hi) > target) hi = hi * 2.0 + 1.0;
  while (transform_bound(rho, lo) <= target && lo > -1e3) lo *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (transform_bound(rho, mid) > target ? lo : hi) = mid;
  }
  return hi;
}

inline bool root_order(Complex x, Complex y) {
  if (x.real() != y.real()) return x.real() > y.real();
  if (std::abs(x.imag()) != std::abs(y.imag())) return std::abs(x.imag()) < std::abs(y.imag());
  return x.imag() > y.imag();
}

}  // namespace detail

// Locates the `count` characteristic roots with the largest real parts and
// certifies (or not) that no root has a non-negative real part.
inline RootReport rightmost_roots(const CharSpec& spec, int count,
                                  const RootSearchOptions& opts = {}) {
  if (count < 1) throw DomainError("rightmost_roots needs count >= 1");
  const bool neutral = spec.kind == CharKind::neutral && spec.rho;
  const double rho_inf = [&] {
    double a0 = 0.0;
    if (neutral) {
      for (const auto& a : spec.rho->atoms()) {
        if (a.theta == 0.0) a0 += std::abs(a.weight);
      }
    }
    return a0;
  }();

  // |lambda| <= bound(sigma) for every root with Re(lambda) >= sigma.
  auto bound = [&](double sigma) {
    const double m = transform_bound(spec.mu, sigma);
    if (!neutral) return m;
    const double g = transform_bound(*spec.rho, sigma);
    if (g >= 1.0) return std::numeric_limits<double>::infinity();
    return m / (1.0 - g);
  };

  RootReport report;
  if (neutral) report.essential_abscissa = detail::essential_abscissa(*spec.rho);

  const double b0 = bound(0.0);
  const double pad = 0.25 + 0.01 * b0;
  const double sigma_hi = b0 + pad;

  // Certification box: every root with Re >= 0 lies inside it.
  {
    const Box cert{0.0, sigma_hi, -(b0 + pad), b0 + pad};
    const auto [n, used] = detail::count_with_jitter(spec, cert, opts, /*left_edge_only=*/true);
    const bool chain_ok = !report.essential_abscissa || *report.essential_abscissa < 0.0;
    report.certified_negative = (n == 0) && chain_ok;
  }

  double sigma_start = 0.0;
  if (neutral) sigma_start = detail::abscissa_for_bound(*spec.rho, 0.5 * (1.0 + rho_inf));
  sigma_start = std::min(sigma_start, 0.0);

  std::vector<Complex> found;
  for (double step = 1.0371;; step *= 2.0) {
    const double sigma_lo = std::max(sigma_start - step, opts.sigma_floor);
    double omega = bound(sigma_lo);
    bool complete = true;
    if (!(omega + pad <= opts.imag_cap)) {
      omega = opts.imag_cap - pad;
      complete = false;
    }
    const Box box{sigma_lo, sigma_hi, -(omega + pad), omega + pad};
    const auto [n, used] = detail::count_with_jitter(spec, box, opts);
    const bool last = sigma_lo <= opts.sigma_floor;
    if (n >= count || last) {
      found.clear();
      detail::RootLocator(spec, opts).locate(used, n, 0, found);
      report.box = used;
      report.complete = complete;
      break;
    }
  }

  std::sort(found.begin(), found.end(), detail::root_order);
  std::vector<Complex> unique;
  for (const auto& z : found) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](Complex u) {
      return std::abs(u - z) < 1e-8 * (1.0 + std::abs(z));
    });
    if (!dup) unique.push_back(z);
  }
  std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(count), unique.size());
  // Never split a conjugate pair at the cut.
  while (keep < unique.size() && keep > 0 &&
         std::abs(unique[keep] - std::conj(unique[keep - 1])) <
             1e-8 * (1.0 + std::abs(unique[keep]))) {
    ++keep;
  }
  report.roots.assign(unique.begin(), unique.begin() + static_cast<std::ptrdiff_t>(keep));

  double v0 = -std::numeric_limits<double>::infinity();
  for (const auto& z : report.roots) v0 = std::max(v0, z.real());
  if (report.essential_abscissa) v0 = std::max(v0, *report.essential_abscissa);
  report.v0_estimate = v0;
  return report;
}

}  // namespace retard
