#pragma once
// Alpha-divergence generator family: f_alpha, derivative, convex conjugate,
// conjugate derivative, domain guards, divergence between finite distributions.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace epo {

enum class NamedCase { Generic, KL, ReverseKL, Pearson, Neyman, Hellinger };

struct GeneratorSpec {
  double alpha = 1.0;
  NamedCase named_case = NamedCase::Generic;

  static GeneratorSpec make(double a) { return GeneratorSpec{a, tag_for(a)}; }
  static NamedCase tag_for(double a) {
    if (std::abs(a - 1.0) < 1e-12) return NamedCase::KL;
    if (std::abs(a) < 1e-12) return NamedCase::ReverseKL;
    if (std::abs(a - 2.0) < 1e-12) return NamedCase::Pearson;
    if (std::abs(a + 1.0) < 1e-12) return NamedCase::Neyman;
    if (std::abs(a - 0.5) < 1e-12) return NamedCase::Hellinger;
    return NamedCase::Generic;
  }
};

namespace detail {
constexpr double kAlphaSingular = 1e-9;  // switch to analytic limits this close to 0 or 1
constexpr double kExpCap = 700.0;        // IEEE double overflow guard for e^y
inline bool near(double a, double k) { return std::abs(a - k) < kAlphaSingular; }
}  // namespace detail

// Half-line descriptor for dom f*. alpha=1: all reals. alpha<1: y < 1/(1-alpha),
// open. alpha>1: y > 1/(1-alpha), closed by continuous extension.
struct ConjugateDomain {
  bool bounded = false;
  double bound = 0.0;
  bool upper = false;   // true: y < bound (or <=); false: y > bound (or >=)
  bool closed = false;  // boundary admitted (alpha > 1 extension)
};

inline ConjugateDomain conjugate_domain(const GeneratorSpec& spec) {
  const double a = spec.alpha;
  if (detail::near(a, 1.0)) return {false, 0.0, false, false};
  if (a < 1.0) return {true, 1.0 / (1.0 - a), true, false};
  return {true, 1.0 / (1.0 - a), false, true};
}

inline double f(const GeneratorSpec& spec, double x) {
  if (!(x > 0.0)) throw std::domain_error("f: require x > 0, got " + std::to_string(x));
  const double a = spec.alpha;
  if (detail::near(a, 1.0)) return x * std::log(x) - (x - 1.0);
  if (detail::near(a, 0.0)) return -std::log(x) + (x - 1.0);
  return (std::pow(x, a) - 1.0 - a * (x - 1.0)) / (a * (a - 1.0));
}

inline double f_prime(const GeneratorSpec& spec, double x) {
  if (!(x > 0.0)) throw std::domain_error("f_prime: require x > 0, got " + std::to_string(x));
  const double a = spec.alpha;
  if (detail::near(a, 1.0)) return std::log(x);
  if (detail::near(a, 0.0)) return 1.0 - 1.0 / x;
  return (std::pow(x, a - 1.0) - 1.0) / (a - 1.0);
}

namespace detail {
// Checks y against dom f*. Returns the base 1+(alpha-1)y clamped to 0 at the
// closed alpha>1 boundary; throws on genuine violations.
inline double conjugate_base(double alpha, double y) {
  const double b = 1.0 + (alpha - 1.0) * y;
  if (b > 0.0) return b;
  if (alpha > 1.0) {
    const double bound = 1.0 / (1.0 - alpha);
    if (y >= bound - 1e-9 * (1.0 + std::abs(bound))) return 0.0;
    throw std::domain_error("f_star: y = " + std::to_string(y) +
                            " violates y > " + std::to_string(bound));
  }
  throw std::domain_error("f_star: y = " + std::to_string(y) +
                          " violates y(1-alpha) < 1, i.e. y < " +
                          std::to_string(1.0 / (1.0 - alpha)));
}
}  // namespace detail

inline double f_star(const GeneratorSpec& spec, double y) {
  const double a = spec.alpha;
  if (detail::near(a, 1.0)) {
    if (y > detail::kExpCap)
      throw std::domain_error("f_star: exp argument " + std::to_string(y) + " exceeds cap");
    return std::expm1(y);
  }
  if (detail::near(a, 0.0)) {
    if (y >= 1.0) throw std::domain_error("f_star: y = " + std::to_string(y) + " violates y < 1");
    return -std::log1p(-y);
  }
  const double b = detail::conjugate_base(a, y);
  if (b == 0.0) return -1.0 / a;  // continuous extension at the alpha>1 boundary
  return std::pow(b, a / (a - 1.0)) / a - 1.0 / a;
}

inline double f_star_prime(const GeneratorSpec& spec, double y) {
  const double a = spec.alpha;
  if (detail::near(a, 1.0)) {
    if (y > detail::kExpCap)
      throw std::domain_error("f_star_prime: exp argument " + std::to_string(y) + " exceeds cap");
    return std::exp(y);
  }
  if (detail::near(a, 0.0)) {
    if (y >= 1.0)
      throw std::domain_error("f_star_prime: y = " + std::to_string(y) + " violates y < 1");
    return 1.0 / (1.0 - y);
  }
  const double b = detail::conjugate_base(a, y);
  if (b == 0.0) return 0.0;  // zero-mass boundary for alpha > 1
  return std::pow(b, 1.0 / (a - 1.0));
}

struct FiniteDistribution {
  std::vector<double> weights;
  bool normalized = true;
};

// D_f(p || q) = sum_i q_i f(p_i / q_i); requires support(p) subset of support(q).
inline double divergence(const GeneratorSpec& spec, const FiniteDistribution& p,
                         const FiniteDistribution& q) {
  if (p.weights.size() != q.weights.size())
    throw std::invalid_argument("divergence: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < p.weights.size(); ++i) {
    const double pi = p.weights[i], qi = q.weights[i];
    if (qi <= 0.0) {
      if (pi > 0.0)
        throw std::domain_error("divergence: outcome " + std::to_string(i) +
                                " has p > 0 but q = 0 (absolute continuity)");
      continue;
    }
    if (pi == 0.0) {
      // f(0) limit: finite (= 1/alpha) only for alpha > 0
      const double a = spec.alpha;
      if (a <= 0.0) return std::numeric_limits<double>::infinity();
      acc += qi * (detail::near(a, 1.0) ? 1.0 : 1.0 / a);
      continue;
    }
    acc += qi * f(spec, pi / qi);
  }
  return acc;
}

}  // namespace epo
