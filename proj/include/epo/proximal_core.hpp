#pragma once
// Sample-based dual of policy evaluation: objective g(V, lambda, kappa) with a
// generic f-divergence, closed-form KL/Pearson specializations, kappa
// elimination, temperature scheduling, and the epsilon-constraint variant.

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "epo/divergence.hpp"
#include "epo/tabular_mdp.hpp"

namespace epo {

struct DualSolution {
  std::vector<double> value_table;
  double baseline_lambda = 0.0;
  std::vector<double> kappa;  // per sample / per cell, >= 0
  double eta = 1.0;
  double dual_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct TemperatureSchedule {
  double eta0 = 1.0;
  double decay = 1.0;  // a in (0, 1]
  double at(int i) const { return eta0 * std::pow(decay, i); }
};

inline std::vector<double> advantages(const TransitionBatch& batch,
                                      const std::vector<double>& value_table) {
  std::vector<double> adv;
  adv.reserve(batch.tuples.size());
  for (const Transition& t : batch.tuples)
    adv.push_back(t.reward + value_table[t.next_state] - value_table[t.state]);
  return adv;
}

// Smallest kappa >= 0 placing y = (A - lambda + kappa)/eta inside the closed
// conjugate domain; identically zero for alpha <= 1.
inline double kappa_star(const GeneratorSpec& spec, double advantage, double lambda, double eta) {
  if (spec.alpha <= 1.0) return 0.0;
  return std::max(0.0, eta / (1.0 - spec.alpha) - (advantage - lambda));
}

// --- Generalized weighted-cell dual problem -------------------------------
//
// Each cell carries a probability weight, a reward, and a next-state
// distribution. A sampled batch is the special case weight = 1/N with a point
// mass on the observed next state; the exact-model path puts the full
// transition row and rho_pi0 weights here.

struct DualCell {
  int state = 0;
  int action = -1;  // bookkeeping for policy updates; unused by the solver
  double weight = 0.0;
  double reward = 0.0;
  std::vector<std::pair<int, double>> next;  // (state, probability)
};

struct DualProblem {
  int n_states = 0;
  std::vector<DualCell> cells;

  double advantage(size_t i, const std::vector<double>& V) const {
    const DualCell& c = cells[i];
    double ev = 0.0;
    for (auto [t, p] : c.next) ev += p * V[t];
    return c.reward + ev - V[c.state];
  }
};

inline DualProblem batch_problem(const TransitionBatch& batch, int n_states) {
  if (batch.tuples.empty()) throw std::invalid_argument("empty batch");
  DualProblem prob;
  prob.n_states = n_states;
  const double w = 1.0 / static_cast<double>(batch.tuples.size());
  for (const Transition& t : batch.tuples)
    prob.cells.push_back({t.state, t.action, w, t.reward, {{t.next_state, 1.0}}});
  return prob;
}

// Exact-expectation path: one cell per (s,a) with weight rho_pi0(s,a).
inline DualProblem model_problem(const TabularMDP& mdp, const TabularPolicy& policy) {
  const FiniteDistribution rho = stationary_distribution(mdp, policy);
  DualProblem prob;
  prob.n_states = mdp.n_states;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = rho.weights[static_cast<size_t>(s) * mdp.n_actions + a];
      if (w <= 0.0) continue;
      DualCell cell{s, a, w, mdp.reward[s][a], {}};
      for (int t = 0; t < mdp.n_states; ++t)
        if (mdp.transition[s][a][t] > 0.0) cell.next.push_back({t, mdp.transition[s][a][t]});
      prob.cells.push_back(std::move(cell));
    }
  return prob;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Objective over the cell problem; +inf when (V, lambda) is infeasible for
// alpha <= 1 instead of throwing (line searches probe infeasible points).
inline double cell_objective(const GeneratorSpec& spec, const DualProblem& prob,
                             const std::vector<double>& V, double lambda, double eta) {
  double acc = 0.0;
  for (size_t i = 0; i < prob.cells.size(); ++i) {
    const double adv = prob.advantage(i, V);
    const double kap = kappa_star(spec, adv, lambda, eta);
    const double y = (adv - lambda + kap) / eta;
    if (spec.alpha <= 1.0) {
      if (detail::near(spec.alpha, 1.0)) {
        if (y > detail::kExpCap) return kInf;
      } else if (y * (1.0 - spec.alpha) >= 1.0) {
        return kInf;
      }
    }
    acc += prob.cells[i].weight * f_star(spec, y);
  }
  return eta * acc + lambda;
}

// Gradient wrt (V, lambda); weights[i] receives f*'(y_i). Assumes feasibility.
inline void cell_gradient(const GeneratorSpec& spec, const DualProblem& prob,
                          const std::vector<double>& V, double lambda, double eta,
                          std::vector<double>& gV, double& glam, std::vector<double>& weights) {
  gV.assign(V.size(), 0.0);
  weights.resize(prob.cells.size());
  double wsum = 0.0;
  for (size_t i = 0; i < prob.cells.size(); ++i) {
    const DualCell& c = prob.cells[i];
    const double adv = prob.advantage(i, V);
    const double kap = kappa_star(spec, adv, lambda, eta);
    const double w = f_star_prime(spec, (adv - lambda + kap) / eta);
    weights[i] = w;
    const double cw = c.weight * w;
    wsum += cw;
    for (auto [t, p] : c.next) gV[t] += cw * p;
    gV[c.state] -= cw;
  }
  glam = 1.0 - wsum;
}

// Feasibility repair: pull lambda up so every conjugate argument sits safely
// inside the domain (margin 10% of the distance to the boundary).
inline double repair_lambda(const GeneratorSpec& spec, const DualProblem& prob,
                            const std::vector<double>& V, double lambda, double eta) {
  double amax = -kInf;
  for (size_t i = 0; i < prob.cells.size(); ++i) amax = std::max(amax, prob.advantage(i, V));
  double cap;
  if (detail::near(spec.alpha, 1.0))
    cap = detail::kExpCap;
  else if (spec.alpha < 1.0)
    cap = 1.0 / (1.0 - spec.alpha);
  else
    return lambda;  // alpha > 1: kappa keeps every argument admissible
  return std::max(lambda, amax - 0.9 * cap * eta);
}

// Exact 1-D solve for lambda at fixed V: root of mean weight = 1, which is
// monotone decreasing in lambda. Out-of-domain lambdas count as the high side.
inline double bisect_lambda(const GeneratorSpec& spec, const DualProblem& prob,
                            const std::vector<double>& V, double eta) {
  double amin = kInf, amax = -kInf, wtot = 0.0;
  std::vector<double> adv(prob.cells.size());
  for (size_t i = 0; i < prob.cells.size(); ++i) {
    adv[i] = prob.advantage(i, V);
    amin = std::min(amin, adv[i]);
    amax = std::max(amax, adv[i]);
    wtot += prob.cells[i].weight;
  }
  auto excess = [&](double lam) {
    double acc = 0.0;
    for (size_t i = 0; i < prob.cells.size(); ++i) {
      const double kap = kappa_star(spec, adv[i], lam, eta);
      const double y = (adv[i] - lam + kap) / eta;
      if (spec.alpha <= 1.0) {
        if (detail::near(spec.alpha, 1.0)) {
          if (y > detail::kExpCap) return kInf;
        } else if (y * (1.0 - spec.alpha) >= 1.0) {
          return kInf;
        }
      }
      acc += prob.cells[i].weight * f_star_prime(spec, y);
    }
    return acc - wtot;
  };
  double lo = amin - eta * 10.0, hi = amax + eta * 10.0;
  int guard = 0;
  while (excess(hi) > 0.0) {
    hi += std::max(1.0, 10.0 * eta);
    if (++guard > 200)
      throw std::runtime_error("bisect_lambda: bracket failure, lambda range [" +
                               std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

struct SolveOptions {
  double tol = 1e-8;
  int max_iters = 5000;
  bool freeze_V = false;
};

// Full-batch gradient descent on (V, lambda) with Barzilai-Borwein step sizes
// safeguarded by backtracking; kappa is eliminated in closed form.
inline DualSolution minimize_gd(const GeneratorSpec& spec, const DualProblem& prob, double eta,
                                std::vector<double> V, double lambda, const SolveOptions& opt) {
  const size_t S = V.size();
  lambda = repair_lambda(spec, prob, V, lambda, eta);
  if (opt.freeze_V) lambda = bisect_lambda(spec, prob, V, eta);

  std::vector<double> gV, weights, prevg;
  double glam = 0.0, prevglam = 0.0, step = 1.0;
  std::vector<double> prevV = V;
  double prevlam = lambda;
  double obj = cell_objective(spec, prob, V, lambda, eta);
  if (!std::isfinite(obj))
    throw std::runtime_error("solve_dual: objective not finite at start; try a larger eta");

  int it = 0;
  bool converged = false;
  for (; it < opt.max_iters; ++it) {
    cell_gradient(spec, prob, V, lambda, eta, gV, glam, weights);
    if (opt.freeze_V) {
      gV.assign(S, 0.0);
      glam = 0.0;  // lambda already solved exactly
    }
    double gnorm = std::abs(glam);
    for (double g : gV) gnorm = std::max(gnorm, std::abs(g));
    if (gnorm < opt.tol) {
      converged = true;
      break;
    }
    if (it > 0) {  // BB step from the previous iterate
      double sy = 0.0, yy = 0.0;
      for (size_t u = 0; u < S; ++u) {
        const double dy = gV[u] - prevg[u];
        sy += (V[u] - prevV[u]) * dy;
        yy += dy * dy;
      }
      const double dyl = glam - prevglam;
      sy += (lambda - prevlam) * dyl;
      yy += dyl * dyl;
      if (yy > 0.0 && sy > 0.0) step = sy / yy;
    }
    prevV = V;
    prevlam = lambda;
    prevg = gV;
    prevglam = glam;
    double g2 = glam * glam;
    for (double g : gV) g2 += g * g;
    double st = std::min(std::max(step, 1e-12), 1e8);
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt) {
      std::vector<double> V2 = V;
      for (size_t u = 0; u < S; ++u) V2[u] -= st * gV[u];
      const double lam2 = lambda - st * glam;
      const double o2 = cell_objective(spec, prob, V2, lam2, eta);
      if (o2 <= obj - 1e-4 * st * g2) {
        V = std::move(V2);
        lambda = lam2;
        obj = o2;
        moved = true;
        break;
      }
      st *= 0.5;
    }
    if (!moved) break;
  }
  if (!std::isfinite(obj)) throw std::runtime_error("solve_dual: diverged; try a larger eta");

  DualSolution sol;
  sol.value_table = std::move(V);
  sol.baseline_lambda = lambda;
  sol.eta = eta;
  sol.dual_value = obj;
  sol.converged = converged || opt.freeze_V;
  sol.iterations = it;
  sol.kappa.resize(prob.cells.size());
  for (size_t i = 0; i < prob.cells.size(); ++i)
    sol.kappa[i] = kappa_star(spec, prob.advantage(i, sol.value_table), lambda, eta);
  return sol;
}

// Block-coordinate variant: exact lambda bisection alternating with a
// backtracking gradient step on V. Much more robust than the joint scheme at
// very small temperatures, where the conjugate domain sliver makes joint line
// searches stall; used by the policy-iteration driver.
inline DualSolution minimize_bc(const GeneratorSpec& spec, const DualProblem& prob, double eta,
                                std::vector<double> V, const SolveOptions& opt) {
  const size_t S = V.size();
  std::vector<double> gV, weights;
  double glam = 0.0, step = 1.0, lambda = 0.0;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iters; ++it) {
    lambda = bisect_lambda(spec, prob, V, eta);
    cell_gradient(spec, prob, V, lambda, eta, gV, glam, weights);
    double gnorm = 0.0;
    for (double g : gV) gnorm = std::max(gnorm, std::abs(g));
    if (gnorm < opt.tol) {
      converged = true;
      break;
    }
    const double obj = cell_objective(spec, prob, V, lambda, eta);
    double g2 = 0.0;
    for (double g : gV) g2 += g * g;
    double st = std::min(std::max(step, 1e-12), 1e8);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> V2 = V;
      for (size_t u = 0; u < S; ++u) V2[u] -= st * gV[u];
      const double o2 = cell_objective(spec, prob, V2, lambda, eta);
      if (o2 <= obj - 1e-4 * st * g2) {
        V = std::move(V2);
        moved = true;
        break;
      }
      st *= 0.5;
    }
    if (!moved) break;
    step = std::min(st * 2.0, 1e8);
  }
  lambda = bisect_lambda(spec, prob, V, eta);

  DualSolution sol;
  sol.value_table = std::move(V);
  sol.baseline_lambda = lambda;
  sol.eta = eta;
  sol.dual_value = cell_objective(spec, prob, sol.value_table, lambda, eta);
  sol.converged = converged;
  sol.iterations = it;
  sol.kappa.resize(prob.cells.size());
  for (size_t i = 0; i < prob.cells.size(); ++i)
    sol.kappa[i] = kappa_star(spec, prob.advantage(i, sol.value_table), lambda, eta);
  return sol;
}

}  // namespace detail

// g(V, lambda) = eta * mean[f*((A - lambda + kappa)/eta)] + lambda over the
// batch, with kappa supplied by kappa_star. Throws (with the sample index) on
// conjugate-domain violations for alpha <= 1.
inline double dual_objective(const GeneratorSpec& spec, const TransitionBatch& batch,
                             const std::vector<double>& value_table, double lambda, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("dual_objective: eta must be positive");
  const std::vector<double> adv = advantages(batch, value_table);
  double acc = 0.0;
  for (size_t i = 0; i < adv.size(); ++i) {
    const double kap = kappa_star(spec, adv[i], lambda, eta);
    const double y = (adv[i] - lambda + kap) / eta;
    try {
      acc += f_star(spec, y);
    } catch (const std::domain_error& e) {
      throw std::domain_error("dual_objective: sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return eta * acc / static_cast<double>(adv.size()) + lambda;
}

inline DualSolution solve_dual(const GeneratorSpec& spec, const TransitionBatch& batch,
                               int n_states, double eta, const DualSolution* init = nullptr,
                               double tol = 1e-8, int max_iters = 5000, bool freeze_V = false) {
  if (!(eta > 0.0)) throw std::invalid_argument("solve_dual: eta must be positive");
  const DualProblem prob = batch_problem(batch, n_states);
  std::vector<double> V(n_states, 0.0);
  double lambda = 0.0;
  if (init && !init->value_table.empty()) {
    V = init->value_table;
    lambda = init->baseline_lambda;
  } else {
    double s = 0.0;  // lambda starts at mean advantage
    for (size_t i = 0; i < prob.cells.size(); ++i) s += prob.cells[i].weight * prob.advantage(i, V);
    lambda = s;
  }
  detail::SolveOptions opt{tol, max_iters, freeze_V};
  return detail::minimize_gd(spec, prob, eta, std::move(V), lambda, opt);
}

// Exact-expectation dual over the (s,a) grid weighted by rho_pi0.
inline DualSolution solve_dual_model(const GeneratorSpec& spec, const TabularMDP& mdp,
                                     const TabularPolicy& policy, double eta, double tol = 1e-8,
                                     int max_iters = 5000) {
  const DualProblem prob = model_problem(mdp, policy);
  double lambda = 0.0;
  std::vector<double> V(mdp.n_states, 0.0);
  for (size_t i = 0; i < prob.cells.size(); ++i)
    lambda += prob.cells[i].weight * prob.advantage(i, V);
  detail::SolveOptions opt{tol, max_iters, false};
  return detail::minimize_gd(spec, prob, eta, std::move(V), lambda, opt);
}

// g1 = eta * log(mean(exp(A/eta))), with max-subtraction.
inline double closed_form_kl_dual(const TransitionBatch& batch,
                                  const std::vector<double>& value_table, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("closed_form_kl_dual: eta must be positive");
  const std::vector<double> adv = advantages(batch, value_table);
  const double m = *std::max_element(adv.begin(), adv.end());
  double acc = 0.0;
  for (double a : adv) acc += std::exp((a - m) / eta);
  return m + eta * std::log(acc / static_cast<double>(adv.size()));
}

struct PearsonDual {
  double value = 0.0;    // centered second moment over 2*eta
  double lambda2 = 0.0;  // eliminated baseline, mean advantage
};

inline PearsonDual closed_form_pearson_dual(const TransitionBatch& batch,
                                            const std::vector<double>& value_table, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("closed_form_pearson_dual: eta must be positive");
  const std::vector<double> adv = advantages(batch, value_table);
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  return {var / n / (2.0 * eta), mean};
}

// Divergence of the implied primal reweighting at a solved dual.
inline double implied_divergence(const GeneratorSpec& spec, const DualProblem& prob,
                                 const DualSolution& sol) {
  double acc = 0.0;
  for (size_t i = 0; i < prob.cells.size(); ++i) {
    const double y =
        (prob.advantage(i, sol.value_table) - sol.baseline_lambda + sol.kappa[i]) / sol.eta;
    const double w = f_star_prime(spec, y);
    const double a = spec.alpha;
    const double fw = (w > 0.0) ? f(spec, w) : (a > 0.0 ? (detail::near(a, 1.0) ? 1.0 : 1.0 / a)
                                                        : detail::kInf);
    acc += prob.cells[i].weight * fw;
  }
  return acc;
}

// Joint minimization of g + eta*epsilon over (V, lambda, eta >= 0): outer
// bisection on eta against the implied divergence, which decreases in eta.
inline DualSolution solve_dual_with_epsilon(const GeneratorSpec& spec, const TransitionBatch& batch,
                                            int n_states, double epsilon, double eta_min = 1e-6,
                                            double tol = 1e-8, int max_iters = 5000) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const DualProblem prob = batch_problem(batch, n_states);
  detail::SolveOptions opt{tol, max_iters, false};
  auto solve_at = [&](double eta) {
    // block-coordinate path: the baseline is bisected exactly, so the implied
    // divergence stays meaningful even at very small temperatures
    std::vector<double> V(n_states, 0.0);
    return detail::minimize_bc(spec, prob, eta, std::move(V), opt);
  };
  auto div_at = [&](double eta) { return implied_divergence(spec, prob, solve_at(eta)); };

  if (div_at(eta_min) < epsilon) {
    // divergence identically zero (uniform advantages): any eta is optimal
    if (div_at(std::max(1.0, eta_min)) <= 1e-12) return solve_at(std::max(1.0, eta_min));
    throw std::runtime_error("solve_dual_with_epsilon: unconstrained improvement, eta collapses "
                             "to 0 (divergence below epsilon everywhere)");
  }
  double lo = eta_min, hi = std::max(1.0, 2.0 * eta_min);
  int guard = 0;
  while (div_at(hi) > epsilon) {
    hi *= 2.0;
    if (++guard > 60) throw std::runtime_error("solve_dual_with_epsilon: no eta bracket");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (div_at(mid) > epsilon)
      lo = mid;
    else
      hi = mid;
  }
  return solve_at(hi);
}

// |g_alpha - g_2| at their respective optimal baselines with V frozen; decays
// as the second order in 1/eta.
inline double high_temp_gap(const GeneratorSpec& spec, const TransitionBatch& batch,
                            const std::vector<double>& value_table, double eta) {
  const DualProblem prob = batch_problem(batch, static_cast<int>(value_table.size()));
  const double lam = detail::bisect_lambda(spec, prob, value_table, eta);
  const double ga = detail::cell_objective(spec, prob, value_table, lam, eta);
  const PearsonDual g2 = closed_form_pearson_dual(batch, value_table, eta);
  return std::abs(ga - (g2.value + g2.lambda2));
}

}  // namespace epo
