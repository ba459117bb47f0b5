#pragma once
// Primal recovery and policy improvement: per-sample improvement weights,
// weighted-count tabular update, exact-model reweighting, and the Pearson
// equivalence weights.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "epo/divergence.hpp"
#include "epo/proximal_core.hpp"
#include "epo/tabular_mdp.hpp"

namespace epo {

struct ImprovementWeights {
  std::vector<double> w;  // per sample, w_t = f*'((A_t - lambda + kappa_t)/eta)
};

inline ImprovementWeights improvement_weights(const GeneratorSpec& spec,
                                              const TransitionBatch& batch,
                                              const DualSolution& dual) {
  const std::vector<double> adv = advantages(batch, dual.value_table);
  ImprovementWeights out;
  out.w.reserve(adv.size());
  for (size_t i = 0; i < adv.size(); ++i) {
    const double kap = i < dual.kappa.size()
                           ? dual.kappa[i]
                           : kappa_star(spec, adv[i], dual.baseline_lambda, dual.eta);
    const double y = (adv[i] - dual.baseline_lambda + kap) / dual.eta;
    try {
      out.w.push_back(f_star_prime(spec, y));
    } catch (const std::domain_error& e) {
      throw std::domain_error("improvement_weights: sample " + std::to_string(i) + ": " +
                              e.what());
    }
  }
  return out;
}

// Weighted maximum likelihood in closed form: pi(a|s) proportional to the
// summed sample weights at (s,a). Unvisited states and zero-mass rows keep the
// previous policy row.
inline TabularPolicy tabular_policy_update(const TabularPolicy& policy0,
                                           const TransitionBatch& batch,
                                           const ImprovementWeights& weights) {
  if (weights.w.size() != batch.tuples.size())
    throw std::invalid_argument("tabular_policy_update: weight/batch size mismatch");
  TabularPolicy pi = policy0;
  const int A = pi.probs.empty() ? 0 : static_cast<int>(pi.probs[0].size());
  std::vector<std::vector<double>> mass(pi.probs.size(), std::vector<double>(A, 0.0));
  std::vector<char> visited(pi.probs.size(), 0);
  for (size_t t = 0; t < batch.tuples.size(); ++t) {
    mass[batch.tuples[t].state][batch.tuples[t].action] += weights.w[t];
    visited[batch.tuples[t].state] = 1;
  }
  for (size_t s = 0; s < pi.probs.size(); ++s) {
    if (!visited[s]) continue;
    double tot = 0.0;
    for (double m : mass[s]) tot += m;
    if (!(tot > 0.0) || !std::isfinite(tot)) continue;  // degenerate guard
    for (int a = 0; a < A; ++a) pi.probs[s][a] = mass[s][a] / tot;
  }
  return pi;
}

// pi(a|s) = rho_pi(s,a) / sum_a rho_pi(s,a) with rho_pi = rho_pi0 * f*'(...)
// evaluated on the full grid with exact model expectations.
inline TabularPolicy exact_primal_policy(const TabularMDP& mdp, const TabularPolicy& policy0,
                                         const GeneratorSpec& spec, const DualSolution& dual) {
  TabularPolicy pi = policy0;
  for (int s = 0; s < mdp.n_states; ++s) {
    bool reachable = false;
    std::vector<double> row(mdp.n_actions, 0.0);
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (policy0.probs[s][a] <= 0.0) continue;
      double ev = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) ev += mdp.transition[s][a][t] * dual.value_table[t];
      const double adv = mdp.reward[s][a] + ev - dual.value_table[s];
      const double kap = kappa_star(spec, adv, dual.baseline_lambda, dual.eta);
      row[a] = policy0.probs[s][a] *
               f_star_prime(spec, (adv - dual.baseline_lambda + kap) / dual.eta);
      reachable = true;
    }
    if (!reachable) continue;
    double tot = 0.0;
    for (double m : row) tot += m;
    if (!(tot > 0.0))
      throw std::runtime_error("exact_primal_policy: zero mass at state " + std::to_string(s) +
                               " (dual variables not optimal)");
    for (int a = 0; a < mdp.n_actions; ++a) pi.probs[s][a] = row[a] / tot;
  }
  return pi;
}

// (A_t - mean(A) + eta)/eta; valid only for the Pearson case with no active
// kappa clipping.
inline std::vector<double> pearson_equivalence_weights(const TransitionBatch& batch,
                                                       const DualSolution& dual) {
  for (size_t i = 0; i < dual.kappa.size(); ++i)
    if (dual.kappa[i] > 0.0)
      throw std::runtime_error("pearson_equivalence_weights: kappa active at sample " +
                               std::to_string(i) + "; equivalence needs a larger eta");
  const std::vector<double> adv = advantages(batch, dual.value_table);
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  std::vector<double> w;
  w.reserve(adv.size());
  for (double a : adv) w.push_back((a - mean + dual.eta) / dual.eta);
  return w;
}

}  // namespace epo
