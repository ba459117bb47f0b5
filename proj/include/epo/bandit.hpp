#pragma once
// Stochastic multi-armed bandit specialization: value estimation, f-divergence
// policy updates without a value function, UCB1 baseline, regret accounting.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "epo/divergence.hpp"
#include "epo/proximal_core.hpp"

namespace epo {

struct BanditEnv {
  std::vector<double> arm_means;
  double reward_noise_std = 0.5;
};

struct BanditState {
  std::vector<int> pull_counts;
  std::vector<double> value_estimates;  // running mean of observed rewards
  std::vector<double> policy;
  double eta = 1.0;
  int timestep = 0;

  static BanditState fresh(int arms, double eta) {
    BanditState s;
    s.pull_counts.assign(arms, 0);
    s.value_estimates.assign(arms, 0.0);  // unpulled arms start at 0, no optimism
    s.policy.assign(arms, 1.0 / arms);
    s.eta = eta;
    return s;
  }
};

struct RegretRecord {
  std::vector<double> mean;  // cumulative regret per timestep, averaged over runs
  std::vector<double> ci95;  // 95% confidence half-widths
};

namespace detail {

inline uint64_t run_seed(uint64_t seed, int run) {
  return seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(run + 1));
}

inline double normal01(std::mt19937_64& rng) {
  // Box-Muller without caching: portable, fixed draws per call
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

// One proximal step: solve the 1-D dual for lambda (kappa eliminated), then
// reweight pi by f*'((Qhat - lambda + kappa)/eta).
inline std::vector<double> bandit_policy_update(const GeneratorSpec& spec,
                                                const BanditState& state) {
  if (!(state.eta > 0.0)) throw std::invalid_argument("bandit_policy_update: eta must be positive");
  const int arms = static_cast<int>(state.policy.size());
  DualProblem prob;  // arms as cells of a single-state problem, V = 0
  prob.n_states = 1;
  for (int a = 0; a < arms; ++a)
    prob.cells.push_back({0, a, state.policy[a], state.value_estimates[a], {{0, 1.0}}});
  const std::vector<double> V(1, 0.0);
  const double lambda = detail::bisect_lambda(spec, prob, V, state.eta);

  std::vector<double> next(arms);
  double tot = 0.0;
  for (int a = 0; a < arms; ++a) {
    const double q = state.value_estimates[a];
    const double kap = kappa_star(spec, q, lambda, state.eta);
    next[a] = state.policy[a] * f_star_prime(spec, (q - lambda + kap) / state.eta);
    tot += next[a];
  }
  for (double& p : next) p /= tot;
  return next;
}

struct BanditConfig {
  int arms = 20;
  int horizon = 1000;
  int update_every = 20;
  double eta0 = 1.0;
  double beta = 0.8;  // temperature decay per update
  int runs = 400;
  uint64_t seed = 0;
  double alpha = 1.0;
};

namespace detail {

template <class Policy>
RegretRecord regret_runs(const BanditConfig& cfg, const BanditEnv* fixed_env, Policy&& act) {
  // act(rng, state, env, t) -> arm; shared harness for proximal and UCB players
  RegretRecord rec;
  rec.mean.assign(cfg.horizon, 0.0);
  rec.ci95.assign(cfg.horizon, 0.0);
  std::vector<double> m2(cfg.horizon, 0.0);
  for (int run = 0; run < cfg.runs; ++run) {
    std::mt19937_64 rng(run_seed(cfg.seed, run));
    BanditEnv env;
    if (fixed_env) {
      env = *fixed_env;
    } else {
      env.arm_means.resize(cfg.arms);
      env.reward_noise_std = 0.5;
      for (double& q : env.arm_means) q = normal01(rng);
    }
    double qmax = env.arm_means.empty() ? 0.0 : env.arm_means[0];
    for (double q : env.arm_means) qmax = std::max(qmax, q);
    BanditState state = BanditState::fresh(static_cast<int>(env.arm_means.size()), cfg.eta0);
    double cum = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
      const int a = act(rng, state, env, t);
      const double r = env.arm_means[a] + env.reward_noise_std * normal01(rng);
      state.pull_counts[a] += 1;
      state.value_estimates[a] += (r - state.value_estimates[a]) / state.pull_counts[a];
      state.timestep = t + 1;
      cum += qmax - env.arm_means[a];
      // Welford across runs
      const double delta = cum - rec.mean[t];
      rec.mean[t] += delta / (run + 1);
      m2[t] += delta * (cum - rec.mean[t]);
    }
  }
  if (cfg.runs > 1)
    for (int t = 0; t < cfg.horizon; ++t)
      rec.ci95[t] = 1.96 * std::sqrt(m2[t] / (cfg.runs - 1) / cfg.runs);
  return rec;
}

}  // namespace detail

inline RegretRecord run_bandit_experiment(const BanditConfig& cfg,
                                          const BanditEnv* fixed_env = nullptr) {
  if (cfg.update_every > 0 && cfg.horizon % cfg.update_every != 0)
    throw std::invalid_argument("run_bandit_experiment: horizon must be a multiple of "
                                "update_every");
  const GeneratorSpec spec = GeneratorSpec::make(cfg.alpha);
  return detail::regret_runs(cfg, fixed_env,
                             [&](std::mt19937_64& rng, BanditState& st, const BanditEnv&, int t) {
                               if (t > 0 && cfg.update_every > 0 && t % cfg.update_every == 0) {
                                 st.policy = bandit_policy_update(spec, st);
                                 st.eta *= cfg.beta;
                               }
                               return detail::sample_index(st.policy, rng);
                             });
}

// UCB1 with exploration constant c = reward noise std; one forced pull per arm.
inline RegretRecord ucb_baseline(const BanditEnv& env, int horizon, int runs, uint64_t seed) {
  BanditConfig cfg;
  cfg.arms = static_cast<int>(env.arm_means.size());
  cfg.horizon = horizon;
  cfg.runs = runs;
  cfg.seed = seed;
  return detail::regret_runs(cfg, &env,
                             [](std::mt19937_64&, BanditState& st, const BanditEnv& e, int t) {
                               const int arms = static_cast<int>(st.policy.size());
                               if (t < arms) return t;  // forced pulls
                               int best = 0;
                               double bestv = -std::numeric_limits<double>::infinity();
                               for (int a = 0; a < arms; ++a) {
                                 const double v =
                                     st.value_estimates[a] +
                                     e.reward_noise_std *
                                         std::sqrt(2.0 * std::log(static_cast<double>(t)) /
                                                   st.pull_counts[a]);
                                 if (v > bestv) {
                                   bestv = v;
                                   best = a;
                                 }
                               }
                               return best;
                             });
}

// UCB over per-run random arm draws, matching the proximal experiment's seeds.
inline RegretRecord ucb_random_envs(const BanditConfig& cfg) {
  return detail::regret_runs(cfg, nullptr,
                             [](std::mt19937_64&, BanditState& st, const BanditEnv& e, int t) {
                               const int arms = static_cast<int>(st.policy.size());
                               if (t < arms) return t;
                               int best = 0;
                               double bestv = -std::numeric_limits<double>::infinity();
                               for (int a = 0; a < arms; ++a) {
                                 const double v =
                                     st.value_estimates[a] +
                                     e.reward_noise_std *
                                         std::sqrt(2.0 * std::log(static_cast<double>(t)) /
                                                   st.pull_counts[a]);
                                 if (v > bestv) {
                                   bestv = v;
                                   best = a;
                                 }
                               }
                               return best;
                             });
}

}  // namespace epo
