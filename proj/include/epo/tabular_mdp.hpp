#pragma once
// Ergodic tabular MDPs: the three benchmark environments, trajectory sampling,
// stationary distributions, and a relative-value-iteration gain oracle.

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "epo/divergence.hpp"

namespace epo {

struct TabularPolicy {
  std::vector<std::vector<double>> probs;  // probs[s][a]

  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy p;
    p.probs.assign(n_states, std::vector<double>(n_actions, 1.0 / n_actions));
    return p;
  }
};

struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<std::vector<std::vector<double>>> transition;  // P[s][a][s']
  std::vector<std::vector<double>> reward;                   // R[s][a]
  std::vector<double> restart_distribution;                  // over states

  void check_stochastic() const {
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (double p : transition[s][a]) sum += p;
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::logic_error("row (" + std::to_string(s) + "," + std::to_string(a) +
                                 ") sums to " + std::to_string(sum));
      }
  }

  std::string dump() const {
    std::ostringstream os;
    os.precision(17);
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) {
        for (int t = 0; t < n_states; ++t) os << transition[s][a][t] << ' ';
        os << reward[s][a] << '\n';
      }
    return os.str();
  }
};

namespace detail {

inline TabularMDP blank_mdp(int S, int A, int start) {
  TabularMDP m;
  m.n_states = S;
  m.n_actions = A;
  m.transition.assign(S, std::vector<std::vector<double>>(A, std::vector<double>(S, 0.0)));
  m.reward.assign(S, std::vector<double>(A, 0.0));
  m.restart_distribution.assign(S, 0.0);
  m.restart_distribution[start] = 1.0;
  return m;
}

}  // namespace detail

// N-Chain: FORWARD (0) advances toward the large self-loop reward at the end,
// BACK (1) returns to state 0 for the small reward; the executed action flips
// with probability 1 - success.
inline TabularMDP build_chain(int n_states = 8, double success = 0.9, double small = 2.0,
                              double large = 10.0) {
  if (!(success > 0.0 && success <= 1.0)) throw std::invalid_argument("build_chain: success");
  TabularMDP m = detail::blank_mdp(n_states, 2, 0);
  const int last = n_states - 1;
  for (int s = 0; s < n_states; ++s) {
    // executed FORWARD: advance (self-loop at the end pays `large`); executed BACK: restart
    const int fwd_next = std::min(s + 1, last);
    const double fwd_r = (s == last) ? large : 0.0;
    for (int a = 0; a < 2; ++a) {
      const double p_fwd = (a == 0) ? success : 1.0 - success;
      m.transition[s][a][fwd_next] += p_fwd;
      m.transition[s][a][0] += 1.0 - p_fwd;
      m.reward[s][a] = p_fwd * fwd_r + (1.0 - p_fwd) * small;
    }
  }
  return m;
}

// 4x12 CliffWalking. Deterministic moves, step reward -1; stepping into a cliff
// cell pays `fall`, reaching the goal pays `goal`; both teleport to the start
// so the chain stays irreducible.
inline TabularMDP build_cliffwalking(double fall = -10.0, double goal = 100.0) {
  const int rows = 4, cols = 12, S = rows * cols, start = (rows - 1) * cols;
  const int goal_cell = rows * cols - 1;
  TabularMDP m = detail::blank_mdp(S, 4, start);
  auto is_cliff = [&](int cell) {
    return cell > start && cell < goal_cell;  // bottom row between start and goal
  };
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};  // up, down, left, right
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < 4; ++a) {
      const int r = std::clamp(s / cols + dr[a], 0, rows - 1);
      const int c = std::clamp(s % cols + dc[a], 0, cols - 1);
      const int t = r * cols + c;
      if (is_cliff(t)) {
        m.transition[s][a][start] = 1.0;
        m.reward[s][a] = fall;
      } else if (t == goal_cell) {
        m.transition[s][a][start] = 1.0;
        m.reward[s][a] = goal;
      } else {
        m.transition[s][a][t] = 1.0;
        m.reward[s][a] = -1.0;
      }
    }
  return m;
}

// Standard 4x4 FrozenLake map; intended move with probability `success`, each
// perpendicular direction with (1-success)/2. Holes and the goal teleport to
// the start (goal reward 1).
inline TabularMDP build_frozenlake(double success = 0.8) {
  if (!(success > 0.0 && success <= 1.0)) throw std::invalid_argument("build_frozenlake: success");
  static const char* map = "SFFF"
                           "FHFH"
                           "FFFH"
                           "HFFG";
  const int n = 4, S = 16, start = 0;
  TabularMDP m = detail::blank_mdp(S, 4, start);
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  auto move = [&](int s, int a) {
    const int r = std::clamp(s / n + dr[a], 0, n - 1);
    const int c = std::clamp(s % n + dc[a], 0, n - 1);
    return r * n + c;
  };
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < 4; ++a) {
      const int perp[2] = {a < 2 ? 2 : 0, a < 2 ? 3 : 1};
      const int outs[3] = {move(s, a), move(s, perp[0]), move(s, perp[1])};
      const double ps[3] = {success, (1.0 - success) / 2.0, (1.0 - success) / 2.0};
      for (int k = 0; k < 3; ++k) {
        const char cell = map[outs[k]];
        if (cell == 'G') {
          m.transition[s][a][start] += ps[k];
          m.reward[s][a] += ps[k] * 1.0;
        } else if (cell == 'H') {
          m.transition[s][a][start] += ps[k];
        } else {
          m.transition[s][a][outs[k]] += ps[k];
        }
      }
    }
  return m;
}

struct Transition {
  int state;
  int action;
  double reward;
  int next_state;
};

struct TransitionBatch {
  std::vector<Transition> tuples;
  std::string behavior_policy_id;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  double u = uniform01(rng), acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// States reachable from the restart distribution under strictly positive rows
// of `policy`; throws if the reachable class is not strongly connected.
inline std::vector<int> reachable_class(const TabularMDP& mdp, const TabularPolicy& policy) {
  const int S = mdp.n_states;
  std::vector<char> seen(S, 0);
  std::vector<int> stack;
  for (int s = 0; s < S; ++s)
    if (mdp.restart_distribution[s] > 0.0 && !seen[s]) {
      seen[s] = 1;
      stack.push_back(s);
    }
  std::vector<int> order;
  while (!stack.empty()) {
    int s = stack.back();
    stack.pop_back();
    order.push_back(s);
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (policy.probs[s][a] <= 0.0) continue;
      for (int t = 0; t < S; ++t)
        if (mdp.transition[s][a][t] > 0.0 && !seen[t]) {
          seen[t] = 1;
          stack.push_back(t);
        }
    }
  }
  // every reachable state must reach every other (check return to the first root)
  const int root = order.front();
  std::vector<char> back(S, 0);
  back[root] = 1;
  std::vector<int> bstack{root};
  while (!bstack.empty()) {  // reverse reachability to root
    int t = bstack.back();
    bstack.pop_back();
    for (int s : order) {
      if (back[s]) continue;
      for (int a = 0; a < mdp.n_actions; ++a)
        if (policy.probs[s][a] > 0.0 && mdp.transition[s][a][t] > 0.0) {
          back[s] = 1;
          bstack.push_back(s);
          break;
        }
    }
  }
  for (int s : order)
    if (!back[s])
      throw std::runtime_error("induced chain reducible: state " + std::to_string(s) +
                               " cannot return to the restart class");
  std::sort(order.begin(), order.end());
  return order;
}

// Gaussian elimination with partial pivoting; solves A x = b in place.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    if (std::abs(A[k][k]) < 1e-14) throw std::runtime_error("singular linear system");
    for (int i = k + 1; i < n; ++i) {
      const double m = A[i][k] / A[k][k];
      if (m == 0.0) continue;
      for (int j = k; j < n; ++j) A[i][j] -= m * A[k][j];
      b[i] -= m * b[k];
    }
  }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double acc = b[i];
    for (int j = i + 1; j < n; ++j) acc -= A[i][j] * x[j];
    x[i] = acc / A[i][i];
  }
  return x;
}

}  // namespace detail

// Single trajectory of length n starting from the restart distribution.
inline TransitionBatch sample_batch(const TabularMDP& mdp, const TabularPolicy& policy, int n,
                                    uint64_t rng_seed) {
  TransitionBatch batch;
  batch.tuples.reserve(n);
  std::mt19937_64 rng(rng_seed);
  int s = detail::sample_index(mdp.restart_distribution, rng);
  for (int t = 0; t < n; ++t) {
    const int a = detail::sample_index(policy.probs[s], rng);
    const int nxt = detail::sample_index(mdp.transition[s][a], rng);
    batch.tuples.push_back({s, a, mdp.reward[s][a], nxt});
    s = nxt;
  }
  return batch;
}

// rho_pi(s,a) = mu_pi(s) pi(a|s) with mu_pi the stationary distribution of the
// induced chain, found by a direct linear solve on the reachable class.
inline FiniteDistribution stationary_distribution(const TabularMDP& mdp,
                                                  const TabularPolicy& policy) {
  const std::vector<int> cls = detail::reachable_class(mdp, policy);
  const int m = static_cast<int>(cls.size());
  std::vector<int> pos(mdp.n_states, -1);
  for (int i = 0; i < m; ++i) pos[cls[i]] = i;
  // (P_pi^T - I) mu = 0 with the last equation replaced by sum(mu) = 1
  std::vector<std::vector<double>> A(m, std::vector<double>(m, 0.0));
  std::vector<double> b(m, 0.0);
  for (int j = 0; j < m; ++j) {
    const int s = cls[j];
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy.probs[s][a];
      if (pa <= 0.0) continue;
      for (int t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.transition[s][a][t];
        if (p > 0.0) A[pos[t]][j] += pa * p;
      }
    }
  }
  for (int i = 0; i < m; ++i) A[i][i] -= 1.0;
  for (int j = 0; j < m; ++j) A[m - 1][j] = 1.0;
  b[m - 1] = 1.0;
  const std::vector<double> mu = detail::solve_linear(A, b);

  FiniteDistribution rho;
  rho.weights.assign(static_cast<size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  for (int i = 0; i < m; ++i)
    for (int a = 0; a < mdp.n_actions; ++a)
      rho.weights[static_cast<size_t>(cls[i]) * mdp.n_actions + a] = mu[i] * policy.probs[cls[i]][a];

  // residual check ||mu P - mu||_inf
  std::vector<double> muP(mdp.n_states, 0.0);
  for (int i = 0; i < m; ++i) {
    const int s = cls[i];
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = mu[i] * policy.probs[s][a];
      if (w == 0.0) continue;
      for (int t = 0; t < mdp.n_states; ++t) muP[t] += w * mdp.transition[s][a][t];
    }
  }
  for (int i = 0; i < m; ++i)
    if (std::abs(muP[cls[i]] - mu[i]) > 1e-10)
      throw std::runtime_error("stationary_distribution: residual above 1e-10");
  return rho;
}

// Optimal average reward by relative value iteration.
inline double optimal_gain(const TabularMDP& mdp, double tolerance = 1e-10,
                           int max_iters = 1000000, std::vector<double> init = {}) {
  const int S = mdp.n_states, A = mdp.n_actions;
  std::vector<double> h = init.empty() ? std::vector<double>(S, 0.0) : std::move(init);
  std::vector<double> Th(S);
  // damped Bellman operator (transition blended with identity): preserves the
  // optimal gain while making periodic chains aperiodic
  const double tau = 0.5;
  for (int it = 0; it < max_iters; ++it) {
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward[s][a] + (1.0 - tau) * h[s];
        for (int t = 0; t < S; ++t) q += tau * mdp.transition[s][a][t] * h[t];
        best = std::max(best, q);
      }
      Th[s] = best;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int s = 0; s < S; ++s) {
      lo = std::min(lo, Th[s] - h[s]);
      hi = std::max(hi, Th[s] - h[s]);
    }
    if (hi - lo < tolerance) return 0.5 * (hi + lo);
    const double ref = Th[0];
    for (int s = 0; s < S; ++s) h[s] = Th[s] - ref;
  }
  throw std::runtime_error("optimal_gain: no convergence in " + std::to_string(max_iters) +
                           " iterations");
}

}  // namespace epo
