#pragma once
// Experiment orchestration: the policy-iteration loop on the tabular
// environments, bandit sweeps, demo snapshots, config parsing, CSV emission.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "epo/bandit.hpp"
#include "epo/divergence.hpp"
#include "epo/policy_update.hpp"
#include "epo/proximal_core.hpp"
#include "epo/tabular_mdp.hpp"

namespace epo {

struct ExperimentConfig {
  std::string kind = "mdp";  // bandit | mdp | demo
  std::string env = "chain";
  std::vector<double> alphas{1.0};
  double eta0 = 0.0;   // 0 = use the per-environment default
  double decay = 0.0;  // 0 = default
  int iters = -1;      // -1 = default
  int samples = -1;    // -1 = default
  int runs = 10;
  uint64_t seed = 0;
  std::string out = ".";
  // bandit settings
  int arms = 20;
  int horizon = 1000;
  int update_every = 20;
  double beta = 0.8;
  double bandit_eta0 = 1.0;
  // demo settings
  double demo_eta = 2.0;
  int demo_arms = 10;
};

struct LearningCurve {
  std::vector<double> mean;  // batch-average reward per iteration, over runs
  std::vector<double> ci95;
  std::vector<double> final_rewards;  // last-iteration batch reward per run
  std::vector<double> final_gains;    // exact gain of each run's final policy
};

namespace detail {

struct EnvDefaults {
  int iters;
  int samples;
  double eta0;
  double decay;
};

inline EnvDefaults env_defaults(const std::string& env) {
  if (env == "chain") return {30, 800, 15.0, 0.9};
  if (env == "cliffwalking") return {40, 1500, 50.0, 0.9};
  if (env == "frozenlake") return {50, 2000, 1.0, 0.8};
  throw std::invalid_argument("unknown environment: " + env);
}

inline TabularMDP build_env(const std::string& env) {
  if (env == "chain") return build_chain();
  if (env == "cliffwalking") return build_cliffwalking();
  if (env == "frozenlake") return build_frozenlake();
  throw std::invalid_argument("unknown environment: " + env);
}

// Per-(s,a) aggregation of a sampled batch into an empirical model: weights
// are visitation frequencies, rewards and next-state rows are cell averages.
// Taking the conjugate of the cell-averaged advantage (rather than of each
// single-sample advantage) stops f* convexity from penalizing transition
// noise as if it were a policy cost.
inline DualProblem empirical_model_problem(const TransitionBatch& batch, int n_states,
                                           int n_actions, std::vector<std::vector<int>>& counts) {
  const int N = static_cast<int>(batch.tuples.size());
  counts.assign(n_states, std::vector<int>(n_actions, 0));
  std::vector<std::vector<double>> rsum(n_states, std::vector<double>(n_actions, 0.0));
  std::vector<std::vector<std::map<int, int>>> nxt(n_states,
                                                   std::vector<std::map<int, int>>(n_actions));
  for (const Transition& t : batch.tuples) {
    counts[t.state][t.action] += 1;
    rsum[t.state][t.action] += t.reward;
    nxt[t.state][t.action][t.next_state] += 1;
  }
  DualProblem prob;
  prob.n_states = n_states;
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      const int c = counts[s][a];
      if (c == 0) continue;
      DualCell cell{s, a, static_cast<double>(c) / N, rsum[s][a] / c, {}};
      for (auto [t, k] : nxt[s][a]) cell.next.push_back({t, static_cast<double>(k) / c});
      prob.cells.push_back(std::move(cell));
    }
  return prob;
}

}  // namespace detail

// Algorithm: per iteration, sample a batch under the current policy, solve the
// dual on the batch's empirical model (value table warm-started across
// iterations), reweight the policy by the converged f*' factors, decay eta.
inline std::map<double, LearningCurve> run_policy_iteration(const ExperimentConfig& cfg) {
  const detail::EnvDefaults defs = detail::env_defaults(cfg.env);
  const int iters = cfg.iters >= 0 ? cfg.iters : defs.iters;
  const int samples = cfg.samples > 0 ? cfg.samples : defs.samples;
  const double eta0 = cfg.eta0 > 0.0 ? cfg.eta0 : defs.eta0;
  const double decay = cfg.decay > 0.0 ? cfg.decay : defs.decay;
  const TabularMDP mdp = detail::build_env(cfg.env);
  const TemperatureSchedule sched{eta0, decay};

  std::map<double, LearningCurve> curves;
  for (double alpha : cfg.alphas) {
    const GeneratorSpec spec = GeneratorSpec::make(alpha);
    LearningCurve curve;
    curve.mean.assign(iters, 0.0);
    curve.ci95.assign(iters, 0.0);
    std::vector<double> m2(iters, 0.0);
    for (int run = 0; run < cfg.runs; ++run) {
      // common random numbers: per-run seeds do not depend on alpha
      const uint64_t rs = detail::run_seed(cfg.seed, run);
      TabularPolicy pi = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
      std::vector<double> V(mdp.n_states, 0.0);
      double final_reward = 0.0;
      for (int it = 0; it < iters; ++it) {
        double eta = sched.at(it);
        const uint64_t bseed = rs ^ (0xd1342543de82ef95ULL * static_cast<uint64_t>(it + 1));
        const TransitionBatch batch = sample_batch(mdp, pi, samples, bseed);
        double rbar = 0.0;
        for (const Transition& t : batch.tuples) rbar += t.reward;
        rbar /= samples;

        std::vector<std::vector<int>> counts;
        DualProblem prob;
        DualSolution sol;
        try {
          prob = detail::empirical_model_problem(batch, mdp.n_states, mdp.n_actions, counts);
          // temperature floor: once eta decays below a small fraction of the
          // advantage spread, the proximal step would chase estimation noise
          // in rarely visited cells; clamp the solve there
          double amin = detail::kInf, amax = -detail::kInf;
          for (size_t i = 0; i < prob.cells.size(); ++i) {
            const double a = prob.advantage(i, V);
            amin = std::min(amin, a);
            amax = std::max(amax, a);
          }
          eta = std::max(eta, 0.02 * (amax - amin));
          detail::SolveOptions opt{1e-9, 300, false};
          sol = detail::minimize_bc(spec, prob, eta, V, opt);
        } catch (const std::exception& e) {
          throw std::runtime_error("policy iteration failed at iteration " + std::to_string(it) +
                                   ": " + e.what());
        }
        V = sol.value_table;

        // ratio update pi <- pi * w on visited cells, neutral elsewhere
        std::vector<std::vector<double>> w(mdp.n_states,
                                           std::vector<double>(mdp.n_actions, 1.0));
        for (size_t i = 0; i < prob.cells.size(); ++i) {
          const DualCell& c = prob.cells[i];
          const double y = (prob.advantage(i, V) - sol.baseline_lambda + sol.kappa[i]) / eta;
          w[c.state][c.action] = f_star_prime(spec, y);
        }
        for (int s = 0; s < mdp.n_states; ++s) {
          bool visited = false;
          for (int aa = 0; aa < mdp.n_actions; ++aa) visited |= counts[s][aa] > 0;
          if (!visited) continue;
          double tot = 0.0;
          std::vector<double> row(mdp.n_actions);
          for (int aa = 0; aa < mdp.n_actions; ++aa) {
            row[aa] = pi.probs[s][aa] * w[s][aa];
            tot += row[aa];
          }
          if (!(tot > 0.0) || !std::isfinite(tot)) continue;
          for (int aa = 0; aa < mdp.n_actions; ++aa) pi.probs[s][aa] = row[aa] / tot;
        }

        const double delta = rbar - curve.mean[it];
        curve.mean[it] += delta / (run + 1);
        m2[it] += delta * (rbar - curve.mean[it]);
        final_reward = rbar;
      }
      curve.final_rewards.push_back(final_reward);
      if (iters > 0) {
        const FiniteDistribution rho = stationary_distribution(mdp, pi);
        double gain = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
          for (int aa = 0; aa < mdp.n_actions; ++aa)
            gain += rho.weights[static_cast<size_t>(s) * mdp.n_actions + aa] *
                    mdp.reward[s][aa];
        curve.final_gains.push_back(gain);
      }
    }
    if (cfg.runs > 1)
      for (int it = 0; it < iters; ++it)
        curve.ci95[it] = 1.96 * std::sqrt(m2[it] / (cfg.runs - 1) / cfg.runs);
    curves[alpha] = std::move(curve);
  }
  return curves;
}

struct BanditSuiteResult {
  std::vector<std::pair<double, RegretRecord>> per_alpha;
  RegretRecord ucb;
};

inline BanditSuiteResult run_bandit_suite(const ExperimentConfig& cfg) {
  if (cfg.alphas.empty()) throw std::invalid_argument("run_bandit_suite: empty alpha list");
  BanditConfig bc;
  bc.arms = cfg.arms;
  bc.horizon = cfg.horizon;
  bc.update_every = cfg.update_every;
  bc.eta0 = cfg.bandit_eta0;
  bc.beta = cfg.beta;
  bc.runs = cfg.runs;
  bc.seed = cfg.seed;
  BanditSuiteResult res;
  for (double alpha : cfg.alphas) {
    bc.alpha = alpha;
    res.per_alpha.push_back({alpha, run_bandit_experiment(bc)});
  }
  res.ucb = ucb_random_envs(bc);
  return res;
}

struct PolicySnapshot {
  double alpha;
  int iteration;
  std::vector<double> policy;
};

// Policy-improvement snapshots on a fixed 10-arm instance with known values:
// iterations 0..4 and a later one, per alpha.
inline std::vector<PolicySnapshot> run_policy_demo(const ExperimentConfig& cfg,
                                                   int late_iteration = 20) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> q(cfg.demo_arms);
  for (double& v : q) v = detail::normal01(rng);
  std::vector<PolicySnapshot> out;
  for (double alpha : cfg.alphas) {
    const GeneratorSpec spec = GeneratorSpec::make(alpha);
    BanditState st = BanditState::fresh(cfg.demo_arms, cfg.demo_eta);
    st.value_estimates = q;
    out.push_back({alpha, 0, st.policy});
    for (int it = 1; it <= late_iteration; ++it) {
      st.policy = bandit_policy_update(spec, st);
      if (it <= 4 || it == late_iteration) out.push_back({alpha, it, st.policy});
    }
  }
  return out;
}

// --- configuration and CSV emission ---------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string num_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "kind=" << c.kind << "\nenv=" << c.env << "\nalpha=";
  for (size_t i = 0; i < c.alphas.size(); ++i)
    os << (i ? "," : "") << detail::num_short(c.alphas[i]);
  os << "\neta0=" << detail::num(c.eta0) << "\ndecay=" << detail::num(c.decay)
     << "\niters=" << c.iters << "\nsamples=" << c.samples << "\nruns=" << c.runs
     << "\nseed=" << c.seed << "\nout=" << c.out << "\narms=" << c.arms
     << "\nhorizon=" << c.horizon << "\nupdate_every=" << c.update_every
     << "\nbeta=" << detail::num(c.beta) << "\nbandit_eta0=" << detail::num(c.bandit_eta0)
     << "\ndemo_eta=" << detail::num(c.demo_eta) << "\ndemo_arms=" << c.demo_arms << "\n";
  return os.str();
}

inline std::vector<double> parse_alpha_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    size_t pos = 0;
    const double a = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("bad alpha value: " + tok);
    out.push_back(a);
  }
  if (out.empty()) throw std::invalid_argument("empty alpha list");
  return out;
}

inline void apply_config_line(ExperimentConfig& c, const std::string& key,
                              const std::string& val) {
  if (key == "kind") c.kind = val;
  else if (key == "env") c.env = val;
  else if (key == "alpha") c.alphas = parse_alpha_list(val);
  else if (key == "eta0") c.eta0 = std::stod(val);
  else if (key == "decay") c.decay = std::stod(val);
  else if (key == "iters") c.iters = std::stoi(val);
  else if (key == "samples") c.samples = std::stoi(val);
  else if (key == "runs") c.runs = std::stoi(val);
  else if (key == "seed") c.seed = std::stoull(val);
  else if (key == "out") c.out = val;
  else if (key == "arms") c.arms = std::stoi(val);
  else if (key == "horizon") c.horizon = std::stoi(val);
  else if (key == "update_every") c.update_every = std::stoi(val);
  else if (key == "beta") c.beta = std::stod(val);
  else if (key == "bandit_eta0") c.bandit_eta0 = std::stod(val);
  else if (key == "demo_eta") c.demo_eta = std::stod(val);
  else if (key == "demo_arms") c.demo_arms = std::stoi(val);
  else throw std::invalid_argument("unknown config key: " + key);
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    apply_config_line(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  f << content;
}

}  // namespace detail

inline void write_regret_csv(const std::string& path, const RegretRecord& rec,
                             const std::string& alpha_label, int runs, uint64_t seed) {
  std::ostringstream os;
  os << "t,mean_regret,ci95,alpha,runs,seed\n";
  for (size_t t = 0; t < rec.mean.size(); ++t)
    os << (t + 1) << ',' << detail::num(rec.mean[t]) << ',' << detail::num(rec.ci95[t]) << ','
       << alpha_label << ',' << runs << ',' << seed << '\n';
  detail::write_file(path, os.str());
}

inline void write_mdp_csv(const std::string& path, const LearningCurve& curve, double alpha,
                          const std::string& env, int runs, uint64_t seed) {
  std::ostringstream os;
  os << "iter,mean_reward,ci95,alpha,env,runs,seed\n";
  for (size_t it = 0; it < curve.mean.size(); ++it)
    os << (it + 1) << ',' << detail::num(curve.mean[it]) << ',' << detail::num(curve.ci95[it])
       << ',' << detail::num_short(alpha) << ',' << env << ',' << runs << ',' << seed << '\n';
  detail::write_file(path, os.str());
}

inline void write_demo_csv(const std::string& path, const std::vector<PolicySnapshot>& snaps) {
  std::ostringstream os;
  os << "alpha,iteration,arm,probability\n";
  for (const PolicySnapshot& s : snaps)
    for (size_t a = 0; a < s.policy.size(); ++a)
      os << detail::num_short(s.alpha) << ',' << s.iteration << ',' << a << ','
         << detail::num(s.policy[a]) << '\n';
  detail::write_file(path, os.str());
}

// Regret-vs-alpha cross-section at the given timesteps, same schema as the
// per-alpha files.
inline void write_crosssection_csv(const std::string& path, const BanditSuiteResult& res,
                                   const std::vector<int>& checkpoints, int runs, uint64_t seed) {
  std::ostringstream os;
  os << "t,mean_regret,ci95,alpha,runs,seed\n";
  for (int cp : checkpoints)
    for (const auto& [alpha, rec] : res.per_alpha) {
      if (cp < 1 || cp > static_cast<int>(rec.mean.size())) continue;
      os << cp << ',' << detail::num(rec.mean[cp - 1]) << ',' << detail::num(rec.ci95[cp - 1])
         << ',' << detail::num_short(alpha) << ',' << runs << ',' << seed << '\n';
    }
  detail::write_file(path, os.str());
}

// Runs the configured experiment and writes its CSV outputs under cfg.out.
inline void run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out);
  const auto outpath = [&](const std::string& name) { return (fs::path(cfg.out) / name).string(); };
  if (cfg.kind == "bandit") {
    const BanditSuiteResult res = run_bandit_suite(cfg);
    for (const auto& [alpha, rec] : res.per_alpha)
      write_regret_csv(outpath("bandit_alpha_" + detail::num_short(alpha) + ".csv"), rec,
                       detail::num_short(alpha), cfg.runs, cfg.seed);
    write_regret_csv(outpath("bandit_ucb.csv"), res.ucb, "ucb", cfg.runs, cfg.seed);
    write_crosssection_csv(outpath("bandit_crosssection.csv"), res,
                           {cfg.horizon / 5, cfg.horizon}, cfg.runs, cfg.seed);
  } else if (cfg.kind == "mdp") {
    const auto curves = run_policy_iteration(cfg);
    for (const auto& [alpha, curve] : curves)
      write_mdp_csv(outpath("mdp_" + cfg.env + "_alpha_" + detail::num_short(alpha) + ".csv"),
                    curve, alpha, cfg.env, cfg.runs, cfg.seed);
  } else if (cfg.kind == "demo") {
    write_demo_csv(outpath("demo.csv"), run_policy_demo(cfg));
  } else {
    throw std::invalid_argument("unknown experiment kind: " + cfg.kind);
  }
}

}  // namespace epo
