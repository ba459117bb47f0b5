#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "epo/experiments.hpp"

using epo::ExperimentConfig;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config round trip") {
  ExperimentConfig c;
  c.kind = "bandit";
  c.env = "frozenlake";
  c.alphas = {-1.0, 0.5, 2.0};
  c.eta0 = 3.5;
  c.decay = 0.85;
  c.iters = 12;
  c.samples = 500;
  c.runs = 7;
  c.seed = 99;
  c.out = "/tmp/somewhere";
  c.arms = 15;
  c.horizon = 400;
  c.beta = 0.75;
  const ExperimentConfig d = epo::parse_config(epo::serialize_config(c));
  CHECK(d.kind == c.kind);
  CHECK(d.env == c.env);
  CHECK(d.alphas == c.alphas);
  CHECK(d.eta0 == c.eta0);
  CHECK(d.decay == c.decay);
  CHECK(d.iters == c.iters);
  CHECK(d.samples == c.samples);
  CHECK(d.runs == c.runs);
  CHECK(d.seed == c.seed);
  CHECK(d.out == c.out);
  CHECK(d.arms == c.arms);
  CHECK(d.horizon == c.horizon);
  CHECK(d.beta == c.beta);
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(epo::parse_config("nonsense line"), std::invalid_argument);
  CHECK_THROWS_AS(epo::parse_config("mystery_key=3"), std::invalid_argument);
  CHECK_THROWS_AS(epo::parse_alpha_list("1,x"), std::invalid_argument);
  CHECK_THROWS_AS(epo::parse_alpha_list(""), std::invalid_argument);
  CHECK(epo::parse_alpha_list("0.5, 2") == std::vector<double>{0.5, 2.0});
  // comments and blank lines are fine
  CHECK_NOTHROW(epo::parse_config("# comment\n\nenv=chain\n"));
}

TEST_CASE("zero iterations leave the curve empty") {
  ExperimentConfig cfg;
  cfg.kind = "mdp";
  cfg.env = "chain";
  cfg.alphas = {1.0};
  cfg.iters = 0;
  cfg.runs = 1;
  const auto curves = epo::run_policy_iteration(cfg);
  CHECK(curves.at(1.0).mean.empty());
}

TEST_CASE("policy iteration rejects unknown environments") {
  ExperimentConfig cfg;
  cfg.env = "mountaincar";
  CHECK_THROWS_AS(epo::run_policy_iteration(cfg), std::invalid_argument);
}

TEST_CASE("learning curves have one entry per iteration") {
  ExperimentConfig cfg;
  cfg.kind = "mdp";
  cfg.env = "chain";
  cfg.alphas = {1.0, 2.0};
  cfg.iters = 4;
  cfg.samples = 200;
  cfg.runs = 2;
  cfg.seed = 1;
  const auto curves = epo::run_policy_iteration(cfg);
  CHECK(curves.size() == 2);
  for (const auto& [alpha, curve] : curves) {
    CHECK(curve.mean.size() == 4);
    CHECK(curve.ci95.size() == 4);
    CHECK(curve.final_rewards.size() == 2);
  }
}

TEST_CASE("experiment outputs are bitwise reproducible") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "epo_repro_test";
  fs::remove_all(base);
  for (const char* sub : {"a", "b"}) {
    ExperimentConfig cfg;
    cfg.kind = "mdp";
    cfg.env = "chain";
    cfg.alphas = {0.5};
    cfg.iters = 3;
    cfg.samples = 200;
    cfg.runs = 2;
    cfg.seed = 7;
    cfg.out = (base / sub).string();
    epo::run_experiment(cfg);
  }
  CHECK(slurp(base / "a" / "mdp_chain_alpha_0.5.csv") ==
        slurp(base / "b" / "mdp_chain_alpha_0.5.csv"));
}

TEST_CASE("emitted files carry the declared headers") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "epo_header_test";
  fs::remove_all(base);

  ExperimentConfig mdp;
  mdp.kind = "mdp";
  mdp.env = "chain";
  mdp.alphas = {1.0};
  mdp.iters = 2;
  mdp.samples = 100;
  mdp.runs = 1;
  mdp.out = (base / "mdp").string();
  epo::run_experiment(mdp);
  CHECK(slurp(base / "mdp" / "mdp_chain_alpha_1.csv")
            .starts_with("iter,mean_reward,ci95,alpha,env,runs,seed\n"));

  ExperimentConfig ban;
  ban.kind = "bandit";
  ban.alphas = {2.0};
  ban.arms = 5;
  ban.horizon = 40;
  ban.update_every = 20;
  ban.runs = 3;
  ban.out = (base / "ban").string();
  epo::run_experiment(ban);
  const std::string csv = slurp(base / "ban" / "bandit_alpha_2.csv");
  CHECK(csv.starts_with("t,mean_regret,ci95,alpha,runs,seed\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);  // header plus horizon rows
  CHECK(fs::exists(base / "ban" / "bandit_ucb.csv"));
  CHECK(fs::exists(base / "ban" / "bandit_crosssection.csv"));

  ExperimentConfig demo;
  demo.kind = "demo";
  demo.alphas = {1.0};
  demo.out = (base / "demo").string();
  epo::run_experiment(demo);
  CHECK(slurp(base / "demo" / "demo.csv").starts_with("alpha,iteration,arm,probability\n"));
}

TEST_CASE("demo snapshots") {
  ExperimentConfig cfg;
  cfg.alphas = {1.0, 10.0};
  cfg.seed = 4;
  const auto snaps = epo::run_policy_demo(cfg);
  // iteration 0 is uniform
  REQUIRE(!snaps.empty());
  CHECK(snaps[0].iteration == 0);
  for (double p : snaps[0].policy) CHECK(p == doctest::Approx(0.1).epsilon(1e-12));
  // first update in the KL case is an exponential tilt of the same values
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> q(10);
  for (double& v : q) v = epo::detail::normal01(rng);
  double z = 0.0;
  for (double v : q) z += std::exp(v / 2.0) / 10.0;
  const auto& kl1 = snaps[1];
  CHECK(kl1.iteration == 1);
  for (int a = 0; a < 10; ++a)
    CHECK(kl1.policy[a] == doctest::Approx(std::exp(q[a] / 2.0) / 10.0 / z).epsilon(1e-8));
  // the steep member kills at least one arm immediately
  bool found = false;
  for (const auto& s : snaps)
    if (s.alpha == 10.0 && s.iteration == 1) {
      found = true;
      int zeros = 0;
      for (double p : s.policy) zeros += p == 0.0;
      CHECK(zeros >= 1);
    }
  CHECK(found);
}

#ifdef EPO_CLI_PATH
TEST_CASE("command line exit codes") {
  namespace fs = std::filesystem;
  const std::string bin = EPO_CLI_PATH;
  const fs::path out = fs::temp_directory_path() / "epo_cli_test";
  fs::remove_all(out);
  auto run = [&](const std::string& args) {
    const int rc = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  CHECK(run("mdp --env chain --alpha 1 --iters 2 --samples 100 --runs 1 --out " +
            (out / "ok").string()) == 0);
  CHECK(run("mdp --env nosuch --alpha 1 --out " + (out / "bad").string()) == 2);
  CHECK(run("--definitely-not-a-flag") == 2);
  CHECK(run("mdp --env chain --alpha 1 --bogus-flag 3") == 2);
}

TEST_CASE("command line flags override the config file") {
  namespace fs = std::filesystem;
  const fs::path out = fs::temp_directory_path() / "epo_cfg_test";
  fs::remove_all(out);
  fs::create_directories(out);
  const fs::path cfgfile = out / "run.cfg";
  std::ofstream(cfgfile) << "kind=mdp\nenv=chain\nalpha=1\niters=5\nsamples=100\nruns=1\nseed=2\n";
  const std::string bin = EPO_CLI_PATH;
  const std::string cmd = bin + " mdp --config " + cfgfile.string() + " --iters 2 --out " +
                          (out / "files").string() + " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const std::string csv = slurp(out / "files" / "mdp_chain_alpha_1.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header plus two iterations
}
#endif
