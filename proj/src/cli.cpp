#include "omiga/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "omiga/dataset.hpp"
#include "omiga/env.hpp"
#include "omiga/errors.hpp"
#include "omiga/oracle.hpp"
#include "omiga/trainer.hpp"

namespace omiga::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

// Flags shared by train / bc-train / verify.
struct TrainOpts {
  std::string dataset;
  std::string env_path;
  double alpha = 10.0;
  double gamma = 0.99;
  double tau = 0.005;
  long steps = -1;  // -1: per-command default
  int batch = 128;
  uint64_t seed = 0;
  std::string out;
  std::string variant = "full";
  std::string mode = "stochastic";
  std::string hidden = "256,256";
  std::string mixer_hidden = "64";
  double lr = 5e-4;
  int eval_interval = 500;
  int eval_episodes = 32;

  TrainConfig to_config(long default_steps) const {
    TrainConfig cfg;
    cfg.alpha = alpha;
    cfg.gamma = gamma;
    cfg.tau = tau;
    cfg.steps = steps >= 0 ? steps : default_steps;
    cfg.batch_size = batch;
    cfg.seed = seed;
    cfg.hidden = parse_int_list(hidden);
    cfg.mixer_hidden = parse_int_list(mixer_hidden);
    cfg.lr_q = cfg.lr_v = cfg.lr_pi = lr;
    cfg.eval_interval = eval_interval;
    cfg.eval_episodes = eval_episodes;
    cfg.eval_mode = eval_mode_from_string(mode);
    cfg.variant = variant_from_string(variant);
    cfg.validate();
    return cfg;
  }
};

void add_train_flags(CLI::App* cmd, TrainOpts& o, bool need_dataset) {
  if (need_dataset) cmd->add_option("--dataset", o.dataset, "dataset directory")->required();
  cmd->add_option("--env", o.env_path, "environment config JSON")->required();
  cmd->add_option("--alpha", o.alpha, "regularization strength");
  cmd->add_option("--gamma", o.gamma, "discount factor");
  cmd->add_option("--tau", o.tau, "target soft-update rate");
  cmd->add_option("--steps", o.steps, "gradient steps");
  cmd->add_option("--batch", o.batch, "batch size");
  cmd->add_option("--seed", o.seed, "master seed")->required();
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--variant", o.variant, "full|no_w|local_w");
  cmd->add_option("--mode", o.mode, "evaluation mode: stochastic|greedy");
  cmd->add_option("--hidden", o.hidden, "agent net hidden sizes, comma list");
  cmd->add_option("--mixer-hidden", o.mixer_hidden, "mixer hidden sizes, comma list");
  cmd->add_option("--lr", o.lr, "learning rate for all networks");
  cmd->add_option("--eval-interval", o.eval_interval, "steps between metric rows");
  cmd->add_option("--eval-episodes", o.eval_episodes, "episodes per evaluation");
}

void write_run_dir(const std::string& out, const std::string& algo, const TrainOpts& o,
                   const TrainConfig& cfg, const Env& env, const TrainResult& res) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out + "': " + ec.message());
  write_text(fs::path(out) / "metrics.csv", metrics_to_csv(res.metrics));
  save_checkpoint(res.checkpoint, (fs::path(out) / "checkpoint.json").string());
  const double final_return = res.metrics.empty() ? 0.0 : res.metrics.back().eval_return;
  json run{{"algo", algo},
           {"variant", variant_to_string(cfg.variant)},
           {"env_name", env.name()},
           {"env_config", o.env_path},
           {"dataset", o.dataset},
           {"alpha", cfg.alpha},
           {"gamma", cfg.gamma},
           {"steps", cfg.steps},
           {"seed", cfg.seed},
           {"eval_mode", eval_mode_to_string(cfg.eval_mode)},
           {"final_eval_return", final_return}};
  write_text(fs::path(out) / "run.json", run.dump(2) + "\n");
}

int cmd_gen_data(const std::string& env_path, const std::string& quality, long episodes,
                 uint64_t seed, const std::string& out) {
  const Env env = Env::from_config_file(env_path);
  const BehaviorPolicy pol = make_behavior_policy(env, quality_from_string(quality), seed);
  const Dataset ds = generate(env, pol, episodes, seed);
  save(ds, out);
  std::cout << "wrote " << ds.manifest.n_episodes << " episodes (" << ds.manifest.n_transitions
            << " transitions, avg return " << ds.manifest.avg_return << ") to " << out << "\n";
  return 0;
}

int cmd_mix_data(const std::vector<std::string>& dirs, const std::string& proportions,
                 uint64_t seed, const std::string& out) {
  if (dirs.empty()) throw ParamError("mix-data: need at least one --dataset");
  std::vector<Dataset> parts;
  for (const auto& d : dirs) parts.push_back(load(d));
  std::vector<double> props;
  if (proportions.empty())
    props.assign(parts.size(), 1.0 / static_cast<double>(parts.size()));
  else
    props = parse_double_list(proportions);
  const Dataset mixed = mix(parts, props, seed);
  save(mixed, out);
  std::cout << "mixed " << mixed.manifest.n_episodes << " episodes ("
            << mixed.manifest.n_transitions << " transitions) to " << out << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o, bool bc) {
  const Env env = Env::from_config_file(o.env_path);
  const Dataset ds = load(o.dataset);
  const TrainConfig cfg = o.to_config(20000);
  const TrainResult res = bc ? bc_train(ds, env, cfg) : train(ds, env, cfg);
  write_run_dir(o.out, bc ? "bc" : "omiga", o, cfg, env, res);
  const double final_return = res.metrics.empty() ? 0.0 : res.metrics.back().eval_return;
  std::cout << (bc ? "bc-train" : "train") << " finished: steps=" << cfg.steps
            << " final_eval_return=" << final_return << " out=" << o.out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& env_path, int episodes,
             uint64_t seed, const std::string& mode, const std::string& out) {
  const Env env = Env::from_config_file(env_path);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const EvalResult r = evaluate(ckpt, env, episodes, seed, eval_mode_from_string(mode));
  std::cout << "eval_return " << r.mean << " +- " << r.stddev << " over " << r.episodes
            << " episodes (" << mode << ")\n";
  if (!out.empty()) {
    json j{{"mean", r.mean}, {"std", r.stddev}, {"episodes", r.episodes}, {"mode", mode}};
    write_text(out, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_oracle_solve(const std::string& env_path, double alpha, double gamma,
                     const std::string& quality, uint64_t seed, double tol,
                     const std::string& out) {
  const Env env = Env::from_config_file(env_path);
  const TabularMDP mdp = env.tabular_export(gamma);
  const BehaviorPolicy pol = make_behavior_policy(env, quality_from_string(quality), seed);
  const JointPolicy mu = behavior_joint(mdp, pol);
  const OracleSolution sol = solve(mdp, mu, alpha, tol);
  json j{{"V_star", sol.v_star},   {"u_star", sol.u_star}, {"pi_star", sol.pi_star},
         {"alpha", sol.alpha},     {"gamma", sol.gamma},   {"iterations", sol.iterations},
         {"residual", sol.residual}};
  const std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
  return 0;
}

// ---------------------------------------------------------------------------
// verify: oracle property checks plus a trained-vs-oracle comparison
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

TabularMDP random_instance(Rng& rng, int max_states, int n_agents, int max_actions,
                           double gamma) {
  TabularMDP m;
  m.n_agents = n_agents;
  m.n_states = 2 + rng.uniform_int(max_states - 1);
  m.n_actions = 2 + rng.uniform_int(max_actions - 1);
  m.obs_dim = 1;
  m.gamma = gamma;
  const int J = m.joint_action_count();
  m.joint_count_ = J;
  m.terminal.assign(m.n_states, 0);
  m.transition.assign(static_cast<size_t>(m.n_states) * J * m.n_states, 0.0);
  m.reward.assign(static_cast<size_t>(m.n_states) * J, 0.0);
  m.initial.assign(m.n_states, 0.0);
  m.initial[0] = 1.0;
  m.observations.assign(m.n_states, JointObs(n_agents, Obs{0.0}));
  for (int s = 0; s < m.n_states; ++s) {
    const bool term = s > 0 && rng.uniform() < 0.2;
    m.terminal[s] = term ? 1 : 0;
    for (int a = 0; a < J; ++a) {
      double* row = &m.transition[(static_cast<size_t>(s) * J + a) * m.n_states];
      if (term) {
        row[s] = 1.0;
        continue;
      }
      double sum = 0.0;
      for (int sp = 0; sp < m.n_states; ++sp) {
        const double u = rng.uniform();
        row[sp] = u * u;
        sum += row[sp];
      }
      for (int sp = 0; sp < m.n_states; ++sp) row[sp] /= sum;
      m.reward[static_cast<size_t>(s) * J + a] = rng.uniform(-1.0, 1.0);
    }
  }
  return m;
}

JointPolicy random_policy_rows(Rng& rng, const TabularMDP& m, double floor = 0.05) {
  const int J = m.joint_action_count();
  JointPolicy mu(m.n_states, std::vector<double>(J, 0.0));
  for (int s = 0; s < m.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < J; ++a) {
      mu[s][a] = floor + rng.uniform();
      sum += mu[s][a];
    }
    for (int a = 0; a < J; ++a) mu[s][a] /= sum;
  }
  return mu;
}

int cmd_verify(TrainOpts o, long episodes, std::string quality) {
  const Env env = Env::from_config_file(o.env_path);
  const bool matrix = env.name() == "matrix_game";
  // env-dependent defaults: the matrix game is compared against the oracle at
  // alpha 1 on uniform data; the grid uses the directional protocol (medium
  // data, aggressive regularization)
  if (o.alpha <= 0.0) o.alpha = matrix ? 1.0 : 0.1;
  if (quality.empty()) quality = matrix ? "uniform" : "medium";
  const std::string out = o.out.empty() ? "verify_out" : o.out;
  std::vector<Check> checks;

  // 1. exported dynamics agree with step() on every (s, a)
  {
    const TabularMDP mdp = env.tabular_export(o.gamma);
    double dev = 0.0;
    Rng rng(0);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (int j = 0; j < mdp.joint_action_count(); ++j) {
        EpisodeState ep;
        ep.state = s;
        const StepResult res = env.step(ep, mdp.decode_joint(j), rng);
        dev = std::max(dev, std::abs(res.reward - mdp.r(s, j)));
        dev = std::max(dev, std::abs(1.0 - mdp.p(s, j, res.next.state)));
      }
    }
    checks.push_back({"export_matches_step", dev == 0.0, dev, 0.0});
  }

  const TabularMDP mdp = env.tabular_export(o.gamma);
  const BehaviorPolicy pol = make_behavior_policy(env, quality_from_string(quality), o.seed);
  const JointPolicy mu = behavior_joint(mdp, pol);

  // 2. contraction spot check on random instances
  {
    Rng rng(derive_seed(o.seed, "verify_contraction"));
    double worst = -1.0;
    for (int trial = 0; trial < 50; ++trial) {
      const double gamma = std::vector<double>{0.5, 0.9, 0.99}[trial % 3];
      const TabularMDP m = random_instance(rng, 8, 2, 3, gamma);
      const JointPolicy rmu = random_policy_rows(rng, m);
      std::vector<double> v1(m.n_states), v2(m.n_states);
      for (int s = 0; s < m.n_states; ++s) {
        v1[s] = rng.uniform(-5.0, 5.0);
        v2[s] = rng.uniform(-5.0, 5.0);
      }
      const double alpha = std::vector<double>{0.1, 1.0, 10.0}[trial % 3];
      const auto t1 = apply_optimal_operator(v1, m, rmu, alpha);
      const auto t2 = apply_optimal_operator(v2, m, rmu, alpha);
      double lhs = 0.0, rhs = 0.0;
      for (int s = 0; s < m.n_states; ++s) {
        lhs = std::max(lhs, std::abs(t1[s] - t2[s]));
        rhs = std::max(rhs, std::abs(v1[s] - v2[s]));
      }
      worst = std::max(worst, lhs - gamma * rhs);
    }
    checks.push_back({"contraction", worst <= 1e-9, worst, 1e-9});
  }

  // 3. optimality identities on this environment
  const double tol = 1e-12;
  const OracleSolution sol = solve(mdp, mu, o.alpha, tol);
  {
    double identity = 0.0, rowsum = 0.0;
    const auto bellman = apply_optimal_operator(sol.v_star, mdp, mu, o.alpha);
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      identity = std::max(identity, std::abs(sol.v_star[s] - (sol.u_star[s] + o.alpha)));
      residual = std::max(residual, std::abs(bellman[s] - sol.v_star[s]));
      double sum = 0.0;
      for (double p : sol.pi_star[s]) sum += p;
      rowsum = std::max(rowsum, std::abs(sum - 1.0));
    }
    checks.push_back({"v_equals_u_plus_alpha", identity <= 1e-12, identity, 1e-12});
    checks.push_back({"bellman_residual", residual <= 10 * tol, residual, 10 * tol});
    checks.push_back({"pi_star_row_sums", rowsum <= 1e-8, rowsum, 1e-8});
  }

  // 4. per-state KL to the behavior policy is non-increasing in alpha
  {
    const std::vector<double> grid{0.1, 1.0, 10.0, 100.0};
    std::vector<std::vector<double>> kls;
    for (double a : grid) kls.push_back(kl_per_state(solve(mdp, mu, a, tol).pi_star, mu));
    double worst = -1.0;
    for (size_t k = 1; k < kls.size(); ++k)
      for (int s = 0; s < mdp.n_states; ++s)
        worst = std::max(worst, kls[k][s] - kls[k - 1][s]);
    checks.push_back({"alpha_kl_monotone", worst <= 1e-9, worst, 1e-9});
  }

  // 5. product-policy decomposition on random local instances
  {
    Rng rng(derive_seed(o.seed, "verify_decomp"));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + trial % 2;
      const int A = 2 + trial % 3;
      std::vector<std::vector<double>> q(n, std::vector<double>(A));
      std::vector<std::vector<double>> lmu(n, std::vector<double>(A));
      std::vector<double> w(n), v(n);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int a = 0; a < A; ++a) {
          q[i][a] = rng.uniform(-2.0, 2.0);
          lmu[i][a] = 0.05 + rng.uniform();
          sum += lmu[i][a];
        }
        for (int a = 0; a < A; ++a) lmu[i][a] /= sum;
        w[i] = rng.uniform(0.0, 2.0);
        v[i] = local_v_solve(w[i], o.alpha, q[i], lmu[i]);
      }
      worst = std::max(worst, check_decomposition(q, v, w, rng.uniform(-1.0, 1.0), lmu, o.alpha));
    }
    checks.push_back({"decomposition_residual", worst <= 1e-8, worst, 1e-8});
  }

  // 6. train on freshly generated data and compare against the oracle
  const long default_eps = std::max<long>(500, 10000 / env.horizon());
  const long n_eps = episodes > 0 ? episodes : default_eps;
  const Dataset ds = generate(env, pol, n_eps, derive_seed(o.seed, "data"));

  TrainOpts to = o;
  to.hidden = o.hidden == "256,256" ? "32" : o.hidden;  // desk-scale default for verify
  to.mixer_hidden = o.mixer_hidden == "64" ? "16" : o.mixer_hidden;
  const TrainConfig cfg = to.to_config(matrix ? 20000 : 6000);
  const TrainResult res = train(ds, env, cfg);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out + "': " + ec.message());
  write_text(fs::path(out) / "metrics.csv", metrics_to_csv(res.metrics));
  save_checkpoint(res.checkpoint, (fs::path(out) / "checkpoint.json").string());

  if (matrix) {
    // tabulate the learned decentralized policy and evaluate it exactly
    JointPolicy learned(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      std::vector<std::vector<double>> probs(mdp.n_agents);
      for (int i = 0; i < mdp.n_agents; ++i) {
        const auto logp = log_softmax(mlp_forward(res.checkpoint.nets.pi[i],
                                                  mdp.observations[s][i]));
        probs[i].resize(logp.size());
        for (size_t k = 0; k < logp.size(); ++k) probs[i][k] = std::exp(logp[k]);
      }
      learned[s].resize(mdp.joint_action_count());
      for (int j = 0; j < mdp.joint_action_count(); ++j) {
        const JointAction a = mdp.decode_joint(j);
        double p = 1.0;
        for (int i = 0; i < mdp.n_agents; ++i) p *= probs[i][a[i]];
        learned[s][j] = p;
      }
    }
    const double v_opt = [&] {
      double v = 0.0;
      for (int s = 0; s < mdp.n_states; ++s) v += mdp.initial[s] * sol.v_star[s];
      return v;
    }();
    const double v_learned = regularized_return(learned, mdp, mu, o.alpha, o.gamma);
    const double gap = (v_opt - v_learned) / std::max(std::abs(v_opt), 1e-12);
    checks.push_back({"regularized_return_gap", gap <= 0.05, gap, 0.05});

    // learned Q_tot vs oracle Q* on the decision state, relative per action
    double worst = 0.0;
    const int s0 = 0;
    const MixerEval ev = mixer_weights(res.checkpoint.mixer, mdp.observations[s0]);
    for (int j = 0; j < mdp.joint_action_count(); ++j) {
      const JointAction a = mdp.decode_joint(j);
      std::vector<double> qs(mdp.n_agents);
      for (int i = 0; i < mdp.n_agents; ++i) {
        std::vector<double> in(mdp.observations[s0][i]);
        in.resize(in.size() + mdp.n_actions, 0.0);
        in[mdp.observations[s0][i].size() + a[i]] = 1.0;
        qs[i] = mlp_forward(res.checkpoint.nets.q[i], in)[0];
      }
      const double q_tot = mix_q(ev.w, ev.b, qs);
      const double rel = std::abs(q_tot - sol.q_star[s0][j]) /
                         std::max(std::abs(sol.q_star[s0][j]), 1e-12);
      worst = std::max(worst, rel);
    }
    checks.push_back({"q_tot_matches_oracle", worst <= 0.05, worst, 0.05});
  } else {
    // the grid's continuing-task optimum is not reachable from horizon-capped
    // episodes, so the trained-side checks are directional: improve on the
    // data and beat behavior cloning on the same protocol
    const double omiga_return =
        res.metrics.empty() ? 0.0 : res.metrics.back().eval_return;
    checks.push_back({"eval_improves_on_data", omiga_return >= ds.manifest.avg_return,
                      omiga_return - ds.manifest.avg_return, 0.0});
    const TrainResult bc = bc_train(ds, env, cfg);
    const double bc_return = bc.metrics.empty() ? 0.0 : bc.metrics.back().eval_return;
    checks.push_back({"omiga_beats_bc", omiga_return >= bc_return,
                      omiga_return - bc_return, 0.0});
  }

  bool all = true;
  json jchecks = json::array();
  for (const auto& c : checks) {
    all = all && c.pass;
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " value=" << c.value
              << " threshold=" << c.threshold << "\n";
    jchecks.push_back(json{{"name", c.name},
                           {"pass", c.pass},
                           {"value", c.value},
                           {"threshold", c.threshold}});
  }
  json report{{"env", env.name()},     {"alpha", o.alpha}, {"gamma", o.gamma},
              {"seed", o.seed},        {"quality", quality}, {"episodes", n_eps},
              {"steps", cfg.steps},    {"eval_mode", eval_mode_to_string(cfg.eval_mode)},
              {"checks", jchecks},     {"overall_pass", all}};
  write_text(fs::path(out) / "report.json", report.dump(2) + "\n");
  std::cout << (all ? "verify: PASS" : "verify: FAIL") << "\n";
  return all ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  if (dirs.empty()) throw ParamError("report: need at least one run directory");
  struct Row {
    std::string algo, variant, dataset;
    double alpha;
    std::vector<double> returns;
  };
  std::map<std::string, Row> groups;
  std::string env_name;
  for (const auto& dir : dirs) {
    const fs::path rj = fs::path(dir) / "run.json";
    if (!fs::exists(rj)) throw IoError("report: missing run.json in '" + dir + "'");
    json j;
    try {
      j = json::parse(read_text(rj));
    } catch (const json::parse_error& e) {
      throw ParseError("report: " + dir + ": " + e.what());
    }
    const std::string env = j.at("env_name").get<std::string>();
    if (env_name.empty())
      env_name = env;
    else if (env_name != env)
      throw ParamError("report: runs mix incompatible environments ('" + env_name + "' vs '" +
                       env + "')");
    Row r;
    r.algo = j.at("algo").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    const std::string key = r.algo + "|" + r.variant + "|" + std::to_string(r.alpha) + "|" +
                            r.dataset;
    auto [it, inserted] = groups.emplace(key, r);
    it->second.returns.push_back(j.at("final_eval_return").get<double>());
  }

  std::string csv = "algo,variant,alpha,dataset,seeds,mean_return,std_return\n";
  std::cout << "env: " << env_name << "\n";
  std::cout << "algo      variant   alpha     seeds  mean_return  std_return\n";
  for (const auto& [key, r] : groups) {
    double mean = 0.0;
    for (double x : r.returns) mean += x;
    mean /= static_cast<double>(r.returns.size());
    double var = 0.0;
    for (double x : r.returns) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(r.returns.size()));
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s %-9s %-9g %-6zu %-12.6g %-12.6g\n", r.algo.c_str(),
                  r.variant.c_str(), r.alpha, r.returns.size(), mean, sd);
    std::cout << line;
    csv += r.algo + "," + r.variant + "," + std::to_string(r.alpha) + "," + r.dataset + "," +
           std::to_string(r.returns.size()) + "," + std::to_string(mean) + "," +
           std::to_string(sd) + "\n";
  }
  if (!out.empty()) write_text(out, csv);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"offline multi-agent RL with implicit global-to-local value regularization"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_env, gd_quality = "uniform", gd_out;
  long gd_episodes = 1000;
  uint64_t gd_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "generate an offline dataset");
  gen->add_option("--env", gd_env)->required();
  gen->add_option("--quality", gd_quality, "expert|medium|poor|uniform");
  gen->add_option("--episodes", gd_episodes);
  gen->add_option("--seed", gd_seed)->required();
  gen->add_option("--out", gd_out)->required();

  // mix-data
  std::vector<std::string> mx_dirs;
  std::string mx_props, mx_out;
  uint64_t mx_seed = 0;
  CLI::App* mixc = app.add_subcommand("mix-data", "blend datasets episode-wise");
  mixc->add_option("--dataset", mx_dirs, "dataset directory (repeatable)")->required();
  mixc->add_option("--proportions", mx_props, "comma list summing to 1 (default: equal)");
  mixc->add_option("--seed", mx_seed)->required();
  mixc->add_option("--out", mx_out)->required();

  // train / bc-train
  TrainOpts tr, bc;
  CLI::App* trainc = app.add_subcommand("train", "train the mixer-regularized learner");
  add_train_flags(trainc, tr, true);
  CLI::App* bcc = app.add_subcommand("bc-train", "behavior cloning baseline");
  add_train_flags(bcc, bc, true);

  // eval
  std::string ev_ckpt, ev_env, ev_mode = "stochastic", ev_out;
  int ev_episodes = 32;
  uint64_t ev_seed = 0;
  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  evalc->add_option("--checkpoint", ev_ckpt)->required();
  evalc->add_option("--env", ev_env)->required();
  evalc->add_option("--episodes", ev_episodes);
  evalc->add_option("--seed", ev_seed)->required();
  evalc->add_option("--mode", ev_mode, "stochastic|greedy");
  evalc->add_option("--out", ev_out, "optional JSON result path");

  // oracle-solve
  std::string os_env, os_quality = "uniform", os_out;
  double os_alpha = 1.0, os_gamma = 0.99, os_tol = 1e-10;
  uint64_t os_seed = 0;
  CLI::App* oraclec = app.add_subcommand("oracle-solve", "exact regularized solve");
  oraclec->add_option("--env", os_env)->required();
  oraclec->add_option("--alpha", os_alpha);
  oraclec->add_option("--gamma", os_gamma);
  oraclec->add_option("--quality", os_quality, "behavior policy quality");
  oraclec->add_option("--seed", os_seed);
  oraclec->add_option("--tol", os_tol);
  oraclec->add_option("--out", os_out, "report path (default: stdout)");

  // verify
  TrainOpts vf;
  vf.alpha = -1.0;  // resolved per environment unless given
  std::string vf_quality;
  long vf_episodes = -1;
  CLI::App* verifyc = app.add_subcommand("verify", "oracle property checks + trained comparison");
  verifyc->add_option("--env", vf.env_path)->required();
  verifyc->add_option("--alpha", vf.alpha);
  verifyc->add_option("--gamma", vf.gamma);
  verifyc->add_option("--tau", vf.tau);
  verifyc->add_option("--steps", vf.steps);
  verifyc->add_option("--batch", vf.batch);
  verifyc->add_option("--seed", vf.seed)->required();
  verifyc->add_option("--out", vf.out);
  verifyc->add_option("--quality", vf_quality);
  verifyc->add_option("--episodes", vf_episodes, "dataset episodes (default: env-dependent)");
  verifyc->add_option("--variant", vf.variant);
  verifyc->add_option("--mode", vf.mode);
  verifyc->add_option("--hidden", vf.hidden);
  verifyc->add_option("--mixer-hidden", vf.mixer_hidden);
  verifyc->add_option("--lr", vf.lr);
  verifyc->add_option("--eval-interval", vf.eval_interval);
  verifyc->add_option("--eval-episodes", vf.eval_episodes);

  // report
  std::vector<std::string> rp_dirs;
  std::string rp_out;
  CLI::App* reportc = app.add_subcommand("report", "aggregate run directories");
  reportc->add_option("dirs", rp_dirs, "run directories")->required();
  reportc->add_option("--out", rp_out, "CSV output path");

  try {
    std::vector<std::string> revd(args.rbegin(), args.rend());
    app.parse(std::move(revd));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(gd_env, gd_quality, gd_episodes, gd_seed, gd_out);
    if (*mixc) return cmd_mix_data(mx_dirs, mx_props, mx_seed, mx_out);
    if (*trainc) return cmd_train(tr, false);
    if (*bcc) return cmd_train(bc, true);
    if (*evalc) return cmd_eval(ev_ckpt, ev_env, ev_episodes, ev_seed, ev_mode, ev_out);
    if (*oraclec)
      return cmd_oracle_solve(os_env, os_alpha, os_gamma, os_quality, os_seed, os_tol, os_out);
    if (*verifyc) return cmd_verify(vf, vf_episodes, vf_quality);
    if (*reportc) return cmd_report(rp_dirs, rp_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace omiga::cli
