#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omiga/errors.hpp"
#include "omiga/oracle.hpp"
#include "omiga/trainer.hpp"
#include "test_util.hpp"

using namespace omiga;

namespace {

Env matrix_env(bool and_payoff = true) {
  return Env(EnvConfig::from_json_text(
      and_payoff ? R"({"env_name": "matrix_game", "n_agents": 2,
                       "payoff_table": [[1.0, 0.0], [0.0, 0.0]], "horizon": 1})"
                 : R"({"env_name": "matrix_game", "n_agents": 2,
                       "payoff_table": [[1.2, 0.7], [0.7, 0.2]], "horizon": 1})"));
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.alpha = 1.0;
  cfg.hidden = {8};
  cfg.mixer_hidden = {4};
  cfg.batch_size = 16;
  cfg.steps = 200;
  cfg.eval_interval = 100;
  cfg.eval_episodes = 8;
  cfg.seed = 0;
  return cfg;
}

// two agents, scalar observation [1.0]; nets crafted so that values are exact
struct Crafted {
  AgentNets nets;
  MixerParams mixer;

  Crafted() {
    nets.n_agents = 2;
    nets.obs_dim = 1;
    nets.n_actions = 2;
    for (int i = 0; i < 2; ++i) {
      nets.q.push_back(mlp_zeros({3, 1}));
      nets.q_target.push_back(mlp_zeros({3, 1}));
      nets.v.push_back(mlp_zeros({1, 1}));
      nets.pi.push_back(mlp_zeros({1, 2}));
    }
    mixer.n_agents = 2;
    mixer.obs_dim = 1;
    mixer.mode = WeightInput::joint;
    mixer.w_net = mlp_zeros({2, 2});
    mixer.b_net = mlp_zeros({2, 1});
  }

  void set_weights(double w) {
    mixer.w_net.layers[0].b = {w, w};
  }
  // Q(o, a) = values[a] for both online and target nets
  void set_q(double q0, double q1) {
    for (int i = 0; i < 2; ++i) {
      nets.q[i].layers[0].w = {0.0, q0, q1};
      nets.q_target[i].layers[0].w = {0.0, q0, q1};
    }
  }
};

Batch matrix_batch(const std::vector<std::pair<int, int>>& joint_actions,
                   const std::vector<double>& rewards) {
  Batch b;
  for (size_t k = 0; k < joint_actions.size(); ++k) {
    b.obs.push_back(JointObs{{1.0}, {1.0}});
    b.next_obs.push_back(JointObs{{0.0}, {0.0}});
    b.act.push_back({joint_actions[k].first, joint_actions[k].second});
    b.rew.push_back(rewards[k]);
    b.done.push_back(1);
  }
  return b;
}

}  // namespace

TEST_CASE("v_loss: zero weights give loss exactly one and zero gradients") {
  Crafted c;  // w-net all zero -> w = 0
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}, {1, 1}}, {1.0, 0.0});
  VLossResult res = v_loss(b, c.nets, c.mixer, cfg);
  CHECK(res.loss == 1.0);
  for (const auto& g : res.v_grads)
    for (const auto& l : g.layers) {
      for (double x : l.w) CHECK(x == 0.0);
      for (double x : l.b) CHECK(x == 0.0);
    }
}

TEST_CASE("v_loss: unit weight, zero targets, zero values") {
  Crafted c;
  c.set_weights(1.0);
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}}, {1.0});
  VLossResult res = v_loss(b, c.nets, c.mixer, cfg);
  CHECK(res.loss == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(res.mean_w == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("v_loss: minimizing over a scalar V finds the log-mean-exp point") {
  Crafted c;
  c.set_weights(1.0);
  c.set_q(1.0, 0.0);  // Qbar alternates between 1 and 0 across the batch
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}, {1, 1}}, {1.0, 0.0});

  std::vector<AdamState> opt;
  for (int i = 0; i < 2; ++i) opt.push_back(AdamState::create(c.nets.v[i], 0.01));
  for (int t = 0; t < 4000; ++t) {
    VLossResult res = v_loss(b, c.nets, c.mixer, cfg);
    for (int i = 0; i < 2; ++i) adam_step(c.nets.v[i], res.v_grads[i], opt[i]);
  }
  // anneal for a tight fix of the minimizer
  for (int i = 0; i < 2; ++i) opt[i].lr = 1e-4;
  for (int t = 0; t < 3000; ++t) {
    VLossResult res = v_loss(b, c.nets, c.mixer, cfg);
    for (int i = 0; i < 2; ++i) adam_step(c.nets.v[i], res.v_grads[i], opt[i]);
  }
  const double expect = local_v_solve(1.0, 1.0, std::vector<double>{1.0, 0.0},
                                      std::vector<double>{0.5, 0.5});
  for (int i = 0; i < 2; ++i) {
    const double v = mlp_forward(c.nets.v[i], std::vector<double>{1.0})[0];
    CHECK(v == doctest::Approx(expect).epsilon(1e-3));
    CHECK(v == doctest::Approx(0.6201).epsilon(1e-3));
    // the minimizer satisfies the self-normalization condition
    const double residual = 0.5 * std::exp(1.0 - v) + 0.5 * std::exp(-v);
    CHECK(std::abs(residual - 1.0) <= 1e-3);
  }
}

TEST_CASE("q_loss: zero nets, zero targets give zero loss") {
  Crafted c;
  TrainConfig cfg = small_config();
  cfg.gamma = 0.0;
  Batch b = matrix_batch({{0, 0}}, {0.0});
  QLossResult res = q_loss(b, c.nets, c.mixer, cfg);
  CHECK(res.loss == 0.0);
}

TEST_CASE("q_loss: terminal sample with unit reward has unit squared error") {
  Crafted c;
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}}, {1.0});
  QLossResult res = q_loss(b, c.nets, c.mixer, cfg);
  CHECK(res.loss == 1.0);
}

TEST_CASE("policy_loss: zero weights reduce to behavior cloning likelihood") {
  Crafted c;  // w = 0 -> exp(0) = 1 on every sample
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 1}, {1, 0}}, {0.0, 0.0});
  PolicyLossResult res = policy_loss(b, c.nets, c.mixer, cfg);
  // uniform logits: -log(1/2) per sample and agent
  CHECK(res.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("policy_loss: AWR fixed point on a two-action advantage gap") {
  Crafted c;
  c.set_weights(1.0);
  c.set_q(1.0, -1.0);  // advantages +1 / -1 against V = 0
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}, {1, 1}}, {0.0, 0.0});  // uniform coverage

  std::vector<AdamState> opt;
  for (int i = 0; i < 2; ++i) opt.push_back(AdamState::create(c.nets.pi[i], 0.02));
  for (int t = 0; t < 3000; ++t) {
    PolicyLossResult res = policy_loss(b, c.nets, c.mixer, cfg);
    for (int i = 0; i < 2; ++i) adam_step(c.nets.pi[i], res.pi_grads[i], opt[i]);
  }
  // weight ratio e^2: optimum puts e^2/(e^2+1) ~ 0.88 on the first action
  for (int i = 0; i < 2; ++i) {
    const auto logp = log_softmax(mlp_forward(c.nets.pi[i], std::vector<double>{1.0}));
    CHECK(std::exp(logp[0]) >= 0.87);
  }
}

TEST_CASE("policy_loss: enormous alpha recovers the empirical behavior") {
  Env env = matrix_env();
  Dataset ds = generate(env, make_behavior_policy(env, Quality::uniform, 0), 5000, 21);
  TrainConfig cfg = small_config();
  cfg.alpha = 1e6;
  Rng rng(derive_seed(3, "init"));
  AgentNets nets = init_agent_nets(2, 1, 2, {8}, rng);
  MixerParams mixer = mixer_init(2, 1, {4}, WeightInput::joint, rng);

  std::vector<AdamState> opt;
  for (int i = 0; i < 2; ++i) opt.push_back(AdamState::create(nets.pi[i], 0.01));
  Rng brng(derive_seed(3, "batch"));
  for (int t = 0; t < 2000; ++t) {
    Batch b = sample_batch(ds, 64, brng);
    PolicyLossResult res = policy_loss(b, nets, mixer, cfg);
    for (int i = 0; i < 2; ++i) adam_step(nets.pi[i], res.pi_grads[i], opt[i]);
  }
  // empirical per-agent action frequencies
  for (int i = 0; i < 2; ++i) {
    double freq0 = 0.0;
    for (const auto& tr : ds.transitions) freq0 += tr.act[i] == 0 ? 1.0 : 0.0;
    freq0 /= static_cast<double>(ds.transitions.size());
    const auto logp = log_softmax(mlp_forward(nets.pi[i], std::vector<double>{1.0}));
    const double tv = std::abs(std::exp(logp[0]) - freq0);
    CHECK(tv <= 0.02);
  }
}

TEST_CASE("losses stay finite and untouched by poisoned out-of-batch actions") {
  // every transition uses action 0; the unused action-1 input column is filled
  // with 1e300, so any query of an out-of-batch action would blow the loss up
  Crafted clean;
  clean.set_weights(1.0);
  clean.set_q(0.4, 0.0);
  for (int i = 0; i < 2; ++i) {
    clean.nets.v[i].layers[0].b = {0.1};
    clean.nets.pi[i].layers[0].b = {0.3, -0.2};
  }
  Crafted poisoned = clean;
  for (int i = 0; i < 2; ++i) {
    poisoned.nets.q[i].layers[0].w[2] = 1e300;         // column of one-hot(a=1)
    poisoned.nets.q_target[i].layers[0].w[2] = 1e300;
  }
  TrainConfig cfg = small_config();
  Batch b = matrix_batch({{0, 0}, {0, 0}}, {1.0, 1.0});

  const VLossResult v1 = v_loss(b, clean.nets, clean.mixer, cfg);
  const VLossResult v2 = v_loss(b, poisoned.nets, poisoned.mixer, cfg);
  CHECK(v1.loss == v2.loss);
  const QLossResult q1 = q_loss(b, clean.nets, clean.mixer, cfg);
  const QLossResult q2 = q_loss(b, poisoned.nets, poisoned.mixer, cfg);
  CHECK(q1.loss == q2.loss);
  CHECK(q1.q_grads[0].layers[0].w[1] == q2.q_grads[0].layers[0].w[1]);
  CHECK(q2.q_grads[0].layers[0].w[2] == 0.0);  // no gradient into the unseen column
  const PolicyLossResult p1 = policy_loss(b, clean.nets, clean.mixer, cfg);
  const PolicyLossResult p2 = policy_loss(b, poisoned.nets, poisoned.mixer, cfg);
  CHECK(p1.loss == p2.loss);
  CHECK(std::isfinite(v2.loss));
  CHECK(std::isfinite(q2.loss));
  CHECK(std::isfinite(p2.loss));
}

namespace {

struct FdSetup {
  AgentNets nets;
  MixerParams mixer;
  Batch batch;
  TrainConfig cfg;

  explicit FdSetup(uint64_t seed) {
    Rng rng(seed);
    nets = init_agent_nets(2, 2, 2, {5}, rng);
    mixer = mixer_init(2, 2, {4}, WeightInput::joint, rng);
    cfg.alpha = 1.3;
    cfg.gamma = 0.9;
    for (int k = 0; k < 6; ++k) {
      JointObs o{{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                 {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
      JointObs o2{{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                  {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
      batch.obs.push_back(o);
      batch.next_obs.push_back(o2);
      batch.act.push_back({rng.uniform_int(2), rng.uniform_int(2)});
      batch.rew.push_back(rng.uniform(-1, 1));
      batch.done.push_back(k % 3 == 0 ? 1 : 0);
    }
  }
};

double fd_max_err(MlpParams& net, const MlpGrads& grads,
                  const std::function<double()>& loss_fn) {
  const double h = 1e-5;
  double worst = 0.0;
  for (size_t k = 0; k < net.layers.size(); ++k) {
    auto probe = [&](std::vector<double>& vec, const std::vector<double>& gvec) {
      for (size_t i = 0; i < vec.size(); ++i) {
        const double keep = vec[i];
        vec[i] = keep + h;
        const double up = loss_fn();
        vec[i] = keep - h;
        const double dn = loss_fn();
        vec[i] = keep;
        worst = std::max(worst, testutil::rel_err((up - dn) / (2 * h), gvec[i]));
      }
    };
    probe(net.layers[k].w, grads.layers[k].w);
    probe(net.layers[k].b, grads.layers[k].b);
  }
  return worst;
}

}  // namespace

TEST_CASE("v_loss gradients match finite differences") {
  FdSetup s(111);
  const VLossResult res = v_loss(s.batch, s.nets, s.mixer, s.cfg);
  auto loss_fn = [&] { return v_loss(s.batch, s.nets, s.mixer, s.cfg).loss; };
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst, fd_max_err(s.nets.v[i], res.v_grads[i], loss_fn));
  CHECK(worst <= 1e-4);
}

TEST_CASE("q_loss gradients match finite differences, mixer included") {
  FdSetup s(222);
  const QLossResult res = q_loss(s.batch, s.nets, s.mixer, s.cfg);
  auto loss_fn = [&] { return q_loss(s.batch, s.nets, s.mixer, s.cfg).loss; };
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst, fd_max_err(s.nets.q[i], res.q_grads[i], loss_fn));
  worst = std::max(worst, fd_max_err(s.mixer.w_net, res.w_grads, loss_fn));
  worst = std::max(worst, fd_max_err(s.mixer.b_net, res.b_grads, loss_fn));
  CHECK(worst <= 1e-4);
}

TEST_CASE("policy_loss gradients match finite differences") {
  FdSetup s(333);
  const PolicyLossResult res = policy_loss(s.batch, s.nets, s.mixer, s.cfg);
  auto loss_fn = [&] { return policy_loss(s.batch, s.nets, s.mixer, s.cfg).loss; };
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst, fd_max_err(s.nets.pi[i], res.pi_grads[i], loss_fn));
  CHECK(worst <= 1e-4);
}

TEST_CASE("train: zero iterations returns the untouched initialization") {
  Env env = matrix_env();
  Dataset ds = generate(env, make_behavior_policy(env, Quality::uniform, 0), 50, 0);
  TrainConfig cfg = small_config();
  cfg.steps = 0;
  TrainResult res = train(ds, env, cfg);
  CHECK(res.metrics.empty());
  Checkpoint init = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  CHECK(checkpoint_to_json_text(res.checkpoint) == checkpoint_to_json_text(init));
}

TEST_CASE("train: metrics row count is ceil(steps / eval_interval)") {
  Env env = matrix_env();
  Dataset ds = generate(env, make_behavior_policy(env, Quality::uniform, 0), 50, 0);
  TrainConfig cfg = small_config();
  cfg.steps = 201;
  cfg.eval_interval = 100;
  TrainResult res = train(ds, env, cfg);
  REQUIRE(res.metrics.size() == 3);
  CHECK(res.metrics[0].step == 100);
  CHECK(res.metrics[1].step == 200);
  CHECK(res.metrics[2].step == 201);
  for (const auto& r : res.metrics) {
    CHECK(std::isfinite(r.v_loss));
    CHECK(std::isfinite(r.q_loss));
    CHECK(std::isfinite(r.pi_loss));
    CHECK(r.mean_w >= 0.0);
  }
}

TEST_CASE("train: a fixed seed reproduces the metrics CSV and checkpoint bit-for-bit") {
  Env env = matrix_env();
  Dataset ds = generate(env, make_behavior_policy(env, Quality::medium, 0), 100, 0);
  TrainConfig cfg = small_config();
  cfg.steps = 150;
  cfg.seed = 17;
  TrainResult a = train(ds, env, cfg);
  TrainResult b = train(ds, env, cfg);
  CHECK(metrics_to_csv(a.metrics) == metrics_to_csv(b.metrics));
  CHECK(checkpoint_to_json_text(a.checkpoint) == checkpoint_to_json_text(b.checkpoint));
}

TEST_CASE("train: incompatible dataset is rejected") {
  Env env = matrix_env();
  Env grid(EnvConfig::from_json_text(R"({"env_name": "coop_grid", "grid_size": 3})"));
  Dataset ds = generate(grid, make_behavior_policy(grid, Quality::uniform, 0), 5, 0);
  CHECK_THROWS_AS(train(ds, env, small_config()), CompatibilityError);
}

TEST_CASE("checkpoint JSON round-trips") {
  Env env = matrix_env();
  TrainConfig cfg = small_config();
  Checkpoint ckpt = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  const std::string text = checkpoint_to_json_text(ckpt);
  Checkpoint back = checkpoint_from_json_text(text);
  CHECK(checkpoint_to_json_text(back) == text);
  CHECK(back.nets.n_agents == 2);
  CHECK(back.nets.obs_dim == 1);
  CHECK(back.nets.n_actions == 2);
}

TEST_CASE("evaluate: uniform policy earns the binomial mean on the one-hot payoff") {
  Env env = matrix_env();
  TrainConfig cfg = small_config();
  Checkpoint ckpt = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  for (auto& pi : ckpt.nets.pi) pi = mlp_zeros({1, 2});  // uniform logits
  EvalResult r = evaluate(ckpt, env, 10000, 5, EvalMode::stochastic);
  CHECK(std::abs(r.mean - 0.25) <= 0.015);
  CHECK(r.episodes == 10000);
}

TEST_CASE("evaluate: greedy logits forcing the optimum return 1 every episode") {
  Env env = matrix_env();
  TrainConfig cfg = small_config();
  Checkpoint ckpt = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  for (auto& pi : ckpt.nets.pi) {
    pi = mlp_zeros({1, 2});
    pi.layers[0].b = {1.0, 0.0};
  }
  EvalResult r = evaluate(ckpt, env, 32, 5, EvalMode::greedy);
  CHECK(r.mean == 1.0);
  CHECK(r.stddev == 0.0);
  CHECK(r.episodes == 32);
}

TEST_CASE("evaluate: dimension mismatch is a compatibility error") {
  Env env = matrix_env();
  Env grid(EnvConfig::from_json_text(R"({"env_name": "coop_grid", "grid_size": 3})"));
  TrainConfig cfg = small_config();
  Checkpoint ckpt = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  CHECK_THROWS_AS(evaluate(ckpt, grid, 4, 0, EvalMode::stochastic), CompatibilityError);
}

TEST_CASE("bc_train: uniform data clones to near-uniform policies") {
  Env env = matrix_env();
  Dataset ds = generate(env, make_behavior_policy(env, Quality::uniform, 0), 4000, 9);
  TrainConfig cfg = small_config();
  cfg.steps = 4000;
  cfg.batch_size = 256;
  cfg.lr_pi = 0.005;
  TrainResult res = bc_train(ds, env, cfg);
  for (int i = 0; i < 2; ++i) {
    const auto logp = log_softmax(
        mlp_forward(res.checkpoint.nets.pi[i], std::vector<double>{1.0}));
    CHECK(std::abs(std::exp(logp[0]) - 0.5) <= 0.02);
  }
}

TEST_CASE("bc_train: deterministic expert data clones to the expert action") {
  Env env = matrix_env();
  Dataset ds;
  ds.manifest.env_name = "matrix_game";
  ds.manifest.n_agents = 2;
  ds.manifest.obs_dim = 1;
  ds.manifest.action_count = 2;
  ds.manifest.n_episodes = 64;
  ds.manifest.n_transitions = 64;
  for (int k = 0; k < 64; ++k) {
    Transition tr;
    tr.ep = k;
    tr.t = 0;
    tr.obs = {{1.0}, {1.0}};
    tr.act = {0, 0};
    tr.rew = 1.0;
    tr.next_obs = {{0.0}, {0.0}};
    tr.done = true;
    ds.transitions.push_back(tr);
  }
  TrainConfig cfg = small_config();
  cfg.steps = 3000;
  cfg.lr_pi = 0.02;
  TrainResult res = bc_train(ds, env, cfg);
  for (int i = 0; i < 2; ++i) {
    const auto logp = log_softmax(
        mlp_forward(res.checkpoint.nets.pi[i], std::vector<double>{1.0}));
    CHECK(std::exp(logp[0]) >= 0.99);
  }
}

TEST_CASE("bc_train: empty dataset is a usage error") {
  Env env = matrix_env();
  Dataset ds;
  ds.manifest.env_name = "matrix_game";
  ds.manifest.n_agents = 2;
  ds.manifest.obs_dim = 1;
  ds.manifest.action_count = 2;
  CHECK_THROWS_AS(bc_train(ds, env, small_config()), UsageError);
}

TEST_CASE("ablation tags configure the trainer") {
  TrainConfig base = small_config();
  CHECK(ablation_variant(base, "full").variant == Variant::full);
  CHECK(ablation_variant(base, "no_w").variant == Variant::no_w);
  CHECK(ablation_variant(base, "local_w").variant == Variant::local_w);
  CHECK_THROWS_AS(ablation_variant(base, "bogus"), ParamError);
}

TEST_CASE("local_w: the weight network sees one agent's observation") {
  Env env = matrix_env();
  TrainConfig cfg = small_config();
  cfg.variant = Variant::local_w;
  Checkpoint ckpt = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), cfg);
  CHECK(ckpt.mixer.w_net.input_dim() == env.obs_dim());
  TrainConfig full = small_config();
  Checkpoint fc = init_checkpoint(env.n_agents(), env.obs_dim(), env.n_actions(), full);
  CHECK(fc.mixer.w_net.input_dim() == env.n_agents() * env.obs_dim());
}

TEST_CASE("no_w: the V objective collapses to unit weights") {
  Crafted c;
  c.set_weights(7.0);  // would be huge if used
  c.set_q(0.3, 0.0);
  for (int i = 0; i < 2; ++i) c.nets.v[i].layers[0].b = {0.1};
  TrainConfig cfg = small_config();
  cfg.alpha = 2.0;
  cfg.variant = Variant::no_w;
  Batch b = matrix_batch({{0, 0}}, {1.0});
  VLossResult res = v_loss(b, c.nets, c.mixer, cfg);
  const double expect = std::exp((0.3 - 0.1) / 2.0) + 0.1 / 2.0;
  CHECK(res.loss == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("train runs on the grid environment") {
  Env env = Env::from_config_file(std::string(OMIGA_CONFIG_DIR) + "/coop_grid.json");
  Dataset ds = generate(env, make_behavior_policy(env, Quality::medium, 0), 30, 1);
  TrainConfig cfg = small_config();
  cfg.steps = 30;
  cfg.eval_interval = 30;
  cfg.batch_size = 32;
  TrainResult res = train(ds, env, cfg);
  CHECK(res.metrics.size() == 1);
  CHECK(std::isfinite(res.metrics[0].eval_return));
}
