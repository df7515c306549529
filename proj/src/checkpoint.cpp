#include <fstream>

#include <json.hpp>

#include "omiga/errors.hpp"
#include "omiga/trainer.hpp"

namespace omiga {

using nlohmann::json;

static json net_to_json(const MlpParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers)
    layers.push_back(json{{"rows", l.out}, {"cols", l.in}, {"weights", l.w}, {"bias", l.b}});
  return layers;
}

static MlpParams net_from_json(const json& j, const std::string& name) {
  MlpParams p;
  if (!j.is_array() || j.empty())
    throw ParseError("checkpoint: network '" + name + "' must be a non-empty layer list");
  for (const auto& lj : j) {
    Layer l;
    try {
      l.out = lj.at("rows").get<int>();
      l.in = lj.at("cols").get<int>();
      l.w = lj.at("weights").get<std::vector<double>>();
      l.b = lj.at("bias").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError("checkpoint: network '" + name + "': " + e.what());
    }
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

static json config_to_json(const TrainConfig& c) {
  return json{{"alpha", c.alpha},
              {"gamma", c.gamma},
              {"tau", c.tau},
              {"lr_q", c.lr_q},
              {"lr_v", c.lr_v},
              {"lr_pi", c.lr_pi},
              {"batch_size", c.batch_size},
              {"steps", c.steps},
              {"seed", c.seed},
              {"exp_clamp", c.exp_clamp},
              {"weight_clamp", c.weight_clamp},
              {"hidden", c.hidden},
              {"mixer_hidden", c.mixer_hidden},
              {"eval_interval", c.eval_interval},
              {"eval_episodes", c.eval_episodes},
              {"eval_mode", eval_mode_to_string(c.eval_mode)},
              {"variant", variant_to_string(c.variant)}};
}

static TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.alpha = j.at("alpha").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.tau = j.at("tau").get<double>();
    c.lr_q = j.at("lr_q").get<double>();
    c.lr_v = j.at("lr_v").get<double>();
    c.lr_pi = j.at("lr_pi").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.steps = j.at("steps").get<long>();
    c.seed = j.at("seed").get<uint64_t>();
    c.exp_clamp = j.at("exp_clamp").get<double>();
    c.weight_clamp = j.at("weight_clamp").get<double>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.mixer_hidden = j.at("mixer_hidden").get<std::vector<int>>();
    c.eval_interval = j.at("eval_interval").get<int>();
    c.eval_episodes = j.at("eval_episodes").get<int>();
    c.eval_mode = eval_mode_from_string(j.at("eval_mode").get<std::string>());
    c.variant = variant_from_string(j.at("variant").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what());
  }
  return c;
}

std::string checkpoint_to_json_text(const Checkpoint& ckpt) {
  json j;
  j["config"] = config_to_json(ckpt.config);
  for (int i = 0; i < ckpt.nets.n_agents; ++i) {
    j["q_" + std::to_string(i)] = net_to_json(ckpt.nets.q[i]);
    j["q_target_" + std::to_string(i)] = net_to_json(ckpt.nets.q_target[i]);
    j["v_" + std::to_string(i)] = net_to_json(ckpt.nets.v[i]);
    j["pi_" + std::to_string(i)] = net_to_json(ckpt.nets.pi[i]);
  }
  j["mixer_w"] = net_to_json(ckpt.mixer.w_net);
  j["mixer_b"] = net_to_json(ckpt.mixer.b_net);
  return j.dump(2);
}

Checkpoint checkpoint_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  Checkpoint ckpt;
  if (!j.contains("config")) throw ParseError("checkpoint: missing config block");
  ckpt.config = config_from_json(j.at("config"));

  int n = 0;
  while (j.contains("pi_" + std::to_string(n))) ++n;
  if (n == 0) throw ParseError("checkpoint: no policy networks found");
  for (int i = 0; i < n; ++i) {
    const std::string sfx = std::to_string(i);
    ckpt.nets.q.push_back(net_from_json(j.at("q_" + sfx), "q_" + sfx));
    ckpt.nets.q_target.push_back(net_from_json(j.at("q_target_" + sfx), "q_target_" + sfx));
    ckpt.nets.v.push_back(net_from_json(j.at("v_" + sfx), "v_" + sfx));
    ckpt.nets.pi.push_back(net_from_json(j.at("pi_" + sfx), "pi_" + sfx));
  }
  ckpt.nets.n_agents = n;
  ckpt.nets.obs_dim = ckpt.nets.pi[0].input_dim();
  ckpt.nets.n_actions = ckpt.nets.pi[0].output_dim();

  ckpt.mixer.w_net = net_from_json(j.at("mixer_w"), "mixer_w");
  ckpt.mixer.b_net = net_from_json(j.at("mixer_b"), "mixer_b");
  ckpt.mixer.mode =
      ckpt.config.variant == Variant::local_w ? WeightInput::local : WeightInput::joint;
  ckpt.mixer.n_agents = n;
  ckpt.mixer.obs_dim = ckpt.nets.obs_dim;
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  f << checkpoint_to_json_text(ckpt) << '\n';
  if (!f) throw IoError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return checkpoint_from_json_text(text);
}

}  // namespace omiga
