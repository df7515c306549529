#include "omiga/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "omiga/errors.hpp"

namespace omiga {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr int kFormatVersion = 1;

Dataset generate(const Env& env, const BehaviorPolicy& policy, long episodes, uint64_t seed) {
  if (episodes < 1) throw ParamError("generate: episodes must be >= 1");
  Dataset ds;
  double return_sum = 0.0;
  for (long ep = 0; ep < episodes; ++ep) {
    Rng rng(derive_seed(seed, "episode", static_cast<uint64_t>(ep)));
    auto [state, obs] = env.reset(rng);
    double ep_return = 0.0;
    int t = 0;
    while (!state.done) {
      JointAction act(env.n_agents());
      for (int i = 0; i < env.n_agents(); ++i)
        act[i] = rng.categorical(policy.row(i, obs[i]));
      StepResult res = env.step(state, act, rng);
      Transition tr;
      tr.ep = ep;
      tr.t = t;
      tr.obs = obs;
      tr.act = act;
      tr.rew = res.reward;
      tr.next_obs = res.obs;
      tr.done = res.done;
      ds.transitions.push_back(std::move(tr));
      ep_return += res.reward;
      obs = res.obs;
      state = res.next;
      ++t;
    }
    return_sum += ep_return;
  }
  auto& m = ds.manifest;
  m.format_version = kFormatVersion;
  m.env_name = env.name();
  m.n_agents = env.n_agents();
  m.obs_dim = env.obs_dim();
  m.action_count = env.n_actions();
  m.n_episodes = episodes;
  m.n_transitions = static_cast<long>(ds.transitions.size());
  m.behavior_quality = quality_to_string(policy.quality);
  m.seed = seed;
  m.avg_return = return_sum / static_cast<double>(episodes);
  return ds;
}

static json manifest_to_json(const DatasetManifest& m) {
  return json{{"format_version", m.format_version},
              {"env_name", m.env_name},
              {"n_agents", m.n_agents},
              {"obs_dim", m.obs_dim},
              {"action_count", m.action_count},
              {"n_episodes", m.n_episodes},
              {"n_transitions", m.n_transitions},
              {"behavior_quality", m.behavior_quality},
              {"seed", m.seed},
              {"avg_return", m.avg_return}};
}

static DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.env_name = j.at("env_name").get<std::string>();
    m.n_agents = j.at("n_agents").get<int>();
    m.obs_dim = j.at("obs_dim").get<int>();
    m.action_count = j.at("action_count").get<int>();
    m.n_episodes = j.at("n_episodes").get<long>();
    m.n_transitions = j.at("n_transitions").get<long>();
    m.behavior_quality = j.at("behavior_quality").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.avg_return = j.at("avg_return").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

void save(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir + "': " + ec.message());

  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ofstream mf(mpath);
  if (!mf) throw IoError("cannot write '" + mpath.string() + "'");
  mf << manifest_to_json(ds.manifest).dump(2) << '\n';

  const fs::path tpath = fs::path(dir) / "transitions.jsonl";
  std::ofstream tf(tpath);
  if (!tf) throw IoError("cannot write '" + tpath.string() + "'");
  for (const auto& tr : ds.transitions) {
    json j{{"ep", tr.ep},      {"t", tr.t},
           {"obs", tr.obs},    {"act", tr.act},
           {"rew", tr.rew},    {"next_obs", tr.next_obs},
           {"done", tr.done}};
    tf << j.dump() << '\n';
  }
  if (!tf) throw IoError("write failed for '" + tpath.string() + "'");
}

static void check_joint_obs(const JointObs& o, const DatasetManifest& m, long line,
                            const char* field) {
  if (static_cast<int>(o.size()) != m.n_agents)
    throw IntegrityError("transitions.jsonl line " + std::to_string(line) + ": " + field +
                         " has " + std::to_string(o.size()) + " agents, manifest says " +
                         std::to_string(m.n_agents));
  for (const auto& v : o)
    if (static_cast<int>(v.size()) != m.obs_dim)
      throw IntegrityError("transitions.jsonl line " + std::to_string(line) + ": " + field +
                           " dim mismatch");
}

Dataset load(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) throw IoError("cannot open '" + mpath.string() + "'");
  json mj;
  try {
    mf >> mj;
  } catch (const json::parse_error& e) {
    throw ParseError("manifest.json: " + std::string(e.what()));
  }
  Dataset ds;
  ds.manifest = manifest_from_json(mj);
  if (ds.manifest.format_version != kFormatVersion)
    throw VersionError("dataset format version " + std::to_string(ds.manifest.format_version) +
                       " unsupported (expected " + std::to_string(kFormatVersion) + ")");

  const fs::path tpath = fs::path(dir) / "transitions.jsonl";
  std::ifstream tf(tpath);
  if (!tf) throw IoError("cannot open '" + tpath.string() + "'");
  std::string linebuf;
  long line = 0;
  while (std::getline(tf, linebuf)) {
    ++line;
    if (linebuf.empty()) continue;
    json j;
    try {
      j = json::parse(linebuf);
    } catch (const json::parse_error& e) {
      throw ParseError("transitions.jsonl line " + std::to_string(line) + ": " + e.what());
    }
    Transition tr;
    try {
      tr.ep = j.at("ep").get<long>();
      tr.t = j.at("t").get<int>();
      tr.obs = j.at("obs").get<JointObs>();
      tr.act = j.at("act").get<JointAction>();
      tr.rew = j.at("rew").get<double>();
      tr.next_obs = j.at("next_obs").get<JointObs>();
      tr.done = j.at("done").get<bool>();
    } catch (const json::exception& e) {
      throw ParseError("transitions.jsonl line " + std::to_string(line) + ": " + e.what());
    }
    if (tr.t < 0)
      throw IntegrityError("transitions.jsonl line " + std::to_string(line) + ": negative t");
    if (!std::isfinite(tr.rew))
      throw IntegrityError("transitions.jsonl line " + std::to_string(line) +
                           ": non-finite reward");
    check_joint_obs(tr.obs, ds.manifest, line, "obs");
    check_joint_obs(tr.next_obs, ds.manifest, line, "next_obs");
    if (static_cast<int>(tr.act.size()) != ds.manifest.n_agents)
      throw IntegrityError("transitions.jsonl line " + std::to_string(line) +
                           ": action count mismatch");
    for (int a : tr.act)
      if (a < 0 || a >= ds.manifest.action_count)
        throw IntegrityError("transitions.jsonl line " + std::to_string(line) +
                             ": action index out of range");
    ds.transitions.push_back(std::move(tr));
  }
  if (static_cast<long>(ds.transitions.size()) != ds.manifest.n_transitions)
    throw IntegrityError("dataset integrity: manifest says " +
                         std::to_string(ds.manifest.n_transitions) + " transitions, found " +
                         std::to_string(ds.transitions.size()));
  long episodes = 0;
  for (const auto& tr : ds.transitions) episodes = std::max(episodes, tr.ep + 1);
  if (episodes != ds.manifest.n_episodes)
    throw IntegrityError("dataset integrity: manifest says " +
                         std::to_string(ds.manifest.n_episodes) + " episodes, found " +
                         std::to_string(episodes));
  return ds;
}

static void shuffle_indices(std::vector<long>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(static_cast<int>(i))]);
}

Dataset mix(const std::vector<Dataset>& parts, const std::vector<double>& proportions,
            uint64_t seed) {
  if (parts.empty()) throw ParamError("mix: need at least one dataset");
  if (parts.size() != proportions.size())
    throw ParamError("mix: proportions count does not match datasets");
  double psum = 0.0;
  for (double p : proportions) {
    if (p < 0.0 || p > 1.0) throw ParamError("mix: proportions must lie in [0,1]");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw ParamError("mix: proportions sum to " + std::to_string(psum) + ", expected 1");
  const auto& ref = parts.front().manifest;
  for (const auto& d : parts) {
    const auto& m = d.manifest;
    if (m.env_name != ref.env_name || m.n_agents != ref.n_agents || m.obs_dim != ref.obs_dim ||
        m.action_count != ref.action_count)
      throw ParamError("mix: datasets come from incompatible environments");
  }

  // gather (part, episode) pairs to keep, subsampled without replacement
  struct PickedEpisode {
    size_t part;
    long ep;
  };
  std::vector<PickedEpisode> picked;
  for (size_t k = 0; k < parts.size(); ++k) {
    const long n = parts[k].manifest.n_episodes;
    const long take = std::lround(proportions[k] * static_cast<double>(n));
    std::vector<long> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(derive_seed(seed, "mix_part", static_cast<uint64_t>(k)));
    shuffle_indices(ids, rng);
    for (long i = 0; i < take; ++i) picked.push_back({k, ids[i]});
  }
  std::vector<long> order(picked.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "mix_order"));
  shuffle_indices(order, rng);

  // index transitions by episode within each part
  std::vector<std::unordered_map<long, std::vector<const Transition*>>> by_ep(parts.size());
  for (size_t k = 0; k < parts.size(); ++k)
    for (const auto& tr : parts[k].transitions) by_ep[k][tr.ep].push_back(&tr);

  Dataset out;
  double return_sum = 0.0;
  long new_ep = 0;
  for (long oi : order) {
    const auto& pe = picked[oi];
    const auto& trs = by_ep[pe.part].at(pe.ep);
    double ep_ret = 0.0;
    for (const Transition* tr : trs) {
      Transition copy = *tr;
      copy.ep = new_ep;
      ep_ret += copy.rew;
      out.transitions.push_back(std::move(copy));
    }
    return_sum += ep_ret;
    ++new_ep;
  }
  out.manifest = ref;
  out.manifest.behavior_quality = "mixed";
  out.manifest.seed = seed;
  out.manifest.n_episodes = new_ep;
  out.manifest.n_transitions = static_cast<long>(out.transitions.size());
  out.manifest.avg_return = new_ep > 0 ? return_sum / new_ep : 0.0;
  return out;
}

Batch sample_batch(const Dataset& ds, int batch_size, Rng& rng) {
  const long n = static_cast<long>(ds.transitions.size());
  if (n == 0) throw UsageError("sample_batch: dataset is empty");
  if (batch_size < 1 || batch_size > n)
    throw ParamError("sample_batch: batch_size must be in [1, n_transitions]");
  Batch b;
  b.obs.reserve(batch_size);
  b.act.reserve(batch_size);
  b.rew.reserve(batch_size);
  b.next_obs.reserve(batch_size);
  b.done.reserve(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const auto& tr = ds.transitions[rng.uniform_int(static_cast<int>(n))];
    b.obs.push_back(tr.obs);
    b.act.push_back(tr.act);
    b.rew.push_back(tr.rew);
    b.next_obs.push_back(tr.next_obs);
    b.done.push_back(tr.done ? 1 : 0);
  }
  return b;
}

}  // namespace omiga
