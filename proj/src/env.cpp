#include "omiga/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "omiga/errors.hpp"

namespace omiga {

using nlohmann::json;

int TabularMDP::joint_action_count() const {
  int j = 1;
  for (int i = 0; i < n_agents; ++i) j *= n_actions;
  return j;
}

int TabularMDP::encode_joint(const JointAction& a) const {
  if (static_cast<int>(a.size()) != n_agents) throw ShapeError("joint action size mismatch");
  int idx = 0;
  for (int i = 0; i < n_agents; ++i) {
    if (a[i] < 0 || a[i] >= n_actions) throw ParamError("action index out of range");
    idx = idx * n_actions + a[i];
  }
  return idx;
}

JointAction TabularMDP::decode_joint(int idx) const {
  JointAction a(n_agents);
  for (int i = n_agents - 1; i >= 0; --i) {
    a[i] = idx % n_actions;
    idx /= n_actions;
  }
  return a;
}

void TabularMDP::validate() {
  if (n_agents < 1 || n_states < 1 || n_actions < 1) throw ShapeError("mdp: bad dims");
  joint_count_ = joint_action_count();
  const size_t j = joint_count_;
  if (transition.size() != static_cast<size_t>(n_states) * j * n_states)
    throw ShapeError("mdp: transition tensor size mismatch");
  if (reward.size() != static_cast<size_t>(n_states) * j)
    throw ShapeError("mdp: reward tensor size mismatch");
  if (observations.size() != static_cast<size_t>(n_states) ||
      terminal.size() != static_cast<size_t>(n_states) ||
      initial.size() != static_cast<size_t>(n_states))
    throw ShapeError("mdp: per-state arrays size mismatch");
  if (gamma < 0.0 || gamma >= 1.0) throw ParamError("mdp: gamma outside [0,1)");
  for (int s = 0; s < n_states; ++s) {
    for (size_t a = 0; a < j; ++a) {
      double sum = 0.0;
      for (int sp = 0; sp < n_states; ++sp) sum += p(s, static_cast<int>(a), sp);
      if (std::abs(sum - 1.0) > 1e-12)
        throw ShapeError("mdp: transition row (s=" + std::to_string(s) +
                         ", a=" + std::to_string(a) + ") sums to " + std::to_string(sum));
      if (!std::isfinite(r(s, static_cast<int>(a)))) throw ShapeError("mdp: non-finite reward");
    }
  }
  double isum = 0.0;
  for (double x : initial) isum += x;
  if (std::abs(isum - 1.0) > 1e-12) throw ShapeError("mdp: initial distribution sums to " +
                                                     std::to_string(isum));
}

Quality quality_from_string(const std::string& s) {
  if (s == "expert") return Quality::expert;
  if (s == "medium") return Quality::medium;
  if (s == "poor") return Quality::poor;
  if (s == "uniform") return Quality::uniform;
  throw ParamError("unknown behavior quality '" + s + "'");
}

std::string quality_to_string(Quality q) {
  switch (q) {
    case Quality::expert: return "expert";
    case Quality::medium: return "medium";
    case Quality::poor: return "poor";
    case Quality::uniform: return "uniform";
  }
  return "uniform";
}

std::string obs_key(const Obs& o) {
  std::string key(o.size() * sizeof(double), '\0');
  std::memcpy(key.data(), o.data(), key.size());
  return key;
}

const std::vector<double>& BehaviorPolicy::row(int agent, const Obs& o) const {
  if (agent < 0 || agent >= static_cast<int>(tables.size()))
    throw ParamError("behavior policy: agent index out of range");
  auto it = tables[agent].find(obs_key(o));
  if (it == tables[agent].end())
    throw ParamError("behavior policy: unseen observation for agent " + std::to_string(agent));
  return it->second;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

static std::vector<std::array<int, 2>> parse_cells(const json& arr, const char* what,
                                                   int grid_size) {
  std::vector<std::array<int, 2>> out;
  for (const auto& c : arr) {
    if (!c.is_array() || c.size() != 2) throw ParseError(std::string(what) + ": expected [row, col]");
    int r = c[0].get<int>(), col = c[1].get<int>();
    if (r < 0 || r >= grid_size || col < 0 || col >= grid_size)
      throw ParamError(std::string(what) + ": cell outside grid");
    out.push_back({r, col});
  }
  return out;
}

EnvConfig EnvConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("env config: ") + e.what());
  }
  EnvConfig c;
  if (!j.contains("env_name")) throw ParseError("env config: missing env_name");
  c.env_name = j.at("env_name").get<std::string>();
  if (c.env_name != "matrix_game" && c.env_name != "coop_grid")
    throw ParamError("env config: unknown env_name '" + c.env_name + "'");
  c.n_agents = j.value("n_agents", 2);
  if (c.n_agents < 1) throw ParamError("env config: n_agents must be >= 1");
  c.horizon = j.value("horizon", c.env_name == "matrix_game" ? 1 : 20);
  if (c.horizon < 1) throw ParamError("env config: horizon must be >= 1");
  c.seed = j.value("seed", 0ull);

  if (c.env_name == "matrix_game") {
    if (c.n_agents != 2) throw ParamError("matrix_game: exactly 2 agents supported");
    if (j.contains("payoff_table")) {
      const auto& t = j.at("payoff_table");
      if (!t.is_array() || t.empty() || !t[0].is_array())
        throw ParseError("matrix_game: payoff_table must be a 2-d array");
      c.n_actions = static_cast<int>(t.size());
      for (const auto& row : t) {
        if (static_cast<int>(row.size()) != c.n_actions)
          throw ParseError("matrix_game: payoff_table must be square");
        for (const auto& v : row) c.payoff.push_back(v.get<double>());
      }
    } else {
      c.n_actions = j.value("n_actions", 2);
      c.payoff.assign(static_cast<size_t>(c.n_actions) * c.n_actions, 0.0);
      c.payoff[0] = 1.0;
    }
    if (c.n_actions < 2) throw ParamError("matrix_game: need at least 2 actions");
  } else {
    c.grid_size = j.value("grid_size", 3);
    if (c.grid_size < 2 || c.grid_size > 5) throw ParamError("coop_grid: grid_size in [2,5]");
    c.n_actions = 4;  // up, down, left, right; blocked moves stay in place
    c.mask_other = j.value("mask_other", false);
    const int cells = c.grid_size * c.grid_size;
    if (j.contains("starts"))
      c.starts = parse_cells(j.at("starts"), "starts", c.grid_size);
    else
      for (int i = 0; i < c.n_agents; ++i)
        c.starts.push_back(i % 2 == 0 ? std::array<int, 2>{0, 0}
                                      : std::array<int, 2>{c.grid_size - 1, c.grid_size - 1});
    if (j.contains("goals"))
      c.goals = parse_cells(j.at("goals"), "goals", c.grid_size);
    else
      for (int i = 0; i < c.n_agents; ++i)
        c.goals.push_back(i % 2 == 0 ? std::array<int, 2>{c.grid_size - 1, c.grid_size - 1}
                                     : std::array<int, 2>{0, 0});
    if (static_cast<int>(c.starts.size()) != c.n_agents ||
        static_cast<int>(c.goals.size()) != c.n_agents)
      throw ParamError("coop_grid: starts/goals must list one cell per agent");
    // keep the joint space enumerable for the oracle
    double states = std::pow(static_cast<double>(cells), c.n_agents);
    if (states > 4096) throw ParamError("coop_grid: state space too large to enumerate");
  }
  return c;
}

EnvConfig EnvConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open env config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

// ---------------------------------------------------------------------------
// Env
// ---------------------------------------------------------------------------

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  n_actions_ = cfg_.n_actions;
  cells_ = cfg_.grid_size * cfg_.grid_size;
  if (is_matrix()) {
    n_states_ = 2;  // decision state, terminal
    obs_dim_ = 1;
  } else {
    n_states_ = 1;
    for (int i = 0; i < cfg_.n_agents; ++i) n_states_ *= cells_;
    obs_dim_ = cells_ * cfg_.n_agents;  // own cell one-hot + other agents' cells
  }
}

Env Env::from_config_file(const std::string& path) { return Env(EnvConfig::from_file(path)); }

bool Env::state_terminal(int s) const { return is_matrix() && s == 1; }

JointObs Env::observe(int state) const {
  JointObs obs(cfg_.n_agents);
  if (is_matrix()) {
    for (auto& o : obs) o.assign(1, state == 0 ? 1.0 : 0.0);
    return obs;
  }
  // decode agent cells, agent 0 most significant
  std::vector<int> pos(cfg_.n_agents);
  int rem = state;
  for (int i = cfg_.n_agents - 1; i >= 0; --i) {
    pos[i] = rem % cells_;
    rem /= cells_;
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    Obs o(obs_dim_, 0.0);
    o[pos[i]] = 1.0;
    if (!cfg_.mask_other) {
      int block = 1;
      for (int k = 0; k < cfg_.n_agents; ++k) {
        if (k == i) continue;
        o[block * cells_ + pos[k]] = 1.0;
        ++block;
      }
    }
    obs[i] = std::move(o);
  }
  return obs;
}

std::pair<EpisodeState, JointObs> Env::reset(Rng&) const {
  EpisodeState ep;
  if (is_matrix()) {
    ep.state = 0;
  } else {
    int s = 0;
    for (int i = 0; i < cfg_.n_agents; ++i)
      s = s * cells_ + (cfg_.starts[i][0] * cfg_.grid_size + cfg_.starts[i][1]);
    ep.state = s;
  }
  return {ep, observe(ep.state)};
}

std::pair<int, double> Env::transition_of(int s, const JointAction& a) const {
  if (is_matrix()) {
    int idx = 0;
    for (int i = 0; i < cfg_.n_agents; ++i) idx = idx * n_actions_ + a[i];
    return {1, cfg_.payoff[idx]};
  }
  std::vector<int> pos(cfg_.n_agents);
  int rem = s;
  for (int i = cfg_.n_agents - 1; i >= 0; --i) {
    pos[i] = rem % cells_;
    rem /= cells_;
  }
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  int sp = 0;
  bool all_on_goal = true;
  for (int i = 0; i < cfg_.n_agents; ++i) {
    int row = pos[i] / cfg_.grid_size, col = pos[i] % cfg_.grid_size;
    int nr = row + dr[a[i]], nc = col + dc[a[i]];
    if (nr < 0 || nr >= cfg_.grid_size || nc < 0 || nc >= cfg_.grid_size) {
      nr = row;
      nc = col;
    }
    sp = sp * cells_ + (nr * cfg_.grid_size + nc);
    if (nr != cfg_.goals[i][0] || nc != cfg_.goals[i][1]) all_on_goal = false;
  }
  return {sp, all_on_goal ? 1.0 : 0.0};
}

StepResult Env::step(const EpisodeState& ep, const JointAction& a, Rng&) const {
  if (ep.done || state_terminal(ep.state))
    throw UsageError("step: episode already finished");
  if (static_cast<int>(a.size()) != cfg_.n_agents)
    throw ShapeError("step: expected one action per agent");
  for (int x : a)
    if (x < 0 || x >= n_actions_) throw ParamError("step: action index out of range");

  auto [sp, rew] = transition_of(ep.state, a);
  StepResult res;
  res.next.state = sp;
  res.next.t = ep.t + 1;
  res.reward = rew;
  res.done = state_terminal(sp) || res.next.t >= cfg_.horizon;
  res.next.done = res.done;
  res.obs = observe(sp);
  return res;
}

TabularMDP Env::tabular_export(double gamma) const {
  TabularMDP m;
  m.n_agents = cfg_.n_agents;
  m.n_states = n_states_;
  m.n_actions = n_actions_;
  m.obs_dim = obs_dim_;
  m.gamma = gamma;
  const int j = m.joint_action_count();
  if (j > 4096) throw ParamError("tabular_export: joint action space too large");
  m.joint_count_ = j;
  m.terminal.assign(n_states_, 0);
  m.transition.assign(static_cast<size_t>(n_states_) * j * n_states_, 0.0);
  m.reward.assign(static_cast<size_t>(n_states_) * j, 0.0);
  m.initial.assign(n_states_, 0.0);
  m.observations.resize(n_states_);

  Rng dummy(0);
  m.initial[reset(dummy).first.state] = 1.0;
  for (int s = 0; s < n_states_; ++s) {
    m.observations[s] = observe(s);
    m.terminal[s] = state_terminal(s) ? 1 : 0;
    for (int ja = 0; ja < j; ++ja) {
      if (m.terminal[s]) {
        // absorbing, zero reward
        m.transition[(static_cast<size_t>(s) * j + ja) * n_states_ + s] = 1.0;
        continue;
      }
      auto [sp, rew] = transition_of(s, m.decode_joint(ja));
      m.transition[(static_cast<size_t>(s) * j + ja) * n_states_ + sp] = 1.0;
      m.reward[static_cast<size_t>(s) * j + ja] = rew;
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Behavior policies
// ---------------------------------------------------------------------------

// Unregularized value iteration; returns the greedy joint action per state.
static std::vector<int> greedy_joint_actions(const TabularMDP& m) {
  const int J = m.joint_action_count();
  std::vector<double> V(m.n_states, 0.0);
  for (int it = 0; it < 100000; ++it) {
    double delta = 0.0;
    for (int s = 0; s < m.n_states; ++s) {
      if (m.terminal[s]) continue;
      double best = -1e300;
      for (int a = 0; a < J; ++a) {
        double q = m.r(s, a);
        for (int sp = 0; sp < m.n_states; ++sp) {
          const double pr = m.p(s, a, sp);
          if (pr > 0.0) q += m.gamma * pr * V[sp];
        }
        best = std::max(best, q);
      }
      delta = std::max(delta, std::abs(best - V[s]));
      V[s] = best;
    }
    if (delta < 1e-12) break;
  }
  std::vector<int> greedy(m.n_states, 0);
  for (int s = 0; s < m.n_states; ++s) {
    if (m.terminal[s]) continue;
    double best = -1e300;
    for (int a = 0; a < J; ++a) {
      double q = m.r(s, a);
      for (int sp = 0; sp < m.n_states; ++sp) {
        const double pr = m.p(s, a, sp);
        if (pr > 0.0) q += m.gamma * pr * V[sp];
      }
      if (q > best + 1e-12) {  // ties break to the lowest joint index
        best = q;
        greedy[s] = a;
      }
    }
  }
  return greedy;
}

BehaviorPolicy make_behavior_policy(const Env& env, Quality quality, uint64_t /*seed*/) {
  const TabularMDP m = env.tabular_export();
  const std::vector<int> greedy = greedy_joint_actions(m);
  const int A = env.n_actions();
  const double unif = 1.0 / A;

  BehaviorPolicy pol;
  pol.n_actions = A;
  pol.quality = quality;
  pol.tables.resize(env.n_agents());

  for (int i = 0; i < env.n_agents(); ++i) {
    // Accumulate the greedy one-hot per distinct observation; states that share
    // an observation average their greedy choices.
    std::unordered_map<std::string, std::vector<double>> counts;
    std::unordered_map<std::string, int> hits;
    for (int s = 0; s < m.n_states; ++s) {
      const std::string key = obs_key(m.observations[s][i]);
      auto& c = counts[key];
      if (c.empty()) c.assign(A, 0.0);
      if (!m.terminal[s]) {
        c[m.decode_joint(greedy[s])[i]] += 1.0;
        hits[key] += 1;
      }
    }
    for (auto& [key, c] : counts) {
      std::vector<double> expert(A, unif);
      const int n = hits.count(key) ? hits[key] : 0;
      if (n > 0) {
        for (int a = 0; a < A; ++a) expert[a] = 0.95 * (c[a] / n) + 0.05 * unif;
      }
      std::vector<double> row(A);
      for (int a = 0; a < A; ++a) {
        switch (quality) {
          case Quality::expert: row[a] = expert[a]; break;
          case Quality::medium: row[a] = 0.5 * expert[a] + 0.5 * unif; break;
          case Quality::poor: row[a] = 0.1 * expert[a] + 0.9 * unif; break;
          case Quality::uniform: row[a] = unif; break;
        }
      }
      pol.tables[i].emplace(key, std::move(row));
    }
  }
  return pol;
}

}  // namespace omiga
