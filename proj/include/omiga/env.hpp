#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "omiga/rng.hpp"

namespace omiga {

using Obs = std::vector<double>;
using JointObs = std::vector<Obs>;        // one vector per agent
using JointAction = std::vector<int>;     // one discrete action per agent

/// Fully enumerated multi-agent MDP. Joint actions are flattened with agent 0
/// as the most significant digit.
struct TabularMDP {
  int n_agents = 0;
  int n_states = 0;
  int n_actions = 0;  // per agent
  int obs_dim = 0;
  double gamma = 0.99;
  std::vector<uint8_t> terminal;          // [S]
  std::vector<double> transition;         // [S][J][S], rows sum to 1
  std::vector<double> reward;             // [S][J]
  std::vector<JointObs> observations;     // [S] -> per-agent observation
  std::vector<double> initial;            // [S], initial state distribution

  int joint_action_count() const;
  int encode_joint(const JointAction& a) const;
  JointAction decode_joint(int idx) const;

  double p(int s, int j, int sp) const {
    return transition[(static_cast<size_t>(s) * joint_count_ + j) * n_states + sp];
  }
  double r(int s, int j) const { return reward[static_cast<size_t>(s) * joint_count_ + j]; }

  /// Row sums within 1e-12, finite rewards, shapes consistent. Also refreshes
  /// the cached joint action count used by the accessors above.
  void validate();

  /// Cached joint action count; builders must keep it in sync.
  int joint_count_ = 0;
};

enum class Quality { expert, medium, poor, uniform };
Quality quality_from_string(const std::string& s);
std::string quality_to_string(Quality q);

/// Byte key for an observation vector (observations in the shipped envs are
/// exact 0/1 constants, so byte equality is the right notion).
std::string obs_key(const Obs& o);

/// Per-agent tabular behavior policy mu_i(a_i | o_i), rows strictly positive.
struct BehaviorPolicy {
  int n_actions = 0;
  Quality quality = Quality::uniform;
  std::vector<std::unordered_map<std::string, std::vector<double>>> tables;

  const std::vector<double>& row(int agent, const Obs& o) const;
};

struct EnvConfig {
  std::string env_name;  // "matrix_game" | "coop_grid"
  int n_agents = 2;
  int n_actions = 2;     // matrix game; coop_grid always has 4 moves
  int grid_size = 3;
  int horizon = 1;
  uint64_t seed = 0;
  std::vector<double> payoff;  // matrix game, row-major over joint actions
  bool mask_other = false;     // coop_grid: hide other agents' cells
  std::vector<std::array<int, 2>> starts;  // coop_grid, one (row, col) per agent
  std::vector<std::array<int, 2>> goals;

  static EnvConfig from_file(const std::string& path);
  static EnvConfig from_json_text(const std::string& text);
};

struct EpisodeState {
  int state = 0;
  int t = 0;
  bool done = false;
};

struct StepResult {
  EpisodeState next;
  JointObs obs;
  double reward = 0.0;
  bool done = false;
};

/// Immutable environment; rollout state lives in EpisodeState so episodes can
/// run in parallel.
class Env {
 public:
  explicit Env(EnvConfig cfg);
  static Env from_config_file(const std::string& path);

  const EnvConfig& config() const { return cfg_; }
  const std::string& name() const { return cfg_.env_name; }
  int n_agents() const { return cfg_.n_agents; }
  int n_actions() const { return n_actions_; }
  int n_states() const { return n_states_; }
  int obs_dim() const { return obs_dim_; }
  int horizon() const { return cfg_.horizon; }

  JointObs observe(int state) const;
  std::pair<EpisodeState, JointObs> reset(Rng& rng) const;
  StepResult step(const EpisodeState& ep, const JointAction& a, Rng& rng) const;

  TabularMDP tabular_export(double gamma = 0.99) const;

 private:
  bool is_matrix() const { return cfg_.env_name == "matrix_game"; }
  bool state_terminal(int s) const;
  std::pair<int, double> transition_of(int s, const JointAction& a) const;  // deterministic envs

  EnvConfig cfg_;
  int n_actions_ = 0;
  int n_states_ = 0;
  int obs_dim_ = 0;
  int cells_ = 0;  // grid_size^2
};

/// expert: greedy w.r.t. the unregularized tabular optimum, mixed with 5%
/// uniform; medium: 50/50 expert/uniform; poor: 10/90; uniform: uniform.
/// The seed is accepted for interface symmetry; construction is deterministic.
BehaviorPolicy make_behavior_policy(const Env& env, Quality quality, uint64_t seed);

}  // namespace omiga
