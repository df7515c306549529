#pragma once

#include <string>
#include <vector>

#include "omiga/env.hpp"

namespace omiga {

struct Transition {
  long ep = 0;
  int t = 0;
  JointObs obs;
  JointAction act;
  double rew = 0.0;
  JointObs next_obs;
  bool done = false;
};

struct DatasetManifest {
  int format_version = 1;
  std::string env_name;
  int n_agents = 0;
  int obs_dim = 0;
  int action_count = 0;
  long n_episodes = 0;
  long n_transitions = 0;
  std::string behavior_quality;
  uint64_t seed = 0;
  double avg_return = 0.0;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Transition> transitions;
};

/// Aligned batch arrays: obs, actions, rewards, next obs, done mask.
struct Batch {
  std::vector<JointObs> obs;
  std::vector<JointAction> act;
  std::vector<double> rew;
  std::vector<JointObs> next_obs;
  std::vector<uint8_t> done;

  int size() const { return static_cast<int>(rew.size()); }
};

/// Roll out `episodes` episodes under the behavior policy. Deterministic for a
/// fixed seed; episode rollouts use independent substreams.
Dataset generate(const Env& env, const BehaviorPolicy& policy, long episodes, uint64_t seed);

/// Writes manifest.json and transitions.jsonl into dir (created if missing).
void save(const Dataset& ds, const std::string& dir);

/// Load and validate a dataset directory. Count or dimension mismatches raise
/// IntegrityError; malformed lines raise ParseError with the line number.
Dataset load(const std::string& dir);

/// Episode-granular blend: from dataset k, round(p_k * n_episodes_k) episodes
/// are drawn without replacement, re-indexed and shuffled.
Dataset mix(const std::vector<Dataset>& parts, const std::vector<double>& proportions,
            uint64_t seed);

/// Uniform with replacement. batch_size must be in [1, n_transitions].
Batch sample_batch(const Dataset& ds, int batch_size, Rng& rng);

}  // namespace omiga
