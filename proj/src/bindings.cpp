#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "omiga/dataset.hpp"
#include "omiga/env.hpp"
#include "omiga/mixer.hpp"
#include "omiga/oracle.hpp"
#include "omiga/trainer.hpp"

namespace py = pybind11;
using namespace omiga;

PYBIND11_MODULE(omiga_core, m) {
  m.doc() = "offline multi-agent RL trainer with an exact tabular oracle";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<EpisodeState>(m, "EpisodeState")
      .def_readonly("state", &EpisodeState::state)
      .def_readonly("t", &EpisodeState::t)
      .def_readonly("done", &EpisodeState::done);

  py::class_<TabularMDP>(m, "TabularMDP")
      .def_readonly("n_agents", &TabularMDP::n_agents)
      .def_readonly("n_states", &TabularMDP::n_states)
      .def_readonly("n_actions", &TabularMDP::n_actions)
      .def_readonly("gamma", &TabularMDP::gamma)
      .def_readonly("terminal", &TabularMDP::terminal)
      .def_readonly("reward", &TabularMDP::reward)
      .def_readonly("transition", &TabularMDP::transition)
      .def_readonly("observations", &TabularMDP::observations)
      .def_readonly("initial", &TabularMDP::initial)
      .def("joint_action_count", &TabularMDP::joint_action_count)
      .def("decode_joint", &TabularMDP::decode_joint)
      .def("encode_joint", &TabularMDP::encode_joint);

  py::class_<BehaviorPolicy>(m, "BehaviorPolicy")
      .def_readonly("n_actions", &BehaviorPolicy::n_actions)
      .def("row", &BehaviorPolicy::row, py::arg("agent"), py::arg("obs"),
           py::return_value_policy::copy);

  py::class_<Env>(m, "Env")
      .def_static("from_config_file", &Env::from_config_file)
      .def_property_readonly("name", &Env::name)
      .def_property_readonly("n_agents", &Env::n_agents)
      .def_property_readonly("n_actions", &Env::n_actions)
      .def_property_readonly("obs_dim", &Env::obs_dim)
      .def_property_readonly("horizon", &Env::horizon)
      .def(
          "reset",
          [](const Env& env, uint64_t seed) {
            Rng rng(seed);
            return env.reset(rng);
          },
          py::arg("seed") = 0)
      .def(
          "step",
          [](const Env& env, const EpisodeState& ep, const JointAction& a, uint64_t seed) {
            Rng rng(seed);
            const StepResult r = env.step(ep, a, rng);
            return py::make_tuple(r.next, r.obs, r.reward, r.done);
          },
          py::arg("episode"), py::arg("actions"), py::arg("seed") = 0)
      .def("observe", &Env::observe)
      .def("tabular_export", &Env::tabular_export, py::arg("gamma") = 0.99);

  m.def(
      "make_behavior_policy",
      [](const Env& env, const std::string& quality, uint64_t seed) {
        return make_behavior_policy(env, quality_from_string(quality), seed);
      },
      py::arg("env"), py::arg("quality"), py::arg("seed") = 0);

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def_readonly("env_name", &DatasetManifest::env_name)
      .def_readonly("n_agents", &DatasetManifest::n_agents)
      .def_readonly("obs_dim", &DatasetManifest::obs_dim)
      .def_readonly("action_count", &DatasetManifest::action_count)
      .def_readonly("n_episodes", &DatasetManifest::n_episodes)
      .def_readonly("n_transitions", &DatasetManifest::n_transitions)
      .def_readonly("behavior_quality", &DatasetManifest::behavior_quality)
      .def_readonly("avg_return", &DatasetManifest::avg_return);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("manifest", &Dataset::manifest)
      .def("__len__", [](const Dataset& d) { return d.transitions.size(); });

  m.def("generate_dataset", &generate, py::arg("env"), py::arg("policy"), py::arg("episodes"),
        py::arg("seed"));
  m.def("save_dataset", &save, py::arg("dataset"), py::arg("dir"));
  m.def("load_dataset", &load, py::arg("dir"));
  m.def("mix_datasets", &mix, py::arg("datasets"), py::arg("proportions"), py::arg("seed"));

  py::class_<OracleSolution>(m, "OracleSolution")
      .def_readonly("v_star", &OracleSolution::v_star)
      .def_readonly("u_star", &OracleSolution::u_star)
      .def_readonly("q_star", &OracleSolution::q_star)
      .def_readonly("pi_star", &OracleSolution::pi_star)
      .def_readonly("alpha", &OracleSolution::alpha)
      .def_readonly("gamma", &OracleSolution::gamma)
      .def_readonly("iterations", &OracleSolution::iterations)
      .def_readonly("residual", &OracleSolution::residual);

  m.def("apply_optimal_operator", &apply_optimal_operator, py::arg("v"), py::arg("mdp"),
        py::arg("mu"), py::arg("alpha"));
  m.def("oracle_solve", &solve, py::arg("mdp"), py::arg("mu"), py::arg("alpha"),
        py::arg("tol") = 1e-10);
  m.def("optimal_policy", &optimal_policy, py::arg("q_star"), py::arg("v_star"), py::arg("mu"),
        py::arg("alpha"));
  m.def(
      "local_v_solve",
      [](double w, double alpha, const std::vector<double>& q, const std::vector<double>& mu) {
        return local_v_solve(w, alpha, q, mu);
      },
      py::arg("w"), py::arg("alpha"), py::arg("q_values"), py::arg("mu_probs"));
  m.def("check_decomposition", &check_decomposition, py::arg("q_locals"), py::arg("v_locals"),
        py::arg("w"), py::arg("b"), py::arg("mu_locals"), py::arg("alpha"));
  m.def("regularized_return", &regularized_return, py::arg("pi"), py::arg("mdp"), py::arg("mu"),
        py::arg("alpha"), py::arg("gamma"));
  m.def("behavior_joint", &behavior_joint, py::arg("mdp"), py::arg("policy"));
  m.def("kl_per_state", &kl_per_state, py::arg("pi"), py::arg("mu"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("lr_q", &TrainConfig::lr_q)
      .def_readwrite("lr_v", &TrainConfig::lr_v)
      .def_readwrite("lr_pi", &TrainConfig::lr_pi)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("mixer_hidden", &TrainConfig::mixer_hidden)
      .def_readwrite("eval_interval", &TrainConfig::eval_interval)
      .def_readwrite("eval_episodes", &TrainConfig::eval_episodes)
      .def_property(
          "variant", [](const TrainConfig& c) { return variant_to_string(c.variant); },
          [](TrainConfig& c, const std::string& s) { c.variant = variant_from_string(s); })
      .def_property(
          "eval_mode", [](const TrainConfig& c) { return eval_mode_to_string(c.eval_mode); },
          [](TrainConfig& c, const std::string& s) { c.eval_mode = eval_mode_from_string(s); });

  py::class_<MetricsRow>(m, "MetricsRow")
      .def_readonly("step", &MetricsRow::step)
      .def_readonly("v_loss", &MetricsRow::v_loss)
      .def_readonly("q_loss", &MetricsRow::q_loss)
      .def_readonly("pi_loss", &MetricsRow::pi_loss)
      .def_readonly("mean_w", &MetricsRow::mean_w)
      .def_readonly("eval_return", &MetricsRow::eval_return);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def("save", &save_checkpoint, py::arg("path"))
      .def_static("load", &load_checkpoint, py::arg("path"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("checkpoint", &TrainResult::checkpoint)
      .def_readonly("metrics", &TrainResult::metrics);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("mean", &EvalResult::mean)
      .def_readonly("stddev", &EvalResult::stddev)
      .def_readonly("episodes", &EvalResult::episodes);

  m.def("train", &train, py::arg("dataset"), py::arg("eval_env"), py::arg("config"));
  m.def("bc_train", &bc_train, py::arg("dataset"), py::arg("eval_env"), py::arg("config"));
  m.def(
      "evaluate",
      [](const Checkpoint& c, const Env& env, int episodes, uint64_t seed,
         const std::string& mode) {
        return evaluate(c, env, episodes, seed, eval_mode_from_string(mode));
      },
      py::arg("checkpoint"), py::arg("env"), py::arg("episodes") = 32, py::arg("seed") = 0,
      py::arg("mode") = "stochastic");
  m.def("metrics_to_csv", &metrics_to_csv);
}
