#pragma once

#include <span>
#include <vector>

#include "omiga/env.hpp"

namespace omiga {

/// Per-state distribution over the joint action space, rows [S][|A|^n].
using JointPolicy = std::vector<std::vector<double>>;

/// Exact solution of the behavior-regularized MDP on a tabular instance:
/// fixed-point V*, one-backup Q*, normalization term u* = V* - alpha, and the
/// closed-form optimal joint policy.
struct OracleSolution {
  std::vector<double> v_star;          // [S]
  std::vector<double> u_star;          // [S]
  std::vector<std::vector<double>> q_star;  // [S][J]
  JointPolicy pi_star;                 // [S][J]
  double alpha = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  double residual = 0.0;               // last sup-norm change
};

/// One application of the optimal regularized backup:
/// V'(s) = alpha * log E_{a~mu(.|s)}[exp((r(s,a) + gamma E[V(s')]) / alpha)],
/// computed with max subtraction; terminal states map to 0.
std::vector<double> apply_optimal_operator(const std::vector<double>& v, const TabularMDP& mdp,
                                           const JointPolicy& mu, double alpha);

/// Fixed-point iteration to sup-norm tolerance tol (iteration cap 1e5).
OracleSolution solve(const TabularMDP& mdp, const JointPolicy& mu, double alpha, double tol);

/// pi*(a|s) = mu(a|s) * exp((Q*(s,a) - V*(s)) / alpha). Rows must come out as
/// distributions within 1e-6 or the inputs were not a converged solution.
JointPolicy optimal_policy(const std::vector<std::vector<double>>& q_star,
                           const std::vector<double>& v_star, const JointPolicy& mu,
                           double alpha);

/// Unique minimizer of E_mu[exp(w (Q - V)/alpha) + w V / alpha] over scalar V:
/// (alpha/w) log E_mu[exp(w Q / alpha)] for w > 0, E_mu[Q] in the w -> 0 limit.
double local_v_solve(double w, double alpha, std::span<const double> q_values,
                     std::span<const double> mu_probs);

/// Brute-force check of the product-policy decomposition for one observation:
/// given per-agent (Q_i, V_i, w_i, mu_i) with each V_i satisfying the
/// self-normalization condition, verifies that the product of local policies
/// sums to 1 over the joint action space and matches
/// mu_tot * exp((Q_tot - V_tot)/alpha) elementwise (within 1e-10).
/// Returns the normalization residual |sum - 1|.
double check_decomposition(const std::vector<std::vector<double>>& q_locals,
                           const std::vector<double>& v_locals, const std::vector<double>& w,
                           double b, const std::vector<std::vector<double>>& mu_locals,
                           double alpha);

/// Exact policy evaluation under the KL-penalized reward: solves
/// V = E_pi[r - alpha log(pi/mu) + gamma E V] as a linear system and returns
/// the value of the initial-state distribution. pi must be absolutely
/// continuous w.r.t. mu.
double regularized_return(const JointPolicy& pi, const TabularMDP& mdp, const JointPolicy& mu,
                          double alpha, double gamma);

/// Joint behavior table mu_tot(a|s) = prod_i mu_i(a_i | Z(s, i)).
JointPolicy behavior_joint(const TabularMDP& mdp, const BehaviorPolicy& policy);

/// Per-state KL(pi || mu) over the joint action space.
std::vector<double> kl_per_state(const JointPolicy& pi, const JointPolicy& mu);

}  // namespace omiga
