#include "omiga/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omiga/errors.hpp"

namespace omiga {

static constexpr int kIterationCap = 100000;
static constexpr int kJointCap = 4096;

static void check_mdp_and_policy(const TabularMDP& mdp, const JointPolicy& rows,
                                 const char* what, double row_tol) {
  const int J = mdp.joint_action_count();
  if (J > kJointCap) throw ParamError("oracle: joint action space exceeds enumeration cap");
  if (mdp.joint_count_ != J) throw ShapeError("oracle: mdp joint-action cache is stale");
  if (static_cast<int>(rows.size()) != mdp.n_states)
    throw ShapeError(std::string(what) + ": row count does not match states");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(rows[s].size()) != J)
      throw ShapeError(std::string(what) + ": row width does not match joint actions");
    double sum = 0.0;
    for (double p : rows[s]) {
      if (p < 0.0) throw ParamError(std::string(what) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > row_tol)
      throw ParamError(std::string(what) + ": row " + std::to_string(s) + " sums to " +
                       std::to_string(sum));
  }
}

std::vector<double> apply_optimal_operator(const std::vector<double>& v, const TabularMDP& mdp,
                                           const JointPolicy& mu, double alpha) {
  if (alpha <= 0.0) throw ParamError("oracle: alpha must be positive");
  if (static_cast<int>(v.size()) != mdp.n_states)
    throw ShapeError("apply_optimal_operator: value vector size mismatch");
  check_mdp_and_policy(mdp, mu, "mu", 1e-9);

  const int J = mdp.joint_action_count();
  std::vector<double> out(mdp.n_states, 0.0);
  std::vector<double> x(J);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < J; ++a) {
      double q = mdp.r(s, a);
      for (int sp = 0; sp < mdp.n_states; ++sp) {
        const double p = mdp.p(s, a, sp);
        if (p > 0.0) q += mdp.gamma * p * v[sp];
      }
      x[a] = q / alpha;
    }
    // weighted log-mean-exp with max subtraction
    double mx = -1e300;
    for (int a = 0; a < J; ++a)
      if (mu[s][a] > 0.0) mx = std::max(mx, x[a]);
    double acc = 0.0;
    for (int a = 0; a < J; ++a)
      if (mu[s][a] > 0.0) acc += mu[s][a] * std::exp(x[a] - mx);
    out[s] = alpha * (mx + std::log(acc));
  }
  return out;
}

OracleSolution solve(const TabularMDP& mdp, const JointPolicy& mu, double alpha, double tol) {
  if (tol <= 0.0) throw ParamError("solve: tol must be positive");
  if (mdp.gamma >= 1.0) throw ParamError("solve: gamma must be < 1");
  OracleSolution sol;
  sol.alpha = alpha;
  sol.gamma = mdp.gamma;
  std::vector<double> v(mdp.n_states, 0.0);
  double diff = 0.0;
  int it = 0;
  for (; it < kIterationCap; ++it) {
    std::vector<double> next = apply_optimal_operator(v, mdp, mu, alpha);
    diff = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) diff = std::max(diff, std::abs(next[s] - v[s]));
    v = std::move(next);
    if (diff < tol) break;
  }
  if (diff >= tol)
    throw ConvergenceError("solve: no convergence after " + std::to_string(kIterationCap) +
                           " iterations (gamma=" + std::to_string(mdp.gamma) + ")");
  sol.iterations = it + 1;
  sol.residual = diff;
  sol.v_star = v;
  sol.u_star.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) sol.u_star[s] = v[s] - alpha;

  const int J = mdp.joint_action_count();
  sol.q_star.assign(mdp.n_states, std::vector<double>(J, 0.0));
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < J; ++a) {
      double q = mdp.r(s, a);
      for (int sp = 0; sp < mdp.n_states; ++sp) {
        const double p = mdp.p(s, a, sp);
        if (p > 0.0) q += mdp.gamma * p * v[sp];
      }
      sol.q_star[s][a] = q;
    }
  }
  sol.pi_star = optimal_policy(sol.q_star, sol.v_star, mu, alpha);
  return sol;
}

JointPolicy optimal_policy(const std::vector<std::vector<double>>& q_star,
                           const std::vector<double>& v_star, const JointPolicy& mu,
                           double alpha) {
  if (alpha <= 0.0) throw ParamError("optimal_policy: alpha must be positive");
  if (q_star.size() != v_star.size() || q_star.size() != mu.size())
    throw ShapeError("optimal_policy: input sizes disagree");
  JointPolicy pi(q_star.size());
  for (size_t s = 0; s < q_star.size(); ++s) {
    if (q_star[s].size() != mu[s].size())
      throw ShapeError("optimal_policy: row width mismatch");
    pi[s].resize(mu[s].size());
    double sum = 0.0;
    for (size_t a = 0; a < mu[s].size(); ++a) {
      pi[s][a] = mu[s][a] == 0.0
                     ? 0.0
                     : mu[s][a] * std::exp((q_star[s][a] - v_star[s]) / alpha);
      sum += pi[s][a];
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw PreconditionError("optimal_policy: row " + std::to_string(s) + " sums to " +
                              std::to_string(sum) + "; inputs look unconverged");
  }
  return pi;
}

double local_v_solve(double w, double alpha, std::span<const double> q_values,
                     std::span<const double> mu_probs) {
  if (alpha <= 0.0) throw ParamError("local_v_solve: alpha must be positive");
  if (w < 0.0) throw ParamError("local_v_solve: w must be non-negative");
  if (q_values.size() != mu_probs.size() || q_values.empty())
    throw ShapeError("local_v_solve: value/probability length mismatch");
  double psum = 0.0;
  for (double p : mu_probs) {
    if (p < 0.0) throw ParamError("local_v_solve: negative probability");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw ParamError("local_v_solve: probabilities sum to " + std::to_string(psum));

  if (w == 0.0) {  // removable singularity: the w -> 0 limit is the behavior mean
    double mean = 0.0;
    for (size_t k = 0; k < q_values.size(); ++k) mean += mu_probs[k] * q_values[k];
    return mean;
  }
  const double scale = w / alpha;
  double mx = -1e300;
  for (size_t k = 0; k < q_values.size(); ++k)
    if (mu_probs[k] > 0.0) mx = std::max(mx, scale * q_values[k]);
  double acc = 0.0;
  for (size_t k = 0; k < q_values.size(); ++k)
    if (mu_probs[k] > 0.0) acc += mu_probs[k] * std::exp(scale * q_values[k] - mx);
  return (mx + std::log(acc)) / scale;
}

double check_decomposition(const std::vector<std::vector<double>>& q_locals,
                           const std::vector<double>& v_locals, const std::vector<double>& w,
                           double b, const std::vector<std::vector<double>>& mu_locals,
                           double alpha) {
  const int n = static_cast<int>(q_locals.size());
  if (n < 1 || v_locals.size() != q_locals.size() || w.size() != q_locals.size() ||
      mu_locals.size() != q_locals.size())
    throw ShapeError("check_decomposition: per-agent arrays disagree");
  const int A = static_cast<int>(q_locals[0].size());
  double joint = 1.0;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(q_locals[i].size()) != A ||
        static_cast<int>(mu_locals[i].size()) != A)
      throw ShapeError("check_decomposition: action counts disagree");
    joint *= A;
    if (joint > kJointCap) throw ParamError("check_decomposition: joint space exceeds cap");
    // each agent must satisfy the self-normalization condition
    double res = 0.0;
    for (int a = 0; a < A; ++a)
      res += mu_locals[i][a] * std::exp(w[i] * (q_locals[i][a] - v_locals[i]) / alpha);
    if (std::abs(res - 1.0) > 1e-6)
      throw PreconditionError("check_decomposition: agent " + std::to_string(i) +
                              " violates the normalization condition by " +
                              std::to_string(std::abs(res - 1.0)));
  }

  const int J = static_cast<int>(joint);
  double sum = 0.0;
  double max_mismatch = 0.0;
  std::vector<int> a(n, 0);
  for (int idx = 0; idx < J; ++idx) {
    int rem = idx;
    for (int i = n - 1; i >= 0; --i) {
      a[i] = rem % A;
      rem /= A;
    }
    double prod = 1.0, mu_tot = 1.0, q_tot = b, v_tot = b;
    for (int i = 0; i < n; ++i) {
      prod *= mu_locals[i][a[i]] *
              std::exp(w[i] * (q_locals[i][a[i]] - v_locals[i]) / alpha);
      mu_tot *= mu_locals[i][a[i]];
      q_tot += w[i] * q_locals[i][a[i]];
      v_tot += w[i] * v_locals[i];
    }
    sum += prod;
    const double global_form = mu_tot * std::exp((q_tot - v_tot) / alpha);
    max_mismatch = std::max(max_mismatch, std::abs(prod - global_form));
  }
  if (max_mismatch > 1e-10)
    throw NumericError("check_decomposition: product policy deviates from the global form by " +
                       std::to_string(max_mismatch));
  return std::abs(sum - 1.0);
}

// Gaussian elimination with partial pivoting; desk-scale systems only.
static std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> c) {
  const int n = static_cast<int>(c.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int row = col + 1; row < n; ++row)
      if (std::abs(a[row][col]) > std::abs(a[piv][col])) piv = row;
    std::swap(a[piv], a[col]);
    std::swap(c[piv], c[col]);
    if (std::abs(a[col][col]) < 1e-14)
      throw NumericError("regularized_return: singular evaluation system");
    for (int row = col + 1; row < n; ++row) {
      const double f = a[row][col] / a[col][col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) a[row][k] -= f * a[col][k];
      c[row] -= f * c[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int row = n - 1; row >= 0; --row) {
    double acc = c[row];
    for (int k = row + 1; k < n; ++k) acc -= a[row][k] * x[k];
    x[row] = acc / a[row][row];
  }
  return x;
}

double regularized_return(const JointPolicy& pi, const TabularMDP& mdp, const JointPolicy& mu,
                          double alpha, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw ParamError("regularized_return: gamma outside [0,1)");
  check_mdp_and_policy(mdp, pi, "pi", 1e-9);
  check_mdp_and_policy(mdp, mu, "mu", 1e-9);
  const int J = mdp.joint_action_count();

  std::vector<int> idx_of(mdp.n_states, -1);
  std::vector<int> states;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.terminal[s]) {
      idx_of[s] = static_cast<int>(states.size());
      states.push_back(s);
    }
  const int n = static_cast<int>(states.size());
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> c(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const int s = states[k];
    a[k][k] += 1.0;
    for (int j = 0; j < J; ++j) {
      const double p = pi[s][j];
      if (p == 0.0) continue;
      if (mu[s][j] == 0.0)
        throw DivergentKlError("regularized_return: pi puts mass on action " +
                               std::to_string(j) + " at state " + std::to_string(s) +
                               " where mu has none");
      c[k] += p * (mdp.r(s, j) - alpha * std::log(p / mu[s][j]));
      for (int sp = 0; sp < mdp.n_states; ++sp) {
        const double tr = mdp.p(s, j, sp);
        if (tr > 0.0 && idx_of[sp] >= 0) a[k][idx_of[sp]] -= gamma * p * tr;
      }
    }
  }
  const std::vector<double> sol = solve_linear(std::move(a), std::move(c));
  double value = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.initial[s] > 0.0 && idx_of[s] >= 0) value += mdp.initial[s] * sol[idx_of[s]];
  return value;
}

JointPolicy behavior_joint(const TabularMDP& mdp, const BehaviorPolicy& policy) {
  if (static_cast<int>(policy.tables.size()) != mdp.n_agents)
    throw ShapeError("behavior_joint: agent count mismatch");
  const int J = mdp.joint_action_count();
  if (J > kJointCap) throw ParamError("behavior_joint: joint space exceeds cap");
  JointPolicy mu(mdp.n_states, std::vector<double>(J, 0.0));
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int j = 0; j < J; ++j) {
      const JointAction a = mdp.decode_joint(j);
      double p = 1.0;
      for (int i = 0; i < mdp.n_agents; ++i)
        p *= policy.row(i, mdp.observations[s][i])[a[i]];
      mu[s][j] = p;
    }
  }
  return mu;
}

std::vector<double> kl_per_state(const JointPolicy& pi, const JointPolicy& mu) {
  if (pi.size() != mu.size()) throw ShapeError("kl_per_state: state counts disagree");
  std::vector<double> kl(pi.size(), 0.0);
  for (size_t s = 0; s < pi.size(); ++s) {
    if (pi[s].size() != mu[s].size()) throw ShapeError("kl_per_state: row widths disagree");
    double acc = 0.0;
    for (size_t a = 0; a < pi[s].size(); ++a) {
      if (pi[s][a] == 0.0) continue;
      if (mu[s][a] == 0.0) throw DivergentKlError("kl_per_state: support violation");
      acc += pi[s][a] * std::log(pi[s][a] / mu[s][a]);
    }
    kl[s] = acc;
  }
  return kl;
}

}  // namespace omiga
