#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hiddenvi/models.hpp"
#include "hiddenvi/record.hpp"
#include "hiddenvi/solvers.hpp"
#include "hiddenvi/vi_problems.hpp"

namespace hiddenvi {

/// Markov reward process under a fixed policy: row-stochastic transition
/// matrix, expected reward per state, discount, stationary distribution.
struct MarkovChain {
  Matrix p;
  Vector r;
  double gamma = 0.95;
  Vector xi;

  std::size_t n() const { return r.size(); }
};

/// Power iteration on P^T until the stationary residual ||xi P - xi||_1 drops
/// below tol.
Vector stationary_distribution(const Matrix& p, double tol = 1e-12,
                               std::size_t max_iters = 5000000);

/// Ring random walk: every state self-loops with probability `hold` and
/// otherwise splits the remaining mass between its two ring neighbours at a
/// seeded random ratio. Rewards are uniform [0, 1].
MarkovChain make_slow_mixing_chain(std::size_t n = 100, double hold = 0.95,
                                   std::uint64_t seed = 0, double gamma = 0.95);

/// Geometric-growth estimate of the second-largest eigenvalue modulus,
/// obtained by power iteration on P deflated by its stationary pair.
double slem_estimate(const MarkovChain& mc, std::size_t iters = 2000, std::uint64_t seed = 1);

/// T(z) = r + gamma P z.
Vector bellman_apply(const MarkovChain& mc, const Vector& z);

/// F(z) = Xi (z - T(z)).
Vector pbe_operator(const MarkovChain& mc, const Vector& z);

LinearBellmanOperator make_bellman_operator(const MarkovChain& mc);

/// (I - gamma P)^{-1} r, the direct-solve value oracle.
Vector true_values(const MarkovChain& mc);

struct FeatureMap {
  Matrix phi;  // n x d, one feature row per state

  std::size_t n() const { return phi.rows(); }
  std::size_t d() const { return phi.cols(); }
  Vector features_of(std::size_t state) const { return phi.row(state); }
};

/// Seeded Gaussian features with orthonormalized columns.
FeatureMap make_feature_map(std::size_t n, std::size_t d, std::uint64_t seed);

/// theta* solving Phi^T Xi (Phi - gamma P Phi) theta = Phi^T Xi r, the
/// weighted-projection fixed point of the Bellman backup.
Vector exact_linear_fixed_point(const MarkovChain& mc, const FeatureMap& features);

struct Transition {
  std::size_t state = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
};

/// Seeded Markov sampling; the reward of a step is r(state).
std::vector<Transition> simulate_trajectory(const MarkovChain& mc, std::size_t start_state,
                                            std::size_t length, std::uint64_t seed);

/// Running trajectory estimators
///   D_t = mean phi(s_i) phi(s_i)^T
///   C_t = mean phi(s_i) (phi(s_i) - gamma phi(s_{i+1}))^T
///   r_t = mean phi(s_i) r_i
/// plus the visit tallies needed to rebuild them from empirical distributions.
struct EstimatorState {
  Matrix d_hat, c_hat;
  Vector r_hat;
  std::size_t t = 0;
  std::vector<std::size_t> state_visits;  // visits as the anchor state
  Matrix transition_counts;               // n(s, s')
  Vector reward_sums;                     // per anchor state

  static EstimatorState zero(std::size_t n_states, std::size_t d);
};

EstimatorState update_estimators(EstimatorState est, const FeatureMap& features, std::size_t s,
                                 std::size_t s_next, double reward, double gamma);

/// The same three estimators rebuilt from visit counts through the empirical
/// distribution: D = Phi^T Xi_hat Phi, C = Phi^T Xi_hat (Phi - gamma Pbar Phi),
/// r = Phi^T Xi_hat rbar.
struct RebuiltEstimators {
  Matrix d, c;
  Vector r;
};
RebuiltEstimators rebuild_from_counts(const EstimatorState& est, const FeatureMap& features,
                                      double gamma);

/// theta - (D + ridge I)^{-1} (C theta - r). The preconditioned TD update.
Vector bertsekas_update(const Vector& theta, const EstimatorState& est, double ridge = 0.0);

/// C theta_t - r + D (theta - theta_t): gradient of the trajectory-weighted
/// least-squares surrogate anchored at theta_t.
Vector stochastic_linear_surrogate_grad(const Vector& theta, const Vector& theta_t,
                                        const EstimatorState& est);

/// inner_steps plain gradient steps on that surrogate, started at the anchor.
Vector surr_gd_linear(const Vector& theta_t, const EstimatorState& est, std::size_t inner_steps,
                      double lr);

/// Finite MDP with a fixed behaviour policy folded into the transitions, a
/// feature vector per state, and a start distribution. Stand-in environment
/// for the nonlinear value-prediction experiments.
struct SyntheticMdp {
  MarkovChain chain;
  Matrix state_features;  // n x feature_dim
  Vector start_dist;
  std::size_t branching = 5;
};

SyntheticMdp make_garnet_mdp(std::size_t n_states = 50, std::size_t branching = 5,
                             std::size_t feature_dim = 8, double gamma = 0.9,
                             std::uint64_t seed = 0);

/// Smallest horizon with gamma^horizon <= tail.
std::size_t horizon_for(double gamma, double tail = 1e-6);

/// Average discounted return over seeded rollouts, per requested state.
Vector mc_value_oracle(const SyntheticMdp& mdp, const std::vector<std::size_t>& states,
                       std::size_t rollouts, std::size_t horizon, std::uint64_t seed);

/// Configuration shared by the nonlinear value-prediction algorithms.
struct NonlinearCfg {
  std::size_t batch = 64;
  std::size_t inner_steps = 10;
  std::size_t t_outer = 300;
  std::size_t buffer_k = 4;  // double-sampling buffer size
  double lr = 0.05;
  double alpha = 0.5;  // thresholded variant
  bool use_adamw = false;
  AdamWParams adamw{};
  std::uint64_t seed = 0;
  /// When present, dist_sq records the mean squared prediction error against
  /// these targets on eval_states.
  std::optional<Vector> eval_targets;
  std::vector<std::size_t> eval_states;
};

/// One semi-gradient TD(0) batch update per outer iteration; the independent
/// reference implementation the surrogate variants are checked against.
TrajectoryRecord td0_batch(const PredictionModel& model, const SyntheticMdp& mdp,
                           const Vector& theta0, const NonlinearCfg& cfg);

/// Fixed TD targets per outer iteration, M optimizer steps on the batch mean
/// squared TD error. M = 1 with plain GD is exactly td0_batch.
TrajectoryRecord alg2_inner(const PredictionModel& model, const SyntheticMdp& mdp,
                            const Vector& theta0, const NonlinearCfg& cfg);

/// Linearization term from the fresh batch, regularization term from a
/// rotating buffer batch.
TrajectoryRecord alg3_double_sampling(const PredictionModel& model, const SyntheticMdp& mdp,
                                      const Vector& theta0, const NonlinearCfg& cfg);

/// Loss-ratio guard (l_star treated as 0) with a hard cap of inner_steps.
TrajectoryRecord alg4_thresholded(const PredictionModel& model, const SyntheticMdp& mdp,
                                  const Vector& theta0, const NonlinearCfg& cfg);

struct BeGapCfg {
  std::size_t steps = 500;
  AdamWParams adamw{1e-4, 0.9, 0.999, 1e-8, 0.0};
  double lr_decay = 0.995;  // exponential annealing per step
  double gamma = 0.9;
};

/// Empirical Bellman-gap estimate: BE(theta, theta) minus the approximate
/// infimum over the first argument, the latter by annealed AdamW started at
/// theta. Clamped at zero.
double be_gap_hat(const PredictionModel& model, const std::vector<Transition>& dataset,
                  const Vector& theta, const BeGapCfg& cfg = {});

/// Mean squared empirical Bellman error with targets r + gamma v_target(s').
double be_hat(const PredictionModel& model, const std::vector<Transition>& dataset,
              const Vector& theta_pred, const Vector& theta_target, double gamma);

void dump_dataset_csv(const std::string& path, const std::vector<Transition>& dataset);
std::vector<Transition> load_dataset_csv(const std::string& path);

}  // namespace hiddenvi
