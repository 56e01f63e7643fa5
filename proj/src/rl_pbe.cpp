#include "hiddenvi/rl_pbe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hiddenvi/csv.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

Vector stationary_distribution(const Matrix& p, double tol, std::size_t max_iters) {
  const std::size_t n = p.rows();
  if (p.cols() != n) throw DimensionMismatch("stationary_distribution: square matrix required");
  Vector x(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Vector px = tmat_vec(p, x);  // x^T P
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid += std::fabs(px[i] - x[i]);
    if (resid <= tol) return x;
    // lazy-chain step keeps periodic chains from oscillating
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 0.5 * (x[i] + px[i]);
      total += x[i];
    }
    for (double& v : x) v /= total;
  }
  throw NumericalBlowup("stationary_distribution: power iteration did not converge");
}

MarkovChain make_slow_mixing_chain(std::size_t n, double hold, std::uint64_t seed, double gamma) {
  if (n < 2) throw ConfigError("make_slow_mixing_chain: n >= 2 required");
  if (hold < 0.0 || hold >= 1.0) throw ConfigError("make_slow_mixing_chain: hold in [0, 1)");
  Rng rng(seed);
  MarkovChain mc;
  mc.gamma = gamma;
  mc.p = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = rng.uniform();
    mc.p(i, i) += hold;
    mc.p(i, (i + 1) % n) += (1.0 - hold) * q;
    mc.p(i, (i + n - 1) % n) += (1.0 - hold) * (1.0 - q);
  }
  mc.r.resize(n);
  for (double& v : mc.r) v = rng.uniform();
  mc.xi = stationary_distribution(mc.p);
  return mc;
}

double slem_estimate(const MarkovChain& mc, std::size_t iters, std::uint64_t seed) {
  const std::size_t n = mc.n();
  Rng rng(seed);
  Vector x(n);
  for (double& v : x) v = rng.normal();

  auto deflated = [&](const Vector& v) {
    // (P - 1 xi^T) v
    Vector out = mat_vec(mc.p, v);
    const double w = dot(mc.xi, v);
    for (double& o : out) o -= w;
    return out;
  };

  double log_growth = 0.0;
  std::size_t counted = 0;
  const std::size_t warmup = iters / 2;
  for (std::size_t it = 0; it < iters; ++it) {
    Vector y = deflated(x);
    const double ny = norm(y);
    if (ny == 0.0) return 0.0;
    if (it >= warmup) {
      log_growth += std::log(ny / norm(x));
      ++counted;
    }
    x = scale(y, 1.0 / ny);
  }
  return counted == 0 ? 0.0 : std::exp(log_growth / static_cast<double>(counted));
}

Vector bellman_apply(const MarkovChain& mc, const Vector& z) {
  if (z.size() != mc.n()) throw DimensionMismatch("bellman_apply: z length mismatch");
  return axpy(mc.r, mc.gamma, mat_vec(mc.p, z));
}

Vector pbe_operator(const MarkovChain& mc, const Vector& z) {
  const Vector tz = bellman_apply(mc, z);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = mc.xi[i] * (z[i] - tz[i]);
  return out;
}

LinearBellmanOperator make_bellman_operator(const MarkovChain& mc) {
  return LinearBellmanOperator(mc.xi, mc.p, mc.r, mc.gamma);
}

Vector true_values(const MarkovChain& mc) {
  Matrix a = sub(Matrix::identity(mc.n()), scale(mc.p, mc.gamma));
  return solve_lu(a, mc.r);
}

FeatureMap make_feature_map(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d > n) throw ConfigError("make_feature_map: d <= n required");
  Rng rng(seed);
  Matrix phi(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) phi(i, j) = rng.normal();
  // Gram-Schmidt on columns
  for (std::size_t j = 0; j < d; ++j) {
    Vector cj = phi.col(j);
    for (std::size_t k = 0; k < j; ++k) {
      const Vector ck = phi.col(k);
      const double proj = dot(cj, ck);
      for (std::size_t i = 0; i < n; ++i) cj[i] -= proj * ck[i];
    }
    const double nj = norm(cj);
    if (nj < 1e-12) throw NumericalBlowup("make_feature_map: degenerate random features");
    for (std::size_t i = 0; i < n; ++i) phi(i, j) = cj[i] / nj;
  }
  return {phi};
}

Vector exact_linear_fixed_point(const MarkovChain& mc, const FeatureMap& features) {
  const Matrix& phi = features.phi;
  if (phi.rows() != mc.n()) throw DimensionMismatch("exact_linear_fixed_point: feature rows");
  const std::size_t n = mc.n(), d = features.d();

  Matrix rhs_m(n, d);
  const Matrix pphi = mat_mul(mc.p, phi);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      rhs_m(i, j) = mc.xi[i] * (phi(i, j) - mc.gamma * pphi(i, j));
  const Matrix a = mat_mul(transpose(phi), rhs_m);

  Vector xir(n);
  for (std::size_t i = 0; i < n; ++i) xir[i] = mc.xi[i] * mc.r[i];
  const Vector b = tmat_vec(phi, xir);
  return solve_lu(a, b);
}

std::vector<Transition> simulate_trajectory(const MarkovChain& mc, std::size_t start_state,
                                            std::size_t length, std::uint64_t seed) {
  if (length < 1) throw ConfigError("simulate_trajectory: length >= 1 required");
  if (start_state >= mc.n()) throw ConfigError("simulate_trajectory: start state out of range");
  Rng rng(seed);
  std::vector<Transition> out;
  out.reserve(length);
  std::size_t s = start_state;
  for (std::size_t t = 0; t < length; ++t) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t next = mc.n() - 1;
    for (std::size_t j = 0; j < mc.n(); ++j) {
      acc += mc.p(s, j);
      if (u < acc) {
        next = j;
        break;
      }
    }
    out.push_back({s, mc.r[s], next});
    s = next;
  }
  return out;
}

EstimatorState EstimatorState::zero(std::size_t n_states, std::size_t d) {
  EstimatorState est;
  est.d_hat = Matrix(d, d);
  est.c_hat = Matrix(d, d);
  est.r_hat = Vector(d, 0.0);
  est.state_visits.assign(n_states, 0);
  est.transition_counts = Matrix(n_states, n_states);
  est.reward_sums = Vector(n_states, 0.0);
  return est;
}

EstimatorState update_estimators(EstimatorState est, const FeatureMap& features, std::size_t s,
                                 std::size_t s_next, double reward, double gamma) {
  const std::size_t d = features.d();
  if (est.d_hat.rows() != d) throw DimensionMismatch("update_estimators: feature dim mismatch");
  const Vector phi_s = features.features_of(s);
  const Vector phi_n = features.features_of(s_next);

  const double t_old = static_cast<double>(est.t);
  const double t_new = t_old + 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      est.d_hat(i, j) = (est.d_hat(i, j) * t_old + phi_s[i] * phi_s[j]) / t_new;
      est.c_hat(i, j) =
          (est.c_hat(i, j) * t_old + phi_s[i] * (phi_s[j] - gamma * phi_n[j])) / t_new;
    }
    est.r_hat[i] = (est.r_hat[i] * t_old + phi_s[i] * reward) / t_new;
  }
  est.t += 1;
  est.state_visits[s] += 1;
  est.transition_counts(s, s_next) += 1.0;
  est.reward_sums[s] += reward;
  return est;
}

RebuiltEstimators rebuild_from_counts(const EstimatorState& est, const FeatureMap& features,
                                      double gamma) {
  const std::size_t n = est.state_visits.size();
  const std::size_t d = features.d();
  const double t = static_cast<double>(est.t);
  RebuiltEstimators out;
  out.d = Matrix(d, d);
  out.c = Matrix(d, d);
  out.r = Vector(d, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double visits = static_cast<double>(est.state_visits[s]);
    if (visits == 0.0) continue;
    const double xi_hat = visits / t;
    const Vector phi_s = features.features_of(s);

    // empirical next-feature expectation under Pbar(s, .)
    Vector pbar_phi(d, 0.0);
    for (std::size_t sn = 0; sn < n; ++sn) {
      const double cnt = est.transition_counts(s, sn);
      if (cnt == 0.0) continue;
      const Vector phi_n = features.features_of(sn);
      for (std::size_t j = 0; j < d; ++j) pbar_phi[j] += (cnt / visits) * phi_n[j];
    }
    const double rbar = est.reward_sums[s] / visits;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        out.d(i, j) += xi_hat * phi_s[i] * phi_s[j];
        out.c(i, j) += xi_hat * phi_s[i] * (phi_s[j] - gamma * pbar_phi[j]);
      }
      out.r[i] += xi_hat * phi_s[i] * rbar;
    }
  }
  return out;
}

Vector bertsekas_update(const Vector& theta, const EstimatorState& est, double ridge) {
  if (est.t < 1) throw ConfigError("bertsekas_update: no samples folded in");
  Matrix a = est.d_hat;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += ridge;
  const Vector g = sub(mat_vec(est.c_hat, theta), est.r_hat);
  return sub(theta, solve_spd(a, g));
}

Vector stochastic_linear_surrogate_grad(const Vector& theta, const Vector& theta_t,
                                        const EstimatorState& est) {
  const Vector fixed = sub(mat_vec(est.c_hat, theta_t), est.r_hat);
  return add(fixed, mat_vec(est.d_hat, sub(theta, theta_t)));
}

Vector surr_gd_linear(const Vector& theta_t, const EstimatorState& est, std::size_t inner_steps,
                      double lr) {
  if (lr <= 0.0) throw ConfigError("surr_gd_linear: lr must be positive");
  Vector theta = theta_t;
  for (std::size_t m = 0; m < inner_steps; ++m) {
    const Vector g = stochastic_linear_surrogate_grad(theta, theta_t, est);
    if (!all_finite(g)) throw NumericalBlowup("surr_gd_linear: gradient diverged");
    theta = axpy(theta, -lr, g);
  }
  if (!all_finite(theta)) throw NumericalBlowup("surr_gd_linear: iterate diverged");
  return theta;
}

SyntheticMdp make_garnet_mdp(std::size_t n_states, std::size_t branching, std::size_t feature_dim,
                             double gamma, std::uint64_t seed) {
  if (branching == 0 || branching > n_states)
    throw ConfigError("make_garnet_mdp: branching in [1, n_states]");
  Rng rng(seed);
  SyntheticMdp mdp;
  mdp.branching = branching;
  mdp.chain.gamma = gamma;
  mdp.chain.p = Matrix(n_states, n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    // successor set always contains s+1 (mod n) so the chain is irreducible
    std::vector<std::size_t> targets{(s + 1) % n_states};
    while (targets.size() < branching) {
      const std::size_t cand = rng.uniform_index(n_states);
      if (std::find(targets.begin(), targets.end(), cand) == targets.end())
        targets.push_back(cand);
    }
    Vector w(targets.size());
    double total = 0.0;
    for (double& v : w) {
      v = -std::log(std::max(rng.uniform(), 1e-300));
      total += v;
    }
    for (std::size_t k = 0; k < targets.size(); ++k) mdp.chain.p(s, targets[k]) += w[k] / total;
  }
  mdp.chain.r.resize(n_states);
  for (double& v : mdp.chain.r) v = rng.uniform();
  mdp.chain.xi = stationary_distribution(mdp.chain.p);

  mdp.state_features = Matrix(n_states, feature_dim);
  for (std::size_t i = 0; i < n_states; ++i)
    for (std::size_t j = 0; j < feature_dim; ++j) mdp.state_features(i, j) = rng.normal();
  mdp.start_dist = Vector(n_states, 1.0 / static_cast<double>(n_states));
  return mdp;
}

std::size_t horizon_for(double gamma, double tail) {
  if (gamma <= 0.0) return 1;
  if (gamma >= 1.0) throw ConfigError("horizon_for: gamma < 1 required");
  return static_cast<std::size_t>(std::ceil(std::log(tail) / std::log(gamma)));
}

Vector mc_value_oracle(const SyntheticMdp& mdp, const std::vector<std::size_t>& states,
                       std::size_t rollouts, std::size_t horizon, std::uint64_t seed) {
  const MarkovChain& mc = mdp.chain;
  Rng rng(seed);
  Vector out(states.size(), 0.0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) {
      std::size_t s = states[k];
      double ret = 0.0, disc = 1.0;
      for (std::size_t h = 0; h < horizon; ++h) {
        ret += disc * mc.r[s];
        disc *= mc.gamma;
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t next = mc.n() - 1;
        for (std::size_t j = 0; j < mc.n(); ++j) {
          cum += mc.p(s, j);
          if (u < cum) {
            next = j;
            break;
          }
        }
        s = next;
      }
      acc += ret;
    }
    out[k] = acc / static_cast<double>(rollouts);
  }
  return out;
}

namespace {

std::size_t sample_start(const Vector& dist, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    cum += dist[i];
    if (u < cum) return i;
  }
  return dist.size() - 1;
}

std::vector<Transition> collect_batch(const MarkovChain& mc, Rng& rng, std::size_t& cur,
                                      std::size_t n) {
  std::vector<Transition> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t next = mc.n() - 1;
    for (std::size_t j = 0; j < mc.n(); ++j) {
      cum += mc.p(cur, j);
      if (u < cum) {
        next = j;
        break;
      }
    }
    batch.push_back({cur, mc.r[cur], next});
    cur = next;
  }
  return batch;
}

// Mean squared TD error on a batch with fixed targets, 1/(2N) scaling so the
// gradient is the displayed semi-gradient update.
class BatchTdObjective final : public ScalarObjective {
 public:
  BatchTdObjective(const PredictionModel& model, std::vector<std::size_t> states, Vector targets)
      : model_(model), states_(std::move(states)), targets_(std::move(targets)) {}

  std::size_t param_dim() const override { return model_.param_dim(); }

  double value(const Vector& theta) const override {
    const Vector v = model_.forward(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const double d = v[states_[i]] - targets_[i];
      s += d * d;
    }
    return 0.5 * s / static_cast<double>(states_.size());
  }

  Vector gradient(const Vector& theta) const override {
    const Vector v = model_.forward(theta);
    Vector w(model_.output_dim(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i)
      w[states_[i]] += inv_n * (v[states_[i]] - targets_[i]);
    return model_.vjp(theta, w);
  }

 private:
  const PredictionModel& model_;
  std::vector<std::size_t> states_;
  Vector targets_;
};

// Linearization over the fresh batch plus regularization over a buffer batch,
// both anchored at theta_t; 1/N scaling.
class DoubleSampleObjective final : public ScalarObjective {
 public:
  DoubleSampleObjective(const PredictionModel& model, const std::vector<std::size_t>& lin_states,
                        const Vector& f_hat, const std::vector<std::size_t>& reg_states,
                        const Vector& anchor)
      : model_(model),
        lin_states_(lin_states),
        f_hat_(f_hat),
        reg_states_(reg_states),
        anchor_(anchor) {}

  std::size_t param_dim() const override { return model_.param_dim(); }

  double value(const Vector& theta) const override {
    const Vector v = model_.forward(theta);
    double lin = 0.0;
    for (std::size_t i = 0; i < lin_states_.size(); ++i)
      lin += f_hat_[i] * (v[lin_states_[i]] - anchor_[lin_states_[i]]);
    double reg = 0.0;
    for (std::size_t s : reg_states_) {
      const double d = v[s] - anchor_[s];
      reg += 0.5 * d * d;
    }
    return (lin + reg) / static_cast<double>(lin_states_.size());
  }

  Vector gradient(const Vector& theta) const override {
    const Vector v = model_.forward(theta);
    Vector w(model_.output_dim(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(lin_states_.size());
    for (std::size_t i = 0; i < lin_states_.size(); ++i) w[lin_states_[i]] += inv_n * f_hat_[i];
    for (std::size_t s : reg_states_) w[s] += inv_n * (v[s] - anchor_[s]);
    return model_.vjp(theta, w);
  }

 private:
  const PredictionModel& model_;
  const std::vector<std::size_t>& lin_states_;
  const Vector& f_hat_;
  const std::vector<std::size_t>& reg_states_;
  const Vector& anchor_;
};

double eval_error(const PredictionModel& model, const Vector& theta, const NonlinearCfg& cfg) {
  if (!cfg.eval_targets || cfg.eval_states.empty()) return 0.0;
  const Vector v = model.forward(theta);
  double s = 0.0;
  for (std::size_t k = 0; k < cfg.eval_states.size(); ++k) {
    const double d = v[cfg.eval_states[k]] - (*cfg.eval_targets)[k];
    s += d * d;
  }
  return s / static_cast<double>(cfg.eval_states.size());
}

std::vector<std::size_t> batch_states(const std::vector<Transition>& batch) {
  std::vector<std::size_t> s(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) s[i] = batch[i].state;
  return s;
}

Vector td_targets(const std::vector<Transition>& batch, const Vector& v_anchor, double gamma) {
  Vector y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    y[i] = batch[i].reward + gamma * v_anchor[batch[i].next_state];
  return y;
}

}  // namespace

TrajectoryRecord td0_batch(const PredictionModel& model, const SyntheticMdp& mdp,
                           const Vector& theta0, const NonlinearCfg& cfg) {
  if (cfg.batch < 1) throw ConfigError("td0_batch: batch >= 1 required");
  Rng rng(cfg.seed);
  std::size_t cur = sample_start(mdp.start_dist, rng);
  Vector theta = theta0;

  TrajectoryRecord rec;
  rec.rows.reserve(cfg.t_outer);
  for (std::size_t t = 0; t < cfg.t_outer; ++t) {
    const auto batch = collect_batch(mdp.chain, rng, cur, cfg.batch);
    const Vector v_anchor = model.forward(theta);
    const Vector y = td_targets(batch, v_anchor, mdp.chain.gamma);

    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = eval_error(model, theta, cfg);

    // direct semi-gradient accumulation, one per-sample gradient at a time
    Vector step(theta.size(), 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double delta = v_anchor[batch[i].state] - y[i];
      loss += 0.5 * inv_n * delta * delta;
      const Vector g = model.output_gradient(theta, batch[i].state);
      for (std::size_t k = 0; k < theta.size(); ++k) step[k] += inv_n * delta * g[k];
    }
    theta = axpy(theta, -cfg.lr, step);
    if (!all_finite(theta)) {
      rec.aborted = true;
      rec.abort_reason = "td0_batch: parameters diverged";
      break;
    }

    row.loss_anchor = loss;
    const BatchTdObjective obj(model, batch_states(batch), y);
    row.loss_final = obj.value(theta);
    row.loss_ratio = loss == 0.0 ? 0.0 : row.loss_final / loss;
    row.inner_steps = 1;
    row.grad_evals = 1;
    rec.rows.push_back(row);
  }
  rec.theta_final = theta;
  rec.z_final = model.forward(theta);
  return rec;
}

namespace {

TrajectoryRecord run_td_surrogate(const PredictionModel& model, const SyntheticMdp& mdp,
                                  const Vector& theta0, const NonlinearCfg& cfg,
                                  bool thresholded) {
  if (cfg.batch < 1) throw ConfigError("surrogate TD: batch >= 1 required");
  Rng rng(cfg.seed);
  std::size_t cur = sample_start(mdp.start_dist, rng);
  Vector theta = theta0;

  TrajectoryRecord rec;
  rec.rows.reserve(cfg.t_outer);
  for (std::size_t t = 0; t < cfg.t_outer; ++t) {
    const auto batch = collect_batch(mdp.chain, rng, cur, cfg.batch);
    const Vector v_anchor = model.forward(theta);
    const Vector y = td_targets(batch, v_anchor, mdp.chain.gamma);
    const BatchTdObjective obj(model, batch_states(batch), y);

    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = eval_error(model, theta, cfg);
    const double anchor_loss = obj.value(theta);
    row.loss_anchor = anchor_loss;

    AdamState adam = AdamState::zero(theta.size());
    double loss = anchor_loss;
    std::size_t steps = 0;
    const double alpha_sq = cfg.alpha * cfg.alpha;
    while (steps < cfg.inner_steps) {
      if (thresholded && anchor_loss > 0.0 && loss / anchor_loss < alpha_sq) break;
      if (thresholded && anchor_loss == 0.0) break;
      if (cfg.use_adamw) {
        auto [next, ns] = adamw_step(obj, theta, std::move(adam), cfg.adamw);
        theta = std::move(next);
        adam = std::move(ns);
      } else {
        theta = gd_step(obj, theta, cfg.lr);
      }
      ++steps;
      loss = obj.value(theta);
      if (!std::isfinite(loss)) throw NumericalBlowup("surrogate TD: loss diverged");
    }

    row.loss_final = loss;
    row.loss_ratio = anchor_loss == 0.0 ? 0.0 : loss / anchor_loss;
    row.inner_steps = steps;
    row.grad_evals = steps;
    row.alpha_flag = thresholded && steps == cfg.inner_steps && anchor_loss > 0.0 &&
                     loss / anchor_loss >= alpha_sq;
    rec.rows.push_back(row);
  }
  rec.theta_final = theta;
  rec.z_final = model.forward(theta);
  return rec;
}

}  // namespace

TrajectoryRecord alg2_inner(const PredictionModel& model, const SyntheticMdp& mdp,
                            const Vector& theta0, const NonlinearCfg& cfg) {
  return run_td_surrogate(model, mdp, theta0, cfg, /*thresholded=*/false);
}

TrajectoryRecord alg4_thresholded(const PredictionModel& model, const SyntheticMdp& mdp,
                                  const Vector& theta0, const NonlinearCfg& cfg) {
  return run_td_surrogate(model, mdp, theta0, cfg, /*thresholded=*/true);
}

TrajectoryRecord alg3_double_sampling(const PredictionModel& model, const SyntheticMdp& mdp,
                                      const Vector& theta0, const NonlinearCfg& cfg) {
  if (cfg.batch < 1) throw ConfigError("alg3_double_sampling: batch >= 1 required");
  if (cfg.buffer_k < 1) throw ConfigError("alg3_double_sampling: buffer size >= 1 required");
  Rng rng(cfg.seed);
  std::size_t cur = sample_start(mdp.start_dist, rng);

  std::vector<std::vector<std::size_t>> buffer;
  buffer.reserve(cfg.buffer_k);
  for (std::size_t k = 0; k < cfg.buffer_k; ++k)
    buffer.push_back(batch_states(collect_batch(mdp.chain, rng, cur, cfg.batch)));

  Vector theta = theta0;
  TrajectoryRecord rec;
  rec.rows.reserve(cfg.t_outer);
  for (std::size_t t = 0; t < cfg.t_outer; ++t) {
    const auto batch = collect_batch(mdp.chain, rng, cur, cfg.batch);
    const Vector v_anchor = model.forward(theta);
    const Vector y = td_targets(batch, v_anchor, mdp.chain.gamma);
    const std::vector<std::size_t> lin_states = batch_states(batch);

    // TD errors at the anchor play the role of the sampled operator values
    Vector f_hat(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) f_hat[i] = v_anchor[batch[i].state] - y[i];

    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = eval_error(model, theta, cfg);

    AdamState adam = AdamState::zero(theta.size());
    double anchor_loss = 0.0, loss = 0.0;
    for (std::size_t m = 0; m < cfg.inner_steps; ++m) {
      const DoubleSampleObjective obj(model, lin_states, f_hat, buffer[m % cfg.buffer_k],
                                      v_anchor);
      if (m == 0) anchor_loss = obj.value(theta);
      if (cfg.use_adamw) {
        auto [next, ns] = adamw_step(obj, theta, std::move(adam), cfg.adamw);
        theta = std::move(next);
        adam = std::move(ns);
      } else {
        theta = gd_step(obj, theta, cfg.lr);
      }
      loss = obj.value(theta);
      if (!std::isfinite(loss)) throw NumericalBlowup("alg3_double_sampling: loss diverged");
    }

    row.loss_anchor = anchor_loss;
    row.loss_final = loss;
    row.loss_ratio = anchor_loss == 0.0 ? 0.0 : loss / anchor_loss;
    row.inner_steps = cfg.inner_steps;
    row.grad_evals = cfg.inner_steps;
    rec.rows.push_back(row);
  }
  rec.theta_final = theta;
  rec.z_final = model.forward(theta);
  return rec;
}

double be_hat(const PredictionModel& model, const std::vector<Transition>& dataset,
              const Vector& theta_pred, const Vector& theta_target, double gamma) {
  if (dataset.empty()) throw ConfigError("be_hat: empty dataset");
  const Vector v_pred = model.forward(theta_pred);
  const Vector v_tgt = model.forward(theta_target);
  double s = 0.0;
  for (const Transition& tr : dataset) {
    const double d = v_pred[tr.state] - (tr.reward + gamma * v_tgt[tr.next_state]);
    s += d * d;
  }
  return s / static_cast<double>(dataset.size());
}

double be_gap_hat(const PredictionModel& model, const std::vector<Transition>& dataset,
                  const Vector& theta, const BeGapCfg& cfg) {
  if (dataset.empty()) throw ConfigError("be_gap_hat: empty dataset");
  const Vector v_tgt = model.forward(theta);
  Vector targets(dataset.size());
  std::vector<std::size_t> states(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    targets[i] = dataset[i].reward + cfg.gamma * v_tgt[dataset[i].next_state];
    states[i] = dataset[i].state;
  }
  // the TD-error regression objective is 1/(2N) of the displayed square; track
  // the raw mean square for the reported gap
  const BatchTdObjective obj(model, states, targets);

  const double base = 2.0 * obj.value(theta);
  double best = base;
  Vector cur = theta;
  AdamState adam = AdamState::zero(theta.size());
  AdamWParams hyper = cfg.adamw;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    auto [next, ns] = adamw_step(obj, cur, std::move(adam), hyper);
    cur = std::move(next);
    adam = std::move(ns);
    hyper.lr *= cfg.lr_decay;
    best = std::min(best, 2.0 * obj.value(cur));
  }
  return std::max(0.0, base - best);
}

void dump_dataset_csv(const std::string& path, const std::vector<Transition>& dataset) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("dump_dataset_csv: cannot open " + path);
  f << "step,state,reward,next_state\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    f << i << ',' << dataset[i].state << ',' << format_g17(dataset[i].reward) << ','
      << dataset[i].next_state << '\n';
  }
}

std::vector<Transition> load_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("load_dataset_csv: cannot open " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<Transition> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Transition tr;
    std::getline(ss, cell, ',');  // step
    std::getline(ss, cell, ',');
    tr.state = std::stoul(cell);
    std::getline(ss, cell, ',');
    tr.reward = std::stod(cell);
    std::getline(ss, cell, ',');
    tr.next_state = std::stoul(cell);
    out.push_back(tr);
  }
  return out;
}

}  // namespace hiddenvi
