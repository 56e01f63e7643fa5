#include "hiddenvi/experiments.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>

#include "hiddenvi/counterexample.hpp"
#include "hiddenvi/csv.hpp"
#include "hiddenvi/driver.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/rl_pbe.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

using nlohmann::json;

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog = {
      {"counterexample", "-",
       "biased-direction divergence on the bilinear game despite alpha-descent"},
      {"pennies", "1", "hidden matching pennies: GN/DGN/LM/GD on the surrogate"},
      {"rps", "2", "hidden rock-paper-scissors over two simplices"},
      {"pbe-linear", "3", "linear value prediction: surrogate GD vs preconditioned TD update"},
      {"pbe-nonlinear", "4-5", "nonlinear value prediction on a Garnet MDP"},
      {"stochastic-audit", "-", "noisy-operator contraction audit with plateau bound"},
      {"quasi-fejer", "-", "contraction iterates with injected, decaying errors"},
  };
  return catalog;
}

namespace {

const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& e : experiment_catalog())
    if (e.name == name) return &e;
  return nullptr;
}

json merged_defaults(const std::string& experiment, json params) {
  json def;
  if (experiment == "counterexample") {
    def = {{"eta", 0.1}, {"steps", 2000}, {"z0", json::array({1.0, 0.0})}};
  } else if (experiment == "pennies") {
    def = {{"eta", 0.1},
           {"t_outer", 10000},
           {"a11", 0.5},
           {"a21", 1.0},
           {"a12", 0.7},
           {"a22", 1.0},
           {"theta_init", json::array({1.25, 2.25})},
           {"randomize", false},
           {"solver", json{{"kind", "gn"}}}};
  } else if (experiment == "rps") {
    def = {{"eta", 0.1},
           {"t_outer", 20000},
           {"randomize", true},
           {"solver", json{{"kind", "gn"}}}};
  } else if (experiment == "pbe-linear") {
    def = {{"n", 100},       {"hold", 0.95},          {"d", 10},
           {"gamma", 0.95},  {"t_outer", 300},        {"samples_per_iter", 50},
           {"warmup", 1000}, {"inner_steps", 5},      {"lr", 0.0},
           {"ridge", 0.0},   {"chain_seed", 7},       {"phi_seed", 11}};
  } else if (experiment == "pbe-nonlinear") {
    def = {{"algorithm", "inner"}, {"n_states", 50},   {"branching", 5},
           {"feature_dim", 8},     {"gamma", 0.9},     {"mdp_seed", 3},
           {"hidden", 32},         {"batch", 64},      {"inner_steps", 10},
           {"t_outer", 300},       {"buffer_k", 4},    {"lr", 0.05},
           {"alpha", 0.5},         {"use_adamw", false}, {"rollouts", 100},
           {"oracle_seed", 17}};
  } else if (experiment == "stochastic-audit") {
    def = {{"n", 2},          {"eta", 0.05},      {"alpha", 0.0}, {"c", 2.0},
           {"sigma", 1.0},    {"audit_seeds", 1000}, {"t_outer", 400}};
  } else if (experiment == "quasi-fejer") {
    def = {{"eta", 0.05}, {"t_outer", 10000}, {"schedule", "decaying"}, {"coef", 0.5}};
  }
  def.merge_patch(params);
  return def;
}

InnerStrategy parse_solver(const json& j) {
  InnerStrategy st;
  const std::string kind = j.value("kind", "gn");
  if (kind == "gd")
    st.kind = InnerStrategy::Kind::GD;
  else if (kind == "gn")
    st.kind = InnerStrategy::Kind::GN;
  else if (kind == "dgn")
    st.kind = InnerStrategy::Kind::DGN;
  else if (kind == "lm")
    st.kind = InnerStrategy::Kind::LM;
  else if (kind == "adamw")
    st.kind = InnerStrategy::Kind::AdamW;
  else
    throw ConfigError("unknown solver kind: " + kind);

  st.lr = j.value("lr", 1.0);
  st.eta_gn = j.value("eta_gn", 1.0);
  st.lambda = j.value("lambda", 1e-3);
  st.pinv_tol = j.value("pinv_tol", 1e-12);
  if (j.contains("adamw")) {
    const json& a = j["adamw"];
    st.adamw.lr = a.value("lr", st.adamw.lr);
    st.adamw.beta1 = a.value("beta1", st.adamw.beta1);
    st.adamw.beta2 = a.value("beta2", st.adamw.beta2);
    st.adamw.eps = a.value("eps", st.adamw.eps);
    st.adamw.weight_decay = a.value("weight_decay", st.adamw.weight_decay);
  }
  if (st.lr <= 0.0) throw ConfigError("solver lr must be positive");
  if (st.eta_gn <= 0.0 || st.eta_gn > 1.0) throw ConfigError("solver eta_gn must be in (0, 1]");
  if (st.lambda <= 0.0) throw ConfigError("solver lambda must be positive");

  const json stop = j.value("stop", json{{"kind", "fixed"}, {"m", 1}});
  const std::string sk = stop.value("kind", "fixed");
  if (sk == "fixed") {
    const std::size_t m = stop.value("m", 1);
    if (m < 1) throw ConfigError("fixed-step count must be >= 1");
    st.stop = InnerStop::fixed(m);
  } else if (sk == "alpha") {
    AlphaRule rule;
    rule.alpha = stop.value("alpha", 0.5);
    rule.max_inner = stop.value("max_inner", 1000);
    const std::string lm = stop.value("lstar", "zero");
    rule.lstar_mode = lm == "exact" ? LstarMode::Exact : LstarMode::Zero;
    if (rule.alpha < 0.0 || rule.alpha >= 1.0) throw ConfigError("alpha must be in [0, 1)");
    st.stop = InnerStop::alpha(rule);
  } else {
    throw ConfigError("unknown stop kind: " + sk);
  }
  return st;
}

std::shared_ptr<const ProductModel> pennies_model(double a11, double a21, double a12, double a22) {
  std::vector<std::shared_ptr<const PredictionModel>> parts;
  parts.push_back(std::make_shared<ScalarSigmoidCelu>(a11, a21));
  parts.push_back(std::make_shared<ScalarSigmoidCelu>(a12, a22));
  return std::make_shared<ProductModel>(std::move(parts));
}

std::shared_ptr<const ProductModel> rps_model(Rng& rng) {
  auto random_layer = [&rng](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
  };
  std::vector<std::shared_ptr<const PredictionModel>> parts;
  parts.push_back(std::make_shared<SoftmaxMlp>(random_layer(4, 5), random_layer(3, 4)));
  parts.push_back(std::make_shared<SoftmaxMlp>(random_layer(4, 5), random_layer(3, 4)));
  return std::make_shared<ProductModel>(std::move(parts));
}

TrajectoryRecord run_counterexample(const json& p, std::uint64_t) {
  const CounterexampleSpec spec = CounterexampleSpec::make(p.at("eta").get<double>());
  Vector z0 = p.at("z0").get<Vector>();
  return run_divergence(spec, z0, p.at("steps").get<std::size_t>());
}

TrajectoryRecord run_pennies(const json& p, std::uint64_t seed, bool timing) {
  Rng rng(seed);
  double a11 = p.at("a11").get<double>(), a21 = p.at("a21").get<double>();
  double a12 = p.at("a12").get<double>(), a22 = p.at("a22").get<double>();
  Vector theta = p.at("theta_init").get<Vector>();
  if (p.at("randomize").get<bool>()) {
    theta = {rng.normal(0.0, 4.0), rng.normal(0.0, 4.0)};
    a11 = rng.uniform(-1.0, 1.0);
    a21 = rng.uniform(-1.0, 1.0);
    a12 = rng.uniform(-1.0, 1.0);
    a22 = rng.uniform(-1.0, 1.0);
  }
  OuterConfig cfg;
  cfg.eta = p.at("eta").get<double>();
  cfg.t_outer = p.at("t_outer").get<std::size_t>();
  cfg.strategy = parse_solver(p.at("solver"));
  cfg.seed = seed;
  cfg.measure_wall_time = timing;
  const PenniesOperator op;
  return run_outer(pennies_model(a11, a21, a12, a22), op, theta, cfg);
}

TrajectoryRecord run_rps(const json& p, std::uint64_t seed, bool timing) {
  Rng rng(seed);
  std::shared_ptr<const ProductModel> model;
  Vector theta(10, 0.0);
  if (p.at("randomize").get<bool>()) {
    model = rps_model(rng);
    for (double& v : theta) v = rng.normal();
  } else {
    // deterministic layers drawn from the fixed sub-seed, initial point at zero
    Rng fixed(mix_seed(0xA11CE, 0));
    model = rps_model(fixed);
  }
  OuterConfig cfg;
  cfg.eta = p.at("eta").get<double>();
  cfg.t_outer = p.at("t_outer").get<std::size_t>();
  cfg.strategy = parse_solver(p.at("solver"));
  cfg.seed = seed;
  cfg.measure_wall_time = timing;
  const RpsOperator op;
  return run_outer(model, op, theta, cfg);
}

TrajectoryRecord run_pbe_linear(const json& p, std::uint64_t seed) {
  const std::size_t n = p.at("n").get<std::size_t>();
  const std::size_t d = p.at("d").get<std::size_t>();
  const MarkovChain chain =
      make_slow_mixing_chain(n, p.at("hold").get<double>(),
                             p.at("chain_seed").get<std::uint64_t>(), p.at("gamma").get<double>());
  const FeatureMap phi = make_feature_map(n, d, p.at("phi_seed").get<std::uint64_t>());

  const std::size_t t_outer = p.at("t_outer").get<std::size_t>();
  const std::size_t per_iter = p.at("samples_per_iter").get<std::size_t>();
  const std::size_t warmup = p.at("warmup").get<std::size_t>();
  const std::size_t inner = p.at("inner_steps").get<std::size_t>();
  const double ridge = p.at("ridge").get<double>();
  double lr = p.at("lr").get<double>();

  Rng rng(seed);
  const std::size_t start = rng.uniform_index(n);
  // extra headroom so the warmup can extend until D_hat is positive definite
  const std::size_t horizon = warmup + 20 * n + t_outer * per_iter;
  const auto traj = simulate_trajectory(chain, start, horizon, rng.next_u64());

  EstimatorState est = EstimatorState::zero(n, d);
  std::size_t idx = 0;
  for (; idx < warmup; ++idx)
    est = update_estimators(est, phi, traj[idx].state, traj[idx].next_state, traj[idx].reward,
                            chain.gamma);
  Vector theta_bert(d, 0.0);
  for (;;) {
    try {
      bertsekas_update(theta_bert, est, ridge);
      break;
    } catch (const NotPositiveDefinite&) {
      if (idx + t_outer * per_iter >= traj.size())
        throw NumericalBlowup("pbe-linear: estimator matrix stayed singular");
      est = update_estimators(est, phi, traj[idx].state, traj[idx].next_state, traj[idx].reward,
                              chain.gamma);
      ++idx;
    }
  }

  Vector theta_gd(d, 0.0);
  TrajectoryRecord rec;
  rec.rows.reserve(t_outer);
  for (std::size_t t = 0; t < t_outer; ++t) {
    for (std::size_t k = 0; k < per_iter && idx < traj.size(); ++k, ++idx)
      est = update_estimators(est, phi, traj[idx].state, traj[idx].next_state, traj[idx].reward,
                              chain.gamma);
    const double step_lr = lr > 0.0 ? lr : 1.0 / std::max(operator_norm(est.d_hat), 1e-12);
    const double gap_before = norm(sub(theta_gd, theta_bert));
    theta_bert = bertsekas_update(theta_bert, est, ridge);
    theta_gd = surr_gd_linear(theta_gd, est, inner, step_lr);
    const double gap = norm(sub(theta_gd, theta_bert));

    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = gap * gap;
    row.loss_anchor = gap_before;
    row.loss_final = gap;
    row.loss_ratio = gap_before == 0.0 ? 0.0 : gap / gap_before;
    row.inner_steps = inner;
    row.grad_evals = inner;
    rec.rows.push_back(row);
  }
  rec.theta_final = theta_gd;
  rec.z_final = mat_vec(phi.phi, theta_gd);
  return rec;
}

TrajectoryRecord run_pbe_nonlinear(const json& p, std::uint64_t seed) {
  const SyntheticMdp mdp =
      make_garnet_mdp(p.at("n_states").get<std::size_t>(), p.at("branching").get<std::size_t>(),
                      p.at("feature_dim").get<std::size_t>(), p.at("gamma").get<double>(),
                      p.at("mdp_seed").get<std::uint64_t>());
  const MlpValueNet model(mdp.state_features, p.at("hidden").get<std::size_t>());

  NonlinearCfg cfg;
  cfg.batch = p.at("batch").get<std::size_t>();
  cfg.inner_steps = p.at("inner_steps").get<std::size_t>();
  cfg.t_outer = p.at("t_outer").get<std::size_t>();
  cfg.buffer_k = p.at("buffer_k").get<std::size_t>();
  cfg.lr = p.at("lr").get<double>();
  cfg.alpha = p.at("alpha").get<double>();
  cfg.use_adamw = p.at("use_adamw").get<bool>();
  cfg.seed = seed;

  cfg.eval_states.resize(mdp.chain.n());
  for (std::size_t i = 0; i < cfg.eval_states.size(); ++i) cfg.eval_states[i] = i;
  cfg.eval_targets = mc_value_oracle(mdp, cfg.eval_states, p.at("rollouts").get<std::size_t>(),
                                     horizon_for(mdp.chain.gamma),
                                     p.at("oracle_seed").get<std::uint64_t>());

  Rng init_rng(mix_seed(seed, 0xD1));
  const Vector theta0 = model.init_theta(init_rng);

  const std::string alg = p.at("algorithm").get<std::string>();
  if (alg == "td0") return td0_batch(model, mdp, theta0, cfg);
  if (alg == "inner") return alg2_inner(model, mdp, theta0, cfg);
  if (alg == "double-sampling") return alg3_double_sampling(model, mdp, theta0, cfg);
  if (alg == "thresholded") return alg4_thresholded(model, mdp, theta0, cfg);
  throw ConfigError("unknown pbe-nonlinear algorithm: " + alg);
}

TrajectoryRecord run_stochastic_audit(const json& p, std::uint64_t seed) {
  const std::size_t n = p.at("n").get<std::size_t>();
  const AffineOperator op(Matrix::identity(n), Vector(n, 0.0), DomainSpec::all_space(n));
  const StochasticAuditSummary s = stochastic_audit(
      op, p.at("eta").get<double>(), p.at("alpha").get<double>(), p.at("c").get<double>(),
      p.at("sigma").get<double>(), p.at("audit_seeds").get<std::size_t>(),
      p.at("t_outer").get<std::size_t>(), seed);
  TrajectoryRecord rec;
  rec.rows.reserve(s.mean_half_dist_sq.size());
  for (std::size_t t = 0; t < s.mean_half_dist_sq.size(); ++t) {
    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = s.mean_half_dist_sq[t];
    row.loss_anchor = s.mean_half_dist_sq[t];
    row.loss_final = t + 1 < s.mean_half_dist_sq.size() ? s.mean_half_dist_sq[t + 1] : 0.0;
    row.loss_ratio = row.loss_anchor == 0.0 ? 0.0 : row.loss_final / row.loss_anchor;
    rec.rows.push_back(row);
  }
  return rec;
}

TrajectoryRecord run_quasi_fejer(const json& p, std::uint64_t seed) {
  const std::size_t t_outer = p.at("t_outer").get<std::size_t>();
  const double coef = p.at("coef").get<double>();
  const std::string schedule = p.at("schedule").get<std::string>();
  std::vector<double> eps(t_outer);
  for (std::size_t t = 0; t < t_outer; ++t) {
    if (schedule == "decaying")
      eps[t] = coef / (static_cast<double>(t + 1) * static_cast<double>(t + 1));
    else if (schedule == "constant")
      eps[t] = coef;
    else if (schedule == "zero")
      eps[t] = 0.0;
    else
      throw ConfigError("unknown quasi-fejer schedule: " + schedule);
  }
  const PenniesOperator pennies;
  const AffineOperator op(pennies.b_matrix(), pennies.center(),
                          DomainSpec::all_space(pennies.dim()));
  return quasi_fejer_run(op, p.at("eta").get<double>(), eps, t_outer, seed);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  if (!j.contains("experiment")) throw ConfigError("config is missing 'experiment'");
  cfg.experiment = j.at("experiment").get<std::string>();
  if (find_experiment(cfg.experiment) == nullptr)
    throw ConfigError("unknown experiment: " + cfg.experiment);
  cfg.seeds = j.value("seeds", 1);
  if (cfg.seeds < 1) throw ConfigError("seeds must be >= 1");
  cfg.master_seed = j.value("master_seed", 12345ULL);
  cfg.out_dir = j.value("out", std::string("out/") + cfg.experiment);
  cfg.threads = j.value("threads", 1);
  if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
  cfg.timing = j.value("timing", false);
  cfg.params = merged_defaults(cfg.experiment, j.value("params", json::object()));

  // run one validation pass over the numeric fields shared by most experiments
  if (cfg.params.contains("eta") && cfg.params["eta"].get<double>() <= 0.0)
    throw ConfigError("eta must be positive");
  if (cfg.params.contains("t_outer") && cfg.params["t_outer"].get<std::size_t>() < 1)
    throw ConfigError("t_outer must be >= 1");
  if (cfg.params.contains("solver")) parse_solver(cfg.params["solver"]);
  if (cfg.params.contains("alpha")) {
    const double a = cfg.params["alpha"].get<double>();
    if (a < 0.0 || a >= 1.0) throw ConfigError("alpha must be in [0, 1)");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

TrajectoryRecord run_experiment_once(const ExperimentConfig& cfg, std::size_t run_index) {
  const std::uint64_t seed = mix_seed(cfg.master_seed, run_index);
  const json& p = cfg.params;
  if (cfg.experiment == "counterexample") return run_counterexample(p, seed);
  if (cfg.experiment == "pennies") return run_pennies(p, seed, cfg.timing);
  if (cfg.experiment == "rps") return run_rps(p, seed, cfg.timing);
  if (cfg.experiment == "pbe-linear") return run_pbe_linear(p, seed);
  if (cfg.experiment == "pbe-nonlinear") return run_pbe_nonlinear(p, seed);
  if (cfg.experiment == "stochastic-audit") return run_stochastic_audit(p, seed);
  if (cfg.experiment == "quasi-fejer") return run_quasi_fejer(p, seed);
  throw ConfigError("unknown experiment: " + cfg.experiment);
}

RunSummary execute_experiment(const ExperimentConfig& cfg) {
  const auto tic = std::chrono::steady_clock::now();
  RunSummary out;
  out.runs.resize(cfg.seeds);

  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : 1;
  if (cfg.threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, cfg.seeds);

  auto work = [&](std::size_t idx) {
    try {
      out.runs[idx] = run_experiment_once(cfg, idx);
    } catch (const NumericalBlowup& e) {
      out.runs[idx].aborted = true;
      out.runs[idx].abort_reason = e.what();
    }
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.seeds; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t idx = next.fetch_add(1);
          if (idx >= cfg.seeds) return;
          work(idx);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const auto& r : out.runs)
    if (r.aborted) ++out.aborted_runs;
  out.wall_ms_total =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - tic).count();
  return out;
}

void write_outputs(const ExperimentConfig& cfg, const RunSummary& summary) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  for (std::size_t i = 0; i < summary.runs.size(); ++i)
    write_run_csv(cfg.out_dir + "/run_" + std::to_string(i) + ".csv", summary.runs[i]);
  write_aggregate_csv(cfg.out_dir + "/aggregate.csv", aggregate_records(summary.runs));

  json manifest;
  manifest["version"] = kVersion;
  manifest["experiment"] = cfg.experiment;
  manifest["config"] = cfg.raw;
  manifest["resolved_params"] = cfg.params;
  manifest["master_seed"] = cfg.master_seed;
  json seeds = json::array();
  for (std::size_t i = 0; i < summary.runs.size(); ++i) seeds.push_back(mix_seed(cfg.master_seed, i));
  manifest["derived_seeds"] = seeds;
  manifest["n_runs"] = summary.runs.size();
  manifest["aborted_runs"] = summary.aborted_runs;
  manifest["wall_ms_total"] = summary.wall_ms_total;

  std::ofstream f(cfg.out_dir + "/manifest.json", std::ios::binary);
  if (!f) throw ConfigError("cannot write manifest under " + cfg.out_dir);
  f << manifest.dump(2) << '\n';
}

}  // namespace hiddenvi
