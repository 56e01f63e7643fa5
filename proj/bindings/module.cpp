#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "hiddenvi/counterexample.hpp"
#include "hiddenvi/driver.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/experiments.hpp"
#include "hiddenvi/rl_pbe.hpp"
#include "hiddenvi/rng.hpp"
#include "hiddenvi/verify.hpp"

namespace py = pybind11;
using namespace hiddenvi;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows[0].size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw DimensionMismatch("ragged rows");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) rows[i] = m.row(i);
  return rows;
}

py::dict row_to_dict(const TrajectoryRow& row) {
  py::dict d;
  d["iter"] = row.iter;
  d["dist_sq"] = row.dist_sq;
  d["loss_anchor"] = row.loss_anchor;
  d["loss_final"] = row.loss_final;
  d["loss_ratio"] = row.loss_ratio;
  d["inner_steps"] = row.inner_steps;
  d["grad_evals"] = row.grad_evals;
  d["alpha_flag"] = row.alpha_flag;
  d["wall_ms"] = row.wall_ms;
  return d;
}

py::dict record_to_dict(const TrajectoryRecord& rec) {
  py::dict d;
  py::list rows;
  for (const TrajectoryRow& row : rec.rows) rows.append(row_to_dict(row));
  d["rows"] = rows;
  d["theta_final"] = rec.theta_final;
  d["z_final"] = rec.z_final;
  d["aborted"] = rec.aborted;
  d["abort_reason"] = rec.abort_reason;
  return d;
}

InnerStrategy strategy_from_kwargs(const std::string& kind, double lr, double eta_gn,
                                   double lambda, std::size_t fixed_steps, double alpha,
                                   std::size_t max_inner, bool use_alpha_rule) {
  InnerStrategy st;
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
  st.lr = lr;
  st.adamw.lr = lr;
  st.eta_gn = eta_gn;
  st.lambda = lambda;
  if (use_alpha_rule)
    st.stop = InnerStop::alpha({alpha, LstarMode::Zero, max_inner});
  else
    st.stop = InnerStop::fixed(fixed_steps);
  return st;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "surrogate-loss solvers for variational inequalities with hidden monotone structure";
  m.attr("__version__") = kVersion;

  py::register_exception<DimensionMismatch>(m, "DimensionMismatchError");
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefiniteError");
  py::register_exception<ZeroMatrix>(m, "ZeroMatrixError");
  py::register_exception<UnsupportedModel>(m, "UnsupportedModelError");
  py::register_exception<NumericalBlowup>(m, "NumericalBlowupError");
  py::register_exception<InvalidRegime>(m, "InvalidRegimeError");
  py::register_exception<ConfigError>(m, "ConfigurationError");

  // ---- linalg ----
  m.def("mat_vec",
        [](const std::vector<std::vector<double>>& rows, const Vector& v) {
          return mat_vec(matrix_from_rows(rows), v);
        },
        py::arg("matrix"), py::arg("vector"));
  m.def("solve_spd",
        [](const std::vector<std::vector<double>>& rows, const Vector& b) {
          return solve_spd(matrix_from_rows(rows), b);
        },
        py::arg("matrix"), py::arg("rhs"));
  m.def("pinv_solve",
        [](const std::vector<std::vector<double>>& rows, const Vector& b, double tol) {
          return pinv_solve(matrix_from_rows(rows), b, tol);
        },
        py::arg("matrix"), py::arg("rhs"), py::arg("tol") = 1e-12);
  m.def("spectral_radius",
        [](const std::vector<std::vector<double>>& rows) {
          return spectral_radius(matrix_from_rows(rows));
        },
        py::arg("matrix"));

  // ---- models ----
  py::class_<PredictionModel, std::shared_ptr<PredictionModel>>(m, "PredictionModel")
      .def_property_readonly("param_dim", &PredictionModel::param_dim)
      .def_property_readonly("output_dim", &PredictionModel::output_dim)
      .def("forward", &PredictionModel::forward, py::arg("theta"))
      .def("jacobian",
           [](const PredictionModel& self, const Vector& theta) {
             return matrix_to_rows(self.jacobian(theta));
           },
           py::arg("theta"))
      .def("vjp", &PredictionModel::vjp, py::arg("theta"), py::arg("cotangent"));

  m.def("linear_model",
        [](const std::vector<std::vector<double>>& phi) {
          return std::shared_ptr<PredictionModel>(new LinearModel(matrix_from_rows(phi)));
        },
        py::arg("phi"));
  m.def("scalar_sigmoid_celu",
        [](double a1, double a2) {
          return std::shared_ptr<PredictionModel>(new ScalarSigmoidCelu(a1, a2));
        },
        py::arg("a1"), py::arg("a2"));
  m.def("pennies_model", [] {
    std::vector<std::shared_ptr<const PredictionModel>> parts{
        std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
        std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)};
    return std::shared_ptr<PredictionModel>(new ProductModel(std::move(parts)));
  });
  m.def("singular_bounds",
        [](const std::shared_ptr<PredictionModel>& model, const Vector& theta) {
          return singular_bounds(*model, theta);
        },
        py::arg("model"), py::arg("theta"));

  // ---- operators ----
  py::class_<VIOperator, std::shared_ptr<VIOperator>>(m, "VIOperator")
      .def_property_readonly("dim", &VIOperator::dim)
      .def("eval", &VIOperator::eval, py::arg("z"))
      .def_property_readonly("solution", &VIOperator::solution)
      .def_property_readonly("mu", &VIOperator::monotonicity_constant)
      .def_property_readonly("lip", &VIOperator::lipschitz_constant);

  m.def("pennies_operator",
        [] { return std::shared_ptr<VIOperator>(new PenniesOperator()); });
  m.def("rps_operator", [] { return std::shared_ptr<VIOperator>(new RpsOperator()); });
  m.def("affine_operator",
        [](const std::vector<std::vector<double>>& b, const Vector& center) {
          return std::shared_ptr<VIOperator>(new AffineOperator(
              matrix_from_rows(b), center, DomainSpec::all_space(center.size())));
        },
        py::arg("b"), py::arg("center"));
  m.def("monotonicity_probe",
        [](const std::shared_ptr<VIOperator>& op, std::size_t samples, std::uint64_t seed) {
          const ProbeResult r = monotonicity_probe(*op, samples, seed);
          return std::make_pair(r.mu_hat, r.lip_hat);
        },
        py::arg("op"), py::arg("samples") = 100, py::arg("seed") = 0);

  // ---- surrogate + solvers ----
  m.def("surrogate_value",
        [](const std::shared_ptr<PredictionModel>& model, const Vector& theta_t,
           const Vector& f_val, double eta, const Vector& theta) {
          return build_surrogate(model, theta_t, f_val, eta).value(theta);
        },
        py::arg("model"), py::arg("theta_t"), py::arg("f_val"), py::arg("eta"), py::arg("theta"));
  m.def("surrogate_gradient",
        [](const std::shared_ptr<PredictionModel>& model, const Vector& theta_t,
           const Vector& f_val, double eta, const Vector& theta) {
          return build_surrogate(model, theta_t, f_val, eta).gradient(theta);
        },
        py::arg("model"), py::arg("theta_t"), py::arg("f_val"), py::arg("eta"), py::arg("theta"));
  m.def("gn_update",
        [](const std::shared_ptr<PredictionModel>& model, const Vector& theta_t,
           const Vector& f_val, double eta) {
          const SurrogateLoss loss = build_surrogate(model, theta_t, f_val, eta);
          return gn_step(loss, theta_t);
        },
        py::arg("model"), py::arg("theta_t"), py::arg("f_val"), py::arg("eta"));

  // ---- outer loop ----
  m.def("run_outer",
        [](const std::shared_ptr<PredictionModel>& model, const std::shared_ptr<VIOperator>& op,
           const Vector& theta_init, double eta, std::size_t t_outer, const std::string& solver,
           double lr, double eta_gn, double lambda, std::size_t inner_steps, double alpha,
           std::size_t max_inner, bool alpha_rule) {
          OuterConfig cfg;
          cfg.eta = eta;
          cfg.t_outer = t_outer;
          cfg.strategy = strategy_from_kwargs(solver, lr, eta_gn, lambda, inner_steps, alpha,
                                              max_inner, alpha_rule);
          return record_to_dict(run_outer(model, *op, theta_init, cfg));
        },
        py::arg("model"), py::arg("op"), py::arg("theta_init"), py::arg("eta") = 0.1,
        py::arg("t_outer") = 1000, py::arg("solver") = "gn", py::arg("lr") = 1.0,
        py::arg("eta_gn") = 1.0, py::arg("lambda") = 1e-3, py::arg("inner_steps") = 1,
        py::arg("alpha") = 0.5, py::arg("max_inner") = 1000, py::arg("alpha_rule") = false);
  m.def("exact_step",
        [](const std::shared_ptr<VIOperator>& op, const Vector& z, double eta) {
          return exact_step(*op, z, eta);
        },
        py::arg("op"), py::arg("z"), py::arg("eta"));
  m.def("rate_bounds",
        [](double eta, double mu, double lip, double alpha, double c) {
          const RateBounds rb = rate_bounds(eta, mu, lip, alpha, c);
          py::dict d;
          d["kappa_sq"] = rb.kappa_sq;
          d["theorem1_factor"] = rb.theorem1_factor;
          d["stoch_factor"] = rb.stoch_factor;
          d["noise_term"] = rb.noise_term;
          d["condition1"] = rb.condition1();
          d["eta_threshold"] = rb.eta_threshold();
          return d;
        },
        py::arg("eta"), py::arg("mu"), py::arg("lip"), py::arg("alpha") = 0.0, py::arg("c") = 0.0);

  // ---- counterexample ----
  m.def("build_p", [](double eta) { return matrix_to_rows(build_p(eta)); }, py::arg("eta"));
  m.def("measure_alpha",
        [](double eta, const Vector& z) {
          return measure_alpha(CounterexampleSpec::make(eta), z);
        },
        py::arg("eta"), py::arg("z"));
  m.def("run_divergence",
        [](double eta, const Vector& z0, std::size_t steps) {
          return record_to_dict(run_divergence(CounterexampleSpec::make(eta), z0, steps));
        },
        py::arg("eta"), py::arg("z0"), py::arg("steps"));

  // ---- linear value prediction ----
  py::class_<MarkovChain>(m, "MarkovChain")
      .def_property_readonly("n", &MarkovChain::n)
      .def_readonly("r", &MarkovChain::r)
      .def_readonly("gamma", &MarkovChain::gamma)
      .def_readonly("xi", &MarkovChain::xi);
  m.def("make_slow_mixing_chain", &make_slow_mixing_chain, py::arg("n") = 100,
        py::arg("hold") = 0.95, py::arg("seed") = 0, py::arg("gamma") = 0.95);
  m.def("true_values", &true_values, py::arg("chain"));
  m.def("bellman_apply", &bellman_apply, py::arg("chain"), py::arg("z"));
  m.def("pbe_operator", &pbe_operator, py::arg("chain"), py::arg("z"));
  m.def("linear_td_experiment",
        [](std::size_t n, double hold, std::size_t d, std::size_t length, std::size_t inner_steps,
           double lr, std::uint64_t seed) {
          const MarkovChain mc = make_slow_mixing_chain(n, hold, seed, 0.95);
          const FeatureMap fm = make_feature_map(n, d, seed + 1);
          const auto traj = simulate_trajectory(mc, 0, length, seed + 2);
          EstimatorState est = EstimatorState::zero(n, d);
          for (const Transition& tr : traj)
            est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
          Vector theta(d, 0.0);
          const Vector exact = bertsekas_update(theta, est, 0.0);
          const Vector approx = surr_gd_linear(theta, est, inner_steps, lr);
          py::dict out;
          out["exact_update"] = exact;
          out["surrogate_update"] = approx;
          out["gap"] = norm(sub(exact, approx));
          return out;
        },
        py::arg("n") = 100, py::arg("hold") = 0.95, py::arg("d") = 10, py::arg("length") = 2000,
        py::arg("inner_steps") = 20, py::arg("lr") = 1.0, py::arg("seed") = 0);

  // ---- verification ----
  m.def("verify", [] {
    py::list out;
    for (const CheckResult& r : run_verification()) {
      py::dict d;
      d["name"] = r.name;
      d["pass"] = r.pass;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  });
  m.def("experiments", [] {
    py::list out;
    for (const ExperimentInfo& e : experiment_catalog()) {
      py::dict d;
      d["name"] = e.name;
      d["figure"] = e.figure;
      d["description"] = e.description;
      out.append(d);
    }
    return out;
  });
  m.def("mix_seed", &mix_seed, py::arg("master"), py::arg("index"));
}
