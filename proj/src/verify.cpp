#include "hiddenvi/verify.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

#include "hiddenvi/counterexample.hpp"
#include "hiddenvi/csv.hpp"
#include "hiddenvi/driver.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/experiments.hpp"
#include "hiddenvi/rl_pbe.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

namespace {

constexpr std::uint64_t kVerifySeed = 0xC0FFEEULL;

struct Suite {
  std::vector<CheckResult> results;

  void check(const std::string& name, bool pass, const std::string& detail = "") {
    results.push_back({name, pass, detail});
  }

  void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
      auto [pass, detail] = fn();
      check(name, pass, detail);
    } catch (const std::exception& e) {
      check(name, false, std::string("exception: ") + e.what());
    }
  }
};

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

Vector random_vector(Rng& rng, std::size_t n, double sd = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

// Central finite differences of the full prediction map, step 1e-5.
Matrix fd_jacobian(const PredictionModel& m, const Vector& theta, double h = 1e-5) {
  Matrix j(m.output_dim(), m.param_dim());
  Vector tp = theta, tm = theta;
  for (std::size_t k = 0; k < m.param_dim(); ++k) {
    tp[k] = theta[k] + h;
    tm[k] = theta[k] - h;
    const Vector fp = m.forward(tp);
    const Vector fm = m.forward(tm);
    for (std::size_t i = 0; i < m.output_dim(); ++i) j(i, k) = (fp[i] - fm[i]) / (2.0 * h);
    tp[k] = theta[k];
    tm[k] = theta[k];
  }
  return j;
}

double jacobian_rel_error(const Matrix& a, const Matrix& b) {
  double num = 0.0, den = 1.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    num = std::max(num, std::fabs(a.values()[i] - b.values()[i]));
    den = std::max(den, std::fabs(a.values()[i]));
  }
  return num / den;
}

// Perturbs the (0,0) Jacobian entry; the forward map is untouched so the
// finite-difference suite has to notice.
class CorruptedModel final : public PredictionModel {
 public:
  explicit CorruptedModel(std::shared_ptr<const PredictionModel> inner) : inner_(std::move(inner)) {}
  std::size_t param_dim() const override { return inner_->param_dim(); }
  std::size_t output_dim() const override { return inner_->output_dim(); }
  Vector forward(const Vector& theta) const override { return inner_->forward(theta); }
  Matrix jacobian(const Vector& theta) const override {
    Matrix j = inner_->jacobian(theta);
    j(0, 0) += 1e-2;
    return j;
  }

 private:
  std::shared_ptr<const PredictionModel> inner_;
};

std::vector<std::pair<std::string, std::shared_ptr<const PredictionModel>>> model_zoo(Rng& rng) {
  std::vector<std::pair<std::string, std::shared_ptr<const PredictionModel>>> zoo;
  zoo.emplace_back("linear", std::make_shared<LinearModel>(random_matrix(rng, 4, 3)));
  zoo.emplace_back("scalar-sigmoid-celu", std::make_shared<ScalarSigmoidCelu>(0.5, 1.0));
  zoo.emplace_back("softmax-mlp", std::make_shared<SoftmaxMlp>(random_matrix(rng, 4, 5),
                                                               random_matrix(rng, 3, 4)));
  std::vector<std::shared_ptr<const PredictionModel>> parts{
      std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
      std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)};
  zoo.emplace_back("product", std::make_shared<ProductModel>(parts));
  zoo.emplace_back("mlp-value-net",
                   std::make_shared<MlpValueNet>(random_matrix(rng, 12, 4), 8));
  return zoo;
}

void verify_linalg(Suite& s) {
  s.run("linalg/solve_spd residual", [] {
    Rng rng(kVerifySeed + 1);
    double worst = 0.0;
    for (int rep = 0; rep < 25; ++rep) {
      const std::size_t n = 2 + rng.uniform_index(6);
      const Matrix m = random_matrix(rng, n, n);
      Matrix a = gram(m);
      for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
      const Vector b = random_vector(rng, n);
      const Vector x = solve_spd(a, b);
      worst = std::max(worst, norm(sub(mat_vec(a, x), b)) / std::max(norm(b), 1e-300));
    }
    return std::make_pair(worst <= 1e-9, "worst residual ratio " + format_g17(worst));
  });

  s.run("linalg/pinv matches normal equations", [] {
    Rng rng(kVerifySeed + 2);
    double worst = 0.0;
    int used = 0;
    while (used < 100) {
      const Matrix j = random_matrix(rng, 5, 3);
      const SymEig eig = eigen_sym(gram(j));
      if (eig.eigenvalues.front() <= 0.0 ||
          eig.eigenvalues.back() / eig.eigenvalues.front() >= 1e6)
        continue;
      ++used;
      const Vector b = random_vector(rng, 5);
      const Vector x = pinv_solve(j, b);
      const Vector x_ne = solve_spd(gram(j), tmat_vec(j, b));
      worst = std::max(worst, norm(sub(x, x_ne)) / std::max(norm(x_ne), 1e-300));
    }
    return std::make_pair(worst <= 1e-8, "worst rel err " + format_g17(worst));
  });

  s.run("linalg/spectral radius rotation 2x2", [] {
    double worst = 0.0;
    for (double eta : {0.01, 0.1, 1.0}) {
      const Matrix m = Matrix::from_rows({{1.0, -eta}, {eta, 1.0}});
      worst = std::max(worst, std::fabs(spectral_radius(m) - std::sqrt(1.0 + eta * eta)));
    }
    return std::make_pair(worst <= 1e-9, "worst abs err " + format_g17(worst));
  });
}

void verify_models(Suite& s, const VerifyHooks& hooks) {
  s.run("models/jacobian finite difference", [&hooks] {
    Rng rng(kVerifySeed + 3);
    auto zoo = model_zoo(rng);
    if (hooks.corrupt_jacobian)
      zoo[0].second = std::make_shared<CorruptedModel>(zoo[0].second);
    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, model] : zoo) {
      for (int rep = 0; rep < 20; ++rep) {
        const Vector theta = random_vector(rng, model->param_dim());
        const double err = jacobian_rel_error(model->jacobian(theta), fd_jacobian(*model, theta));
        if (err > worst) {
          worst = err;
          worst_name = name;
        }
      }
    }
    return std::make_pair(worst <= 1e-5, worst_name + " rel err " + format_g17(worst));
  });

  s.run("models/vjp matches jacobian transpose", [] {
    Rng rng(kVerifySeed + 4);
    auto zoo = model_zoo(rng);
    double worst = 0.0;
    for (const auto& [name, model] : zoo) {
      for (int rep = 0; rep < 10; ++rep) {
        const Vector theta = random_vector(rng, model->param_dim());
        const Vector u = random_vector(rng, model->output_dim());
        const Vector direct = model->vjp(theta, u);
        const Vector dense = tmat_vec(model->jacobian(theta), u);
        worst = std::max(worst, norm(sub(direct, dense)));
      }
    }
    return std::make_pair(worst <= 1e-10, "worst abs err " + format_g17(worst));
  });

  s.run("models/softmax outputs on simplex", [] {
    Rng rng(kVerifySeed + 5);
    const SoftmaxMlp m(random_matrix(rng, 4, 5), random_matrix(rng, 3, 4));
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Vector p = m.forward(random_vector(rng, 5, 2.0));
      double total = 0.0;
      for (double v : p) {
        if (v < 0.0) return std::make_pair(false, std::string("negative probability"));
        total += v;
      }
      worst = std::max(worst, std::fabs(total - 1.0));
    }
    return std::make_pair(worst <= 1e-12, "worst simplex defect " + format_g17(worst));
  });

  s.run("models/product cross blocks exactly zero", [] {
    Rng rng(kVerifySeed + 6);
    std::vector<std::shared_ptr<const PredictionModel>> parts{
        std::make_shared<SoftmaxMlp>(random_matrix(rng, 4, 5), random_matrix(rng, 3, 4)),
        std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)};
    const ProductModel m(parts);
    for (int rep = 0; rep < 10; ++rep) {
      const Vector theta = random_vector(rng, m.param_dim());
      const Matrix j = m.jacobian(theta);
      for (std::size_t i = 0; i < 3; ++i)
        if (j(i, 5) != 0.0) return std::make_pair(false, std::string("upper cross block"));
      for (std::size_t k = 0; k < 5; ++k)
        if (j(3, k) != 0.0) return std::make_pair(false, std::string("lower cross block"));
    }
    return std::make_pair(true, std::string());
  });

  s.run("models/pl composition for linear maps", [] {
    Rng rng(kVerifySeed + 7);
    Matrix phi = random_matrix(rng, 4, 4);
    for (std::size_t i = 0; i < 4; ++i) phi(i, i) += 3.0;  // keep it well-conditioned
    const auto model = std::make_shared<LinearModel>(phi);
    const Vector v = random_vector(rng, 4);
    const double sigma_min = singular_bounds(*model, Vector(4, 0.0)).first;
    const SurrogateLoss loss(model, v, 1.0);
    const double inf_value = loss.value(pinv_solve(phi, v));
    std::size_t violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Vector theta = random_vector(rng, 4, 2.0);
      const double lhs = norm_sq(loss.gradient(theta));
      const double rhs = 2.0 * sigma_min * sigma_min * (loss.value(theta) - inf_value);
      if (lhs < rhs) ++violations;
    }
    return std::make_pair(violations == 0, std::to_string(violations) + " violations");
  });
}

void verify_vi(Suite& s) {
  s.run("vi/probe never undercuts affine mu", [] {
    Rng rng(kVerifySeed + 8);
    for (int rep = 0; rep < 100; ++rep) {
      Matrix b = random_matrix(rng, 3, 3);
      for (std::size_t i = 0; i < 3; ++i) b(i, i) += 2.5;
      const AffineOperator op(b, random_vector(rng, 3), DomainSpec::all_space(3));
      const double mu = *op.monotonicity_constant();
      const ProbeResult probe = monotonicity_probe(op, 50, rng.next_u64());
      if (probe.mu_hat < mu - 1e-9)
        return std::make_pair(false, "probe " + format_g17(probe.mu_hat) + " < mu " +
                                         format_g17(mu));
    }
    return std::make_pair(true, std::string());
  });

  s.run("vi/projection idempotent", [] {
    Rng rng(kVerifySeed + 9);
    const DomainSpec box = DomainSpec::box(Vector{0.0, 0.0}, Vector{1.0, 1.0});
    const DomainSpec simplex = DomainSpec::simplex_product({3, 4});
    for (int rep = 0; rep < 200; ++rep) {
      const Vector zb = random_vector(rng, 2, 2.0);
      const Vector pb = project(box, zb);
      if (project(box, pb) != pb) return std::make_pair(false, std::string("box"));
      const Vector zs = random_vector(rng, 7, 2.0);
      const Vector ps = project(simplex, zs);
      if (project(simplex, ps) != ps) return std::make_pair(false, std::string("simplex"));
    }
    return std::make_pair(true, std::string());
  });

  s.run("vi/projection nonexpansive", [] {
    Rng rng(kVerifySeed + 10);
    const DomainSpec simplex = DomainSpec::simplex_product({3, 3});
    const DomainSpec box = DomainSpec::box(Vector{0.0, 0.0}, Vector{1.0, 1.0});
    for (int rep = 0; rep < 1000; ++rep) {
      const Vector x = random_vector(rng, 6, 2.0);
      const Vector y = random_vector(rng, 6, 2.0);
      if (norm(sub(project(simplex, x), project(simplex, y))) > norm(sub(x, y)) + 1e-12)
        return std::make_pair(false, std::string("simplex expansion"));
      const Vector xb(x.begin(), x.begin() + 2);
      const Vector yb(y.begin(), y.begin() + 2);
      if (norm(sub(project(box, xb), project(box, yb))) > norm(sub(xb, yb)) + 1e-12)
        return std::make_pair(false, std::string("box expansion"));
    }
    return std::make_pair(true, std::string());
  });
}

void verify_surrogate(Suite& s) {
  s.run("surrogate/anchor identity", [] {
    Rng rng(kVerifySeed + 11);
    const PenniesOperator op;
    const auto model = std::make_shared<ProductModel>(
        std::vector<std::shared_ptr<const PredictionModel>>{
            std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
            std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const Vector theta = random_vector(rng, 2, 2.0);
      const double eta = 0.01 + rng.uniform();
      const Vector f = op.eval(model->forward(theta));
      const SurrogateLoss loss = build_surrogate(model, theta, f, eta);
      const double expected = 0.5 * eta * eta * norm_sq(f);
      worst = std::max(worst, std::fabs(loss.value(theta) - expected) /
                                  std::max(expected, 1e-300));
    }
    return std::make_pair(worst <= 1e-12, "worst rel err " + format_g17(worst));
  });

  s.run("surrogate/half squared distance bound", [] {
    Rng rng(kVerifySeed + 12);
    for (int rep = 0; rep < 100; ++rep) {
      const Matrix phi = random_matrix(rng, 5, 3);
      const auto model = std::make_shared<LinearModel>(phi);
      const Vector target = random_vector(rng, 5);
      const SurrogateLoss loss(model, target, 0.1);
      const double ls = lstar(loss, LstarMode::Exact);
      const Vector z_star = mat_vec(phi, pinv_solve(phi, target));
      for (int k = 0; k < 10; ++k) {
        const Vector theta = random_vector(rng, 3, 2.0);
        const double lhs = 0.5 * norm_sq(sub(model->forward(theta), z_star));
        if (lhs > loss.value(theta) - ls + 1e-9)
          return std::make_pair(false, "bound violated by " +
                                           format_g17(lhs - (loss.value(theta) - ls)));
      }
    }
    return std::make_pair(true, std::string());
  });

  s.run("surrogate/bias bound on pennies run", [] {
    // alpha measured against the exact projection infimum; the run itself
    // exits through the alpha rule with the zero-mode guard.
    const auto model = std::make_shared<ProductModel>(
        std::vector<std::shared_ptr<const PredictionModel>>{
            std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
            std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
    const PenniesOperator op;
    const double eta = 0.1;
    Vector theta{1.25, 2.25};
    const Vector f_star = op.eval(*op.solution());
    for (int t = 0; t < 300; ++t) {
      const Vector z = model->forward(theta);
      const Vector f = op.eval(z);
      const SurrogateLoss loss = build_surrogate(model, theta, f, eta);
      const double anchor = loss.value(theta);

      InnerStrategy st;
      st.kind = InnerStrategy::Kind::GD;
      st.lr = 2.0;
      st.stop = InnerStop::alpha({0.5, LstarMode::Zero, 200});
      const InnerResult inner = run_inner(loss, theta, st, 0.0, anchor);

      const Vector v = axpy(z, -eta, f);
      const Vector z_t_star = project(op.domain(), v);
      const double ls_proj = 0.5 * norm_sq(sub(z_t_star, v));
      const double denom = anchor - ls_proj;
      const double ratio = denom <= 0.0 ? 0.0 : (inner.final_loss - ls_proj) / denom;
      const double alpha_meas = std::sqrt(std::max(0.0, ratio));

      theta = inner.theta;
      const Vector z_next = model->forward(theta);
      if (!bias_check(z_next, z_t_star, f, f_star, alpha_meas, eta))
        return std::make_pair(false, "violated at iteration " + std::to_string(t));
    }
    return std::make_pair(true, std::string());
  });

  s.run("surrogate/weighted form matches Bellman least squares", [] {
    Rng rng(kVerifySeed + 13);
    const MarkovChain mc = make_slow_mixing_chain(12, 0.4, rng.next_u64(), 0.9);
    const FeatureMap fm = make_feature_map(12, 4, rng.next_u64());
    const auto model = std::make_shared<LinearModel>(fm.phi);
    for (int rep = 0; rep < 50; ++rep) {
      const Vector theta_t = random_vector(rng, 4);
      const Vector z_t = model->forward(theta_t);
      Vector f_scaled = sub(z_t, bellman_apply(mc, z_t));  // Xi^{-1} F(z_t)
      const SurrogateLoss loss = build_surrogate(model, theta_t, f_scaled, 1.0, mc.xi);
      const Vector theta = random_vector(rng, 4);
      // independent evaluation of 1/2 || Phi theta - T(z_t) ||^2_Xi
      const Vector resid = sub(model->forward(theta), bellman_apply(mc, z_t));
      double direct = 0.0;
      for (std::size_t i = 0; i < resid.size(); ++i)
        direct += 0.5 * mc.xi[i] * resid[i] * resid[i];
      if (std::fabs(direct - loss.value(theta)) > 1e-12 * std::max(1.0, direct))
        return std::make_pair(false, std::string("weighted value mismatch"));
    }
    return std::make_pair(true, std::string());
  });

  s.run("surrogate/stochastic full-set identity", [] {
    Rng rng(kVerifySeed + 14);
    const auto model = std::make_shared<MlpValueNet>(random_matrix(rng, 10, 3), 6);
    const Vector theta_t = random_vector(rng, model->param_dim());
    const Vector f = random_vector(rng, 10);
    std::vector<std::size_t> full(10);
    for (std::size_t i = 0; i < 10; ++i) full[i] = i;
    const double eta = 0.3;
    const SurrogateLoss det = build_surrogate(model, theta_t, f, eta);
    const StochasticSurrogate sto = build_stochastic_surrogate(model, theta_t, f, eta, full, full);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Vector theta = random_vector(rng, model->param_dim());
      worst = std::max(worst, std::fabs(det.value(theta) - sto.value(theta)));
    }
    return std::make_pair(worst <= 1e-12, "worst abs err " + format_g17(worst));
  });
}

void verify_solvers(Suite& s) {
  s.run("solvers/gn step from anchor is preconditioned gradient", [] {
    Rng rng(kVerifySeed + 15);
    auto zoo = model_zoo(rng);
    double worst = 0.0;
    for (const auto& [name, model] : zoo) {
      for (int rep = 0; rep < 20; ++rep) {
        const Vector theta = random_vector(rng, model->param_dim());
        const Vector f = random_vector(rng, model->output_dim());
        const double eta = 0.1;
        const SurrogateLoss loss = build_surrogate(model, theta, f, eta);
        Vector phgd;
        try {
          phgd = sub(theta, scale(pinv_solve(model->jacobian(theta), f), eta));
        } catch (const ZeroMatrix&) {
          continue;
        }
        worst = std::max(worst, norm(sub(gn_step(loss, theta), phgd)));
      }
    }
    return std::make_pair(worst <= 1e-12, "worst abs err " + format_g17(worst));
  });

  s.run("solvers/dgn with unit step equals gn", [] {
    Rng rng(kVerifySeed + 16);
    const auto model = std::make_shared<LinearModel>(random_matrix(rng, 4, 3));
    for (int rep = 0; rep < 20; ++rep) {
      const Vector theta = random_vector(rng, 3);
      const SurrogateLoss loss =
          build_surrogate(model, theta, random_vector(rng, 4), 0.2);
      if (dgn_step(loss, theta, 1.0) != gn_step(loss, theta))
        return std::make_pair(false, std::string("mismatch"));
    }
    return std::make_pair(true, std::string());
  });

  s.run("solvers/lm interpolates between gn and scaled gd", [] {
    Rng rng(kVerifySeed + 17);
    const auto model = std::make_shared<LinearModel>(random_matrix(rng, 5, 3));
    const Vector theta = random_vector(rng, 3);
    const SurrogateLoss loss = build_surrogate(model, theta, random_vector(rng, 5), 0.2);
    const Vector gn = gn_step(loss, theta);
    const Vector gd = gd_step(loss, theta, 1e-6);
    const double at_small = norm(sub(lm_step(loss, theta, 1e-10), gn));
    const double at_large_rel =
        norm(sub(lm_step(loss, theta, 1e6), gd)) / std::max(norm(sub(gd, theta)), 1e-300);
    const double d_small = norm(sub(lm_step(loss, theta, 1e-10), theta));
    const double d_mid = norm(sub(lm_step(loss, theta, 1.0), theta));
    const double d_large = norm(sub(lm_step(loss, theta, 1e6), theta));
    const bool monotone = d_small >= d_mid && d_mid >= d_large;
    std::ostringstream detail;
    detail << "gn gap " << format_g17(at_small) << ", gd rel gap " << format_g17(at_large_rel);
    return std::make_pair(at_small <= 1e-6 && at_large_rel <= 1e-8 && monotone, detail.str());
  });

  s.run("solvers/every strategy descends from the anchor", [] {
    const auto model = std::make_shared<ProductModel>(
        std::vector<std::shared_ptr<const PredictionModel>>{
            std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
            std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
    const PenniesOperator op;
    const Vector theta{1.25, 2.25};
    const Vector f = op.eval(model->forward(theta));
    const SurrogateLoss loss = build_surrogate(model, theta, f, 0.1);
    const double anchor = loss.value(theta);
    AdamState adam = AdamState::zero(2);
    const auto [theta_adam, st] = adamw_step(loss, theta, adam, {0.01, 0.9, 0.999, 1e-8, 0.0});
    const bool ok = loss.value(gd_step(loss, theta, 1.0)) < anchor &&
                    loss.value(gn_step(loss, theta)) < anchor &&
                    loss.value(dgn_step(loss, theta, 0.5)) < anchor &&
                    loss.value(lm_step(loss, theta, 1e-3)) < anchor &&
                    loss.value(theta_adam) < anchor;
    return std::make_pair(ok, std::string());
  });

  s.run("solvers/alpha rule exit is honest", [] {
    Rng rng(kVerifySeed + 18);
    for (int rep = 0; rep < 50; ++rep) {
      const auto model = std::make_shared<LinearModel>(random_matrix(rng, 3, 3));
      const Vector theta = random_vector(rng, 3);
      const SurrogateLoss loss = build_surrogate(model, theta, random_vector(rng, 3), 0.5);
      InnerStrategy st;
      st.kind = InnerStrategy::Kind::GD;
      st.lr = 0.05;
      AlphaRule rule{0.6, LstarMode::Zero, 5 + rng.uniform_index(20)};
      st.stop = InnerStop::alpha(rule);
      const double anchor = loss.value(theta);
      const InnerResult res = run_inner(loss, theta, st, 0.0, anchor);
      if (!res.alpha_cap_hit && !alpha_satisfied(rule, res.final_loss, anchor, 0.0))
        return std::make_pair(false, std::string("exited without satisfying the rule"));
      if (res.alpha_cap_hit && res.steps_taken != rule.max_inner)
        return std::make_pair(false, std::string("cap flag without cap"));
    }
    return std::make_pair(true, std::string());
  });
}

void verify_driver(Suite& s) {
  s.run("driver/exact minimization contracts at kappa^2", [] {
    Rng rng(kVerifySeed + 19);
    Matrix phi = random_matrix(rng, 2, 2);
    phi(0, 0) += 2.0;
    phi(1, 1) += 2.0;
    const auto model = std::make_shared<LinearModel>(phi);
    const PenniesOperator pennies;
    const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));
    OuterConfig cfg;
    cfg.eta = 0.01;
    cfg.t_outer = 500;
    cfg.strategy.kind = InnerStrategy::Kind::GN;
    const Vector theta0 = random_vector(rng, 2);
    const TrajectoryRecord rec = run_outer(model, op, theta0, cfg);
    const double kappa_sq = rate_bounds(0.01, *op.monotonicity_constant(),
                                        *op.lipschitz_constant(), 0.0, 0.0)
                                .kappa_sq;
    for (std::size_t t = 0; t + 1 < rec.rows.size(); ++t) {
      if (rec.rows[t + 1].dist_sq > kappa_sq * rec.rows[t].dist_sq + 1e-10)
        return std::make_pair(false, "violated at t=" + std::to_string(t));
    }
    return std::make_pair(true, std::string());
  });

  s.run("driver/alpha descent contracts at the theorem factor", [] {
    Rng rng(kVerifySeed + 20);
    const PenniesOperator pennies;
    const double mu = *pennies.monotonicity_constant();
    const double lip = *pennies.lipschitz_constant();
    const double alpha = 0.1;
    const RateBounds rb = rate_bounds(0.0, mu, lip, alpha, 0.0);
    const double eta = 0.9 * rb.eta_threshold();
    for (int rep = 0; rep < 10; ++rep) {
      Matrix phi = random_matrix(rng, 2, 2);
      phi(0, 0) += 2.0;
      phi(1, 1) += 2.0;
      const auto model = std::make_shared<LinearModel>(phi);
      const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));
      OuterConfig cfg;
      cfg.eta = eta;
      cfg.alpha = alpha;
      cfg.t_outer = 300;
      cfg.lstar_mode = LstarMode::Exact;
      cfg.strategy.kind = InnerStrategy::Kind::GD;
      cfg.strategy.lr = 0.02;
      cfg.strategy.stop = InnerStop::alpha({alpha, LstarMode::Exact, 20000});
      const TrajectoryRecord rec = run_outer(model, op, random_vector(rng, 2), cfg);
      const double factor = rate_bounds(eta, mu, lip, alpha, 0.0).theorem1_factor;
      for (std::size_t t = 0; t + 1 < rec.rows.size(); ++t)
        if (rec.rows[t + 1].dist_sq > factor * rec.rows[t].dist_sq + 1e-9)
          return std::make_pair(false, "violated at t=" + std::to_string(t));
    }
    return std::make_pair(true, std::string());
  });

  s.run("driver/accounting of gradient evaluations and loss ratio", [] {
    const auto model = std::make_shared<ProductModel>(
        std::vector<std::shared_ptr<const PredictionModel>>{
            std::make_shared<ScalarSigmoidCelu>(0.5, 1.0),
            std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
    const PenniesOperator op;
    OuterConfig cfg;
    cfg.eta = 0.1;
    cfg.t_outer = 20;
    cfg.strategy.kind = InnerStrategy::Kind::GD;
    cfg.strategy.lr = 1.0;
    cfg.strategy.stop = InnerStop::fixed(7);
    const TrajectoryRecord rec = run_outer(model, op, Vector{1.25, 2.25}, cfg);
    for (const TrajectoryRow& row : rec.rows) {
      if (row.inner_steps != 7 || row.grad_evals != 7)
        return std::make_pair(false, std::string("wrong step accounting"));
      if (row.loss_anchor > 0.0 && row.loss_ratio != row.loss_final / row.loss_anchor)
        return std::make_pair(false, std::string("loss ratio mismatch"));
    }
    return std::make_pair(true, std::string());
  });
}

void verify_counterexample(Suite& s) {
  s.run("counterexample/rotation is orthogonal", [] {
    const CounterexampleSpec spec = CounterexampleSpec::make(0.1);
    const Matrix qtq = mat_mul(transpose(spec.q_matrix), spec.q_matrix);
    const double err = max_abs(sub(qtq, Matrix::identity(2)));
    return std::make_pair(err <= 1e-14, "Q^T Q defect " + format_g17(err));
  });

  s.run("counterexample/measured alpha constant", [] {
    Rng rng(kVerifySeed + 21);
    const CounterexampleSpec spec = CounterexampleSpec::make(0.37);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Vector z = random_vector(rng, 2);
      if (norm(z) < 1e-8) continue;
      worst = std::max(worst, std::fabs(measure_alpha(spec, z) - spec.alpha));
    }
    return std::make_pair(worst <= 1e-12, "worst deviation " + format_g17(worst));
  });

  s.run("counterexample/unbiased direction contracts", [] {
    // contrast: following eta*F itself converges for eta < 2 mu / L^2 = 1
    const Matrix f = Matrix::from_rows({{1.0, 1.0}, {-1.0, 1.0}});
    for (double eta : {0.5, 0.9}) {
      Vector z{1.0, 0.0};
      double prev = norm(z);
      for (int t = 0; t < 100; ++t) {
        z = sub(z, scale(mat_vec(f, z), eta));
        const double cur = norm(z);
        if (cur >= prev) return std::make_pair(false, "no contraction at eta " + format_g17(eta));
        prev = cur;
      }
    }
    return std::make_pair(true, std::string());
  });
}

void verify_rl(Suite& s) {
  s.run("rl/estimator identities", [] {
    Rng rng(kVerifySeed + 22);
    const MarkovChain mc = make_slow_mixing_chain(20, 0.5, rng.next_u64(), 0.9);
    const FeatureMap fm = make_feature_map(20, 4, rng.next_u64());
    for (std::size_t len : {std::size_t{1}, std::size_t{10}, std::size_t{1000}}) {
      const auto traj = simulate_trajectory(mc, 0, len, rng.next_u64());
      EstimatorState est = EstimatorState::zero(20, 4);
      for (const Transition& tr : traj)
        est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
      const RebuiltEstimators reb = rebuild_from_counts(est, fm, mc.gamma);
      const double err = std::max({max_abs(sub(est.d_hat, reb.d)), max_abs(sub(est.c_hat, reb.c)),
                                   norm(sub(est.r_hat, reb.r))});
      if (err > 1e-12)
        return std::make_pair(false,
                              "length " + std::to_string(len) + " err " + format_g17(err));
    }
    return std::make_pair(true, std::string());
  });

  s.run("rl/pbe operator is strongly monotone", [] {
    const MarkovChain mc = make_slow_mixing_chain(100, 0.95, 5, 0.95);
    const LinearBellmanOperator op = make_bellman_operator(mc);
    const ProbeResult probe = monotonicity_probe(op, 200, kVerifySeed);
    return std::make_pair(probe.mu_hat > 0.0, "mu_hat " + format_g17(probe.mu_hat));
  });

  s.run("rl/surrogate gradient zero is the preconditioned update", [] {
    Rng rng(kVerifySeed + 23);
    const MarkovChain mc = make_slow_mixing_chain(20, 0.3, rng.next_u64(), 0.9);
    const FeatureMap fm = make_feature_map(20, 4, rng.next_u64());
    const auto traj = simulate_trajectory(mc, 0, 500, rng.next_u64());
    EstimatorState est = EstimatorState::zero(20, 4);
    for (const Transition& tr : traj)
      est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const Vector theta_t = random_vector(rng, 4);
      const Vector upd = bertsekas_update(theta_t, est, 0.0);
      worst = std::max(worst, norm(stochastic_linear_surrogate_grad(upd, theta_t, est)));
    }
    return std::make_pair(worst <= 1e-10, "worst gradient norm " + format_g17(worst));
  });

  s.run("rl/surrogate gd gap monotone in inner steps", [] {
    Rng rng(kVerifySeed + 24);
    std::size_t good = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const MarkovChain mc = make_slow_mixing_chain(20, 0.2, rng.next_u64(), 0.9);
      const FeatureMap fm = make_feature_map(20, 4, rng.next_u64());
      const auto traj = simulate_trajectory(mc, 0, 2000, rng.next_u64());
      EstimatorState est = EstimatorState::zero(20, 4);
      for (const Transition& tr : traj)
        est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
      const Vector theta_t = random_vector(rng, 4);
      const Vector exact = bertsekas_update(theta_t, est, 0.0);
      const double lr = 1.0 / operator_norm(est.d_hat);
      double prev = std::numeric_limits<double>::infinity();
      bool monotone = true;
      for (std::size_t m : {std::size_t{1}, std::size_t{5}, std::size_t{20}, std::size_t{100}}) {
        const double gap = norm(sub(surr_gd_linear(theta_t, est, m, lr), exact));
        if (gap > prev + 1e-15) monotone = false;
        prev = gap;
      }
      if (monotone) ++good;
    }
    return std::make_pair(good >= 95, std::to_string(good) + "/100 monotone");
  });

  s.run("rl/one-step surrogate equals td0", [] {
    const SyntheticMdp mdp = make_garnet_mdp(20, 4, 5, 0.9, kVerifySeed);
    const MlpValueNet model(mdp.state_features, 8);
    Rng rng(kVerifySeed + 25);
    const Vector theta0 = model.init_theta(rng);
    NonlinearCfg cfg;
    cfg.batch = 16;
    cfg.inner_steps = 1;
    cfg.t_outer = 25;
    cfg.lr = 0.05;
    cfg.seed = 99;
    const TrajectoryRecord a = alg2_inner(model, mdp, theta0, cfg);
    const TrajectoryRecord b = td0_batch(model, mdp, theta0, cfg);
    const double err = norm(sub(a.theta_final, b.theta_final));
    return std::make_pair(err <= 1e-12, "final theta gap " + format_g17(err));
  });
}

void verify_cli(Suite& s) {
  s.run("cli/deterministic run bytes", [] {
    nlohmann::json j = {{"experiment", "counterexample"},
                        {"seeds", 2},
                        {"master_seed", 99},
                        {"params", {{"steps", 100}}}};
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const RunSummary s1 = execute_experiment(cfg);
    const RunSummary s2 = execute_experiment(cfg);
    for (std::size_t r = 0; r < s1.runs.size(); ++r) {
      if (s1.runs[r].rows.size() != s2.runs[r].rows.size())
        return std::make_pair(false, std::string("row count differs"));
      for (std::size_t t = 0; t < s1.runs[r].rows.size(); ++t)
        if (run_csv_line(s1.runs[r].rows[t]) != run_csv_line(s2.runs[r].rows[t]))
          return std::make_pair(false, std::string("row bytes differ"));
    }
    return std::make_pair(true, std::string());
  });

  s.run("cli/csv schema", [] {
    const bool ok =
        run_csv_header() ==
        "iter,dist_sq,loss_anchor,loss_final,loss_ratio,inner_steps,grad_evals,alpha_flag,wall_ms";
    return std::make_pair(ok, std::string());
  });
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyHooks& hooks) {
  Suite s;
  verify_linalg(s);
  verify_models(s, hooks);
  verify_vi(s);
  verify_surrogate(s);
  verify_solvers(s);
  verify_driver(s);
  verify_counterexample(s);
  verify_rl(s);
  verify_cli(s);
  return s.results;
}

}  // namespace hiddenvi
