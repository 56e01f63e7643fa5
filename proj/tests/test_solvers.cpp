#include <doctest.h>

#include <cmath>
#include <memory>

#include "hiddenvi/errors.hpp"
#include "hiddenvi/rng.hpp"
#include "hiddenvi/solvers.hpp"
#include "hiddenvi/vi_problems.hpp"

using namespace hiddenvi;

namespace {

std::shared_ptr<const ProductModel> pennies_model() {
  return std::make_shared<ProductModel>(std::vector<std::shared_ptr<const PredictionModel>>{
      std::make_shared<ScalarSigmoidCelu>(0.5, 1.0), std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
}

}  // namespace

TEST_CASE("gd_step") {
  const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
  const SurrogateLoss s(model, {-0.5, 0.0}, 0.5);
  const Vector theta{0.0, 0.0};

  SUBCASE("unit learning rate lands on the identity-quadratic minimizer") {
    const Vector next = gd_step(s, theta, 1.0);
    CHECK(next[0] == doctest::Approx(-0.5));
    CHECK(next[1] == doctest::Approx(0.0));
  }
  SUBCASE("half learning rate halves the displacement") {
    const Vector next = gd_step(s, theta, 0.5);
    CHECK(next[0] == doctest::Approx(-0.25));
    CHECK(next[1] == doctest::Approx(0.0));
  }
  SUBCASE("minimizer is a fixed point") {
    const Vector next = gd_step(s, {-0.5, 0.0}, 1.0);
    CHECK(norm(sub(next, {-0.5, 0.0})) <= 1e-12);
  }
  CHECK_THROWS_AS(gd_step(s, theta, 0.0), ConfigError);
}

TEST_CASE("gn_step") {
  SUBCASE("one step minimizes a full-rank linear surrogate") {
    Rng rng(61);
    Matrix phi(4, 2);
    for (double& v : phi.values()) v = rng.normal();
    const auto model = std::make_shared<LinearModel>(phi);
    Vector theta{0.3, -0.7}, f(4);
    for (double& v : f) v = rng.normal();
    const SurrogateLoss s = build_surrogate(model, theta, f, 0.2);
    const Vector next = gn_step(s, theta);
    CHECK(norm(s.gradient(next)) <= 1e-10);
  }
  SUBCASE("equals the preconditioned update at the pennies anchor") {
    const auto model = pennies_model();
    const PenniesOperator op;
    const Vector theta{1.25, 2.25};
    const double eta = 0.1;
    const Vector f = op.eval(model->forward(theta));
    const SurrogateLoss s = build_surrogate(model, theta, f, eta);
    const Vector phgd = sub(theta, scale(pinv_solve(model->jacobian(theta), f), eta));
    CHECK(norm(sub(gn_step(s, theta), phgd)) <= 1e-12);
  }
  SUBCASE("zero residual leaves theta unchanged") {
    const auto model = std::make_shared<ScalarSigmoidCelu>(0.5, 1.0);
    const SurrogateLoss s = build_surrogate(model, Vector{0.4}, Vector{0.0}, 0.1);
    CHECK(gn_step(s, {0.4}) == Vector{0.4});
  }
}

TEST_CASE("dgn_step") {
  Rng rng(67);
  Matrix phi(3, 2);
  for (double& v : phi.values()) v = rng.normal();
  const auto model = std::make_shared<LinearModel>(phi);
  const Vector theta{0.5, 0.5};
  Vector f(3);
  for (double& v : f) v = rng.normal();
  const SurrogateLoss s = build_surrogate(model, theta, f, 0.3);

  SUBCASE("unit step reproduces gn exactly") {
    CHECK(dgn_step(s, theta, 1.0) == gn_step(s, theta));
  }
  SUBCASE("half step halves the displacement on the identity model") {
    const auto id = std::make_shared<LinearModel>(Matrix::identity(2));
    const SurrogateLoss si(id, {1.0, -1.0}, 0.3);
    const Vector full = sub(gn_step(si, {0.0, 0.0}), Vector{0.0, 0.0});
    const Vector half = sub(dgn_step(si, {0.0, 0.0}, 0.5), Vector{0.0, 0.0});
    CHECK(norm(sub(half, scale(full, 0.5))) <= 1e-14);
  }
  SUBCASE("small damped steps strictly descend on random smooth instances") {
    Rng r2(71);
    for (int rep = 0; rep < 100; ++rep) {
      Matrix a1(4, 5), a2(3, 4);
      for (double& v : a1.values()) v = r2.normal();
      for (double& v : a2.values()) v = r2.normal();
      const auto m = std::make_shared<SoftmaxMlp>(a1, a2);
      Vector th(5), fv(3);
      for (double& v : th) v = r2.normal();
      for (double& v : fv) v = r2.normal();
      const SurrogateLoss loss = build_surrogate(m, th, fv, 0.2);
      const double anchor = loss.value(th);
      if (anchor <= 1e-14) continue;
      CHECK(loss.value(dgn_step(loss, th, 0.05)) < anchor);
    }
  }
  CHECK_THROWS_AS(dgn_step(s, theta, 1.5), ConfigError);
}

TEST_CASE("lm_step") {
  const auto id = std::make_shared<LinearModel>(Matrix::identity(2));

  SUBCASE("lambda one on the identity halves the residual step") {
    // residual (1, 0) from the anchor: (I + I)^{-1} (1,0) = (0.5, 0)
    const SurrogateLoss s(id, {-1.0, 0.0}, 0.1);
    const Vector next = lm_step(s, {0.0, 0.0}, 1.0);
    CHECK(next[0] == doctest::Approx(-0.5));
    CHECK(next[1] == doctest::Approx(0.0));
  }
  SUBCASE("large lambda tends to a scaled gradient step") {
    Rng rng(73);
    Matrix phi(4, 3);
    for (double& v : phi.values()) v = rng.normal();
    const auto model = std::make_shared<LinearModel>(phi);
    const Vector theta{0.1, -0.2, 0.4};
    Vector f(4);
    for (double& v : f) v = rng.normal();
    const SurrogateLoss s = build_surrogate(model, theta, f, 0.3);
    const Vector lm = lm_step(s, theta, 1e6);
    const Vector gd = gd_step(s, theta, 1e-6);
    CHECK(norm(sub(lm, gd)) <= 1e-8 * norm(sub(gd, theta)));
  }
  SUBCASE("small lambda tends to gn on full-rank jacobians") {
    Rng rng(79);
    Matrix phi(4, 3);
    for (double& v : phi.values()) v = rng.normal();
    const auto model = std::make_shared<LinearModel>(phi);
    const Vector theta{0.1, -0.2, 0.4};
    Vector f(4);
    for (double& v : f) v = rng.normal();
    const SurrogateLoss s = build_surrogate(model, theta, f, 0.3);
    CHECK(norm(sub(lm_step(s, theta, 1e-10), gn_step(s, theta))) <= 1e-6);
  }
  CHECK_THROWS_AS(lm_step(SurrogateLoss(id, {0.0, 0.0}, 0.1), {0.0, 0.0}, 0.0), ConfigError);
}

namespace {

class QuadraticObjective final : public ScalarObjective {
 public:
  explicit QuadraticObjective(Vector target) : target_(std::move(target)) {}
  std::size_t param_dim() const override { return target_.size(); }
  double value(const Vector& theta) const override { return 0.5 * norm_sq(sub(theta, target_)); }
  Vector gradient(const Vector& theta) const override { return sub(theta, target_); }

 private:
  Vector target_;
};

}  // namespace

TEST_CASE("adamw_step") {
  const QuadraticObjective obj({1.0, -2.0});
  const Vector theta{0.0, 0.0};
  AdamWParams hyper{0.1, 0.9, 0.999, 1e-8, 0.01};

  SUBCASE("first step is a signed unit step plus decoupled decay") {
    const auto [next, state] = adamw_step(obj, theta, AdamState::zero(2), hyper);
    const Vector g = obj.gradient(theta);
    for (std::size_t i = 0; i < 2; ++i) {
      const double expected = theta[i] * (1.0 - hyper.lr * hyper.weight_decay) -
                              hyper.lr * g[i] / (std::fabs(g[i]) + hyper.eps);
      CHECK(next[i] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(state.step_count == 1);
  }
  SUBCASE("zero gradient and zero decay leave theta unchanged") {
    AdamWParams no_decay{0.1, 0.9, 0.999, 1e-8, 0.0};
    AdamState st = AdamState::zero(2);
    st.m = {0.5, -0.5};
    st.v = {0.25, 0.25};
    const auto [next, state] = adamw_step(QuadraticObjective({0.0, 0.0}), {0.0, 0.0}, st, no_decay);
    CHECK(next == Vector{0.0, 0.0});
    CHECK(state.m[0] == doctest::Approx(0.45));  // moments decay toward zero
  }
  SUBCASE("identical inputs give identical outputs") {
    const auto a = adamw_step(obj, theta, AdamState::zero(2), hyper);
    const auto b = adamw_step(obj, theta, AdamState::zero(2), hyper);
    CHECK(a.first == b.first);
    CHECK(a.second.m == b.second.m);
    CHECK(a.second.v == b.second.v);
  }
}

TEST_CASE("run_inner") {
  SUBCASE("gn with an alpha rule exits after one exact minimization") {
    Rng rng(83);
    Matrix phi(3, 3);
    for (double& v : phi.values()) v = rng.normal();
    phi(0, 0) += 2.0;
    phi(1, 1) += 2.0;
    phi(2, 2) += 2.0;
    const auto model = std::make_shared<LinearModel>(phi);
    const Vector theta{1.0, -1.0, 0.5};
    const SurrogateLoss s = build_surrogate(model, theta, {0.4, 0.2, -0.1}, 0.3);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::GN;
    st.stop = InnerStop::alpha({0.99, LstarMode::Exact, 50});
    const InnerResult res = run_inner(s, theta, st, lstar(s, LstarMode::Exact), s.value(theta));
    CHECK(res.steps_taken == 1);
    CHECK_FALSE(res.alpha_cap_hit);
  }
  SUBCASE("fixed steps always runs the full budget") {
    const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
    const SurrogateLoss s(model, {1.0, 1.0}, 0.1);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::GD;
    st.lr = 0.1;
    st.stop = InnerStop::fixed(10);
    const InnerResult res = run_inner(s, {0.0, 0.0}, st, 0.0, s.value({0.0, 0.0}));
    CHECK(res.steps_taken == 10);
    CHECK(res.grad_evals == 10);
  }
  SUBCASE("geometric decay stops after the predicted seven steps") {
    // 1-d quadratic, per-step iterate contraction 0.9 => loss contraction 0.81
    const auto model = std::make_shared<LinearModel>(Matrix::from_rows({{1.0}}));
    const SurrogateLoss s(model, {1.0}, 0.1);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::GD;
    st.lr = 0.1;
    st.stop = InnerStop::alpha({0.5, LstarMode::Exact, 100});
    const InnerResult res = run_inner(s, {0.0}, st, 0.0, s.value({0.0}));
    CHECK(res.steps_taken == 7);
  }
  SUBCASE("cap is flagged when the rule cannot be met") {
    const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
    const SurrogateLoss s(model, {1.0, 1.0}, 0.1);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::GD;
    st.lr = 1e-4;
    st.stop = InnerStop::alpha({0.1, LstarMode::Exact, 5});
    const InnerResult res = run_inner(s, {0.0, 0.0}, st, 0.0, s.value({0.0, 0.0}));
    CHECK(res.alpha_cap_hit);
    CHECK(res.steps_taken == 5);
  }
  SUBCASE("an already-satisfied guard takes no steps") {
    const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
    const SurrogateLoss s(model, {1.0, 0.0}, 0.1);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::GD;
    st.lr = 0.5;
    st.stop = InnerStop::alpha({0.5, LstarMode::Exact, 50});
    const InnerResult res = run_inner(s, {1.0, 0.0}, st, 0.0, s.value({1.0, 0.0}));
    CHECK(res.steps_taken == 0);
  }
  SUBCASE("adamw strategy is accepted by the runner") {
    const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
    const SurrogateLoss s(model, {1.0, 1.0}, 0.1);
    InnerStrategy st;
    st.kind = InnerStrategy::Kind::AdamW;
    st.adamw.lr = 0.05;
    st.stop = InnerStop::fixed(25);
    const InnerResult res = run_inner(s, {0.0, 0.0}, st, 0.0, s.value({0.0, 0.0}));
    CHECK(res.steps_taken == 25);
    CHECK(res.final_loss < s.value({0.0, 0.0}));
  }
}
