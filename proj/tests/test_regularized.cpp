#include <doctest.h>

#include <numbers>

#include "pfd/metrics.hpp"
#include "pfd/regularized.hpp"
#include "pfd/synthetic.hpp"
#include "support.hpp"

using namespace pfd;
using pfd::test::rel_err_up_to_scale;

namespace {

const ImageConditioning kCond = ImageConditioning::for_image(1280, 960);

CameraMap cameras_at(const std::vector<Eigen::Vector3d>& positions) {
  CameraMap cams;
  for (int k = 0; k < static_cast<int>(positions.size()); ++k)
    cams[k] = {test::camera_oracle(positions[k], Eigen::Vector3d::Zero(), 1000, {640, 480}), k};
  return cams;
}

CameraMap arc_cameras(int n) {
  std::vector<Eigen::Vector3d> pos;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    const double az = t * std::numbers::pi / 3, el = t * 7 * std::numbers::pi / 18;
    pos.push_back(200.0 * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)));
  }
  return cameras_at(pos);
}

ObjectObservations observe(const Ellipsoid3D& g, const CameraMap& cams, Rng* rng = nullptr,
                           PerturbationSpec spec = {}) {
  ObjectObservations obs{"obj", {}};
  for (const auto& [id, cam] : cams) {
    Ellipse2D e = project_gt_ellipse(g, cam);
    if (rng) e = perturb_ellipse(e, spec, *rng);
    obs.observations.push_back({id, dual_of(conic_from_ellipse(e))});
  }
  return obs;
}

SphereParams random_sphere(Rng& rng) {
  return {{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0.5, 20), rng.uniform(0.5, 2)};
}

Eigen::VectorXd random_point(const RegularizedProblem& p, Rng& rng) {
  Eigen::VectorXd x(p.n_params());
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2, 2);
  return x;
}

}  // namespace

TEST_CASE("sphere_dual examples") {
  CHECK(sphere_dual({}).m == Eigen::Matrix4d(Eigen::Vector4d(1, 1, 1, -1).asDiagonal()));

  const double r = 2.5;
  const auto primal = primal_from_dual(sphere_dual({{0, 0, 0}, r * r, 1.0}));
  REQUIRE(primal.has_value());
  const Ellipsoid3D e = decompose_quadric(*primal);
  REQUIRE(e.valid());
  CHECK((e.axes->semi_axes - Eigen::Vector3d::Constant(r)).norm() < 1e-12);

  const Ellipsoid3D moved = decompose_quadric(*primal_from_dual(sphere_dual({{1, 2, 3}, 1, 1})));
  CHECK((*moved.center - Eigen::Vector3d(1, 2, 3)).norm() < 1e-12);

  // Independent oracle: the dual of a sphere is the adjugate of its primal.
  const Eigen::Matrix4d Q = test::quadric_oracle({1, -2, 0.5}, {1.5, 1.5, 1.5}, Eigen::Matrix3d::Identity());
  CHECK(rel_err_up_to_scale(sphere_dual({{1, -2, 0.5}, 2.25, 1}).m, Q.determinant() * Q.inverse()) < 1e-12);
}

TEST_CASE("dual normalization") {
  Vector10d v = Vector10d::LinSpaced(1, 10);
  const Vector10d n = normalize_dual(v);
  CHECK(n(9) == -1.0);
  CHECK((n * -10.0 - v).norm() < 1e-12);
  v(9) = 0.0;
  CHECK_THROWS_AS(normalize_dual(v), NormalizationError);
}

TEST_CASE("regularizer values") {
  const SphereParams s{{1, 2, 3}, 4, 1};
  const Vector10d exact = vech<4>(sphere_dual(s).m);
  CHECK(regularizer(exact, s) == doctest::Approx(0.0));

  Vector10d off = exact;
  off(0) += 0.3;
  off(4) -= 0.2;
  Vector10d doubled = exact + 2.0 * (off - exact);
  CHECK(regularizer(doubled, s) == doctest::Approx(4.0 * regularizer(off, s)));

  Vector10d bad = exact;
  bad(9) = 0.0;
  CHECK_THROWS_AS(regularizer(bad, s), NormalizationError);
  bad(9) = 1.0;
  CHECK_THROWS_AS(regularizer(bad, s), NormalizationError);
}

TEST_CASE("regularizer minimum for an elongated ellipsoid") {
  // Dual of x^2/4 + y^2 + z^2 = 1 is diag(4, 1, 1, -1); over spheres the
  // distance is minimized at t = 0, b = 1, a = mean of squared semi-axes = 2.
  const Vector10d v = vech<4>(Eigen::Matrix4d(Eigen::Vector4d(4, 1, 1, -1).asDiagonal()));
  double best = std::numeric_limits<double>::infinity();
  SphereParams arg;
  for (double tx = -0.5; tx <= 0.5; tx += 0.25)
    for (double a = 1.0; a <= 3.0; a += 0.05)
      for (double b = 0.8; b <= 1.2; b += 0.05) {
        const SphereParams s{{tx, 0, 0}, a, b};
        const double r = regularizer(v, s);
        CHECK(r > 0.0);
        if (r < best) {
          best = r;
          arg = s;
        }
      }
  CHECK(arg.t.norm() < 1e-12);
  CHECK(arg.a == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(arg.b == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(best == doctest::Approx(6.0));  // (4-2)^2 + (1-2)^2 + (1-2)^2
}

TEST_CASE("regularizer gradient matches central differences") {
  Rng rng(8);
  constexpr double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const SphereParams s = random_sphere(rng);
    Vector10d v = vech<4>(sphere_dual(random_sphere(rng)).m);
    v = normalize_dual(v);
    for (int k = 0; k < 9; ++k) v(k) += rng.uniform(-1, 1);

    const Eigen::Matrix<double, 15, 1> g = regularizer_gradient(v, s);
    Eigen::Matrix<double, 15, 1> fd;
    for (int k = 0; k < 15; ++k) {
      Vector10d vp = v, vm = v;
      SphereParams sp = s, sm = s;
      if (k < 10) {
        vp(k) += h;
        vm(k) -= h;
      } else if (k < 13) {
        sp.t(k - 10) += h;
        sm.t(k - 10) -= h;
      } else if (k == 13) {
        sp.a += h;
        sm.a -= h;
      } else {
        sp.b += h;
        sm.b -= h;
      }
      // The tenth element stays negative for these steps.
      fd(k) = (regularizer(vp, sp) - regularizer(vm, sm)) / (2 * h);
    }
    REQUIRE((g - fd).norm() / std::max(1.0, g.norm()) < 1e-4);
  }
}

TEST_CASE("initialization from a closed-form solution") {
  auto fake_cf = [](const Eigen::Matrix4d& Q, Eigen::VectorXd betas) {
    ClosedFormSolution cf;
    cf.primal = Quadric{Q};
    const Eigen::Matrix4d dual = adjugate(Q);
    cf.w.resize(10 + betas.size());
    cf.w << vech<4>(dual), betas;
    cf.w.normalize();
    cf.betas = cf.w.tail(betas.size());
    cf.dual_quadric = DualQuadric{dual};
    return cf;
  };

  const double r = 3.0;
  const Eigen::Vector3d c(1, -2, 4);
  const ClosedFormSolution sphere = fake_cf(test::quadric_oracle(c, {r, r, r}, Eigen::Matrix3d::Identity()),
                                            Eigen::Vector3d(0.5, -1, 2));
  const InitialGuess g = initialize(sphere);
  CHECK(g.sphere.a == doctest::Approx(r * r));
  CHECK(g.sphere.b == 1.0);
  CHECK((g.sphere.t - c).norm() < 1e-9);
  CHECK(g.v_hat(9) == doctest::Approx(-1.0));
  CHECK((g.betas - sphere.betas / (-sphere.w(9))).norm() < 1e-12);

  const ClosedFormSolution ell = fake_cf(
      test::quadric_oracle({0, 0, 0}, {1, 2, 4}, Eigen::Matrix3d::Identity()), Eigen::Vector2d(1, 1));
  CHECK(initialize(ell).sphere.a == doctest::Approx(4.0));

  // A hyperboloid still yields a sphere start.
  const ClosedFormSolution hyp = fake_cf(Eigen::Vector4d(1, -1, 1, -4).asDiagonal(), Eigen::Vector2d(1, 1));
  const InitialGuess gh = initialize(hyp);
  CHECK(gh.sphere.a > 0.0);
  CHECK(gh.sphere.t.norm() < 1e-12);

  ClosedFormSolution none = hyp;
  none.primal.reset();
  CHECK_THROWS_AS(initialize(none), InitializationFailed);
  const ClosedFormSolution cyl = fake_cf(Eigen::Vector4d(1, 1, 0, -1).asDiagonal(), Eigen::Vector2d(1, 1));
  CHECK_THROWS_AS(initialize(cyl), InitializationFailed);
}

TEST_CASE("analytic Jacobian matches central differences") {
  Rng rng(9);
  const CameraMap cams = arc_cameras(4);
  for (int i = 0; i < 100; ++i) {
    const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams);
    const RegularizedProblem p(build_system(obs, cams, kCond), std::exp(rng.uniform(-3, 3)));
    const Eigen::VectorXd x = random_point(p, rng);
    const Eigen::MatrixXd J = p.jacobian(x);
    REQUIRE(J.rows() == p.n_residuals());
    REQUIRE(J.cols() == p.n_params());
    Eigen::MatrixXd fd(J.rows(), J.cols());
    for (int k = 0; k < x.size(); ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp(k) += 1e-6;
      xm(k) -= 1e-6;
      fd.col(k) = (p.residual(xp) - p.residual(xm)) / 2e-6;
    }
    REQUIRE((J - fd).norm() / J.norm() < 1e-4);
  }
}

TEST_CASE("problem validation") {
  Rng rng(10);
  const CameraMap cams = arc_cameras(3);
  const StackedSystem sys = build_system(observe(test::random_ellipsoid(rng, 5.0), cams), cams, kCond);
  CHECK_THROWS_AS(RegularizedProblem(sys, -1.0), InvalidInput);
  CHECK_THROWS_AS(RegularizedProblem(sys, NAN), InvalidInput);
  const RegularizedProblem p(sys, 1.0);
  InitialGuess g{vech<4>(sphere_dual({}).m), Eigen::VectorXd::Ones(3), {}};
  g.sphere.a = 0.0;
  CHECK_THROWS_AS(p.pack(g), InvalidInput);
  g.sphere.a = 1.0;
  g.betas = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(p.pack(g), InvalidInput);
}

TEST_CASE("lambda = 0 reproduces the closed form on exact data") {
  Rng rng(11);
  const CameraMap cams = arc_cameras(6);
  RegularizedOptions opts;
  opts.lambda = 0.0;
  for (int i = 0; i < 20; ++i) {
    const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams);
    const ClosedFormSolution cf = solve_closed_form(obs, cams, kCond);
    const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond, opts);
    REQUIRE(sol.ellipsoid.valid());
    REQUIRE((*sol.ellipsoid.center - *cf.ellipsoid.center).norm() < 1e-6);
    REQUIRE((sol.ellipsoid.axes->semi_axes - cf.ellipsoid.axes->semi_axes).norm() < 1e-6);
    for (int k = 0; k < 3; ++k)
      REQUIRE(test::axis_angle(sol.ellipsoid.axes->rotation.col(k), cf.ellipsoid.axes->rotation.col(k)) < 1e-6);

    // Same minimum, zero in both parametrizations.
    const RegularizedProblem p(build_system(obs, cams, kCond), 0.0);
    InitialGuess at{vech<4>(sol.dual_quadric.m), sol.betas, sol.sphere};
    REQUIRE(std::sqrt(p.data_term(p.pack(at))) < 1e-8 * cf.sigma_max);
    REQUIRE(cf.residual < 1e-8 * cf.sigma_max);
  }
}

TEST_CASE("lambda = 0 on noisy data respects the smallest singular value") {
  Rng rng(12);
  const CameraMap cams = arc_cameras(6);
  RegularizedOptions opts;
  opts.lambda = 0.0;
  for (int i = 0; i < 10; ++i) {
    const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams, &rng, {ErrorKind::TE, 0.05});
    const StackedSystem sys = build_system(obs, cams, kCond);
    const ClosedFormSolution cf = solve_svd(sys);
    const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond, opts);
    const RegularizedProblem p(sys, 0.0);
    Eigen::VectorXd w(10 + 6);
    w << normalize_dual(vech<4>(sol.dual_quadric.m)), sol.betas;
    REQUIRE(p.data_term(p.pack({vech<4>(sol.dual_quadric.m), sol.betas, sol.sphere})) >=
            cf.residual * cf.residual * w.squaredNorm() * (1 - 1e-9));
  }
}

TEST_CASE("large lambda forces a sphere") {
  Rng rng(13);
  const CameraMap cams = arc_cameras(6);
  for (int i = 0; i < 10; ++i) {
    const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams);
    const ClosedFormSolution cf = solve_closed_form(obs, cams, kCond);
    RegularizedOptions opts;
    opts.lambda = 1e8 * cf.sigma_max * cf.sigma_max;
    const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond, opts);
    REQUIRE(sol.ellipsoid.valid());
    REQUIRE(sol.ellipsoid.axes->semi_axes.maxCoeff() / sol.ellipsoid.axes->semi_axes.minCoeff() <= 1.01);
  }
}

TEST_CASE("descent is monotone and the sphere stays positive") {
  Rng rng(14);
  const CameraMap cams = arc_cameras(5);
  for (int i = 0; i < 20; ++i) {
    const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams, &rng, {ErrorKind::SE, 0.3});
    const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond);
    REQUIRE(sol.cost_history.size() >= 1);
    for (std::size_t k = 1; k < sol.cost_history.size(); ++k)
      REQUIRE(sol.cost_history[k] <= sol.cost_history[k - 1]);
    REQUIRE(sol.sphere.a > 0.0);
    REQUIRE(sol.sphere.b > 0.0);
    REQUIRE(sol.iterations <= RegularizedOptions{}.max_iters);
  }
}

TEST_CASE("iteration cap reports non-convergence with the best iterate") {
  Rng rng(15);
  const CameraMap cams = arc_cameras(5);
  const ObjectObservations obs = observe(test::random_ellipsoid(rng, 8.0), cams, &rng, {ErrorKind::TE, 0.2});
  RegularizedOptions opts;
  opts.max_iters = 1;
  opts.tol_cost = 0.0;
  opts.tol_step = 0.0;
  const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond, opts);
  CHECK_FALSE(sol.converged);
  CHECK(sol.status == SolveStatus::MaxIterations);
  CHECK(sol.cost_history.back() <= sol.cost_history.front());
}

TEST_CASE("two exact views of a sphere") {
  const Ellipsoid3D g = Ellipsoid3D::make({1, -2, 3}, {4, 4, 4}, Eigen::Matrix3d::Identity());
  const CameraMap cams = cameras_at({{200, 0, 0}, {0, 200, 60}});
  const ObjectObservations obs = observe(g, cams);
  const RegularizedSolution sol = solve_pfd_reg(obs, cams, kCond);
  REQUIRE(sol.ellipsoid.valid());
  CHECK(volume_overlap(g, sol.ellipsoid, {100000, 1}).value >= 0.9);
}
