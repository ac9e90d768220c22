#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "pme/dataset.hpp"
#include "pme/errors.hpp"
#include "pme/gluing.hpp"
#include "pme/spline.hpp"

namespace {

pme::SplineMap interpolate(const pme::Matrix& params, const pme::Matrix& values,
                           double lambda = 0.0) {
  pme::Vector w = pme::Vector::Constant(params.rows(), 1.0 / double(params.rows()));
  return pme::solve(pme::assemble(params, values, w, lambda)).map;
}

// Parabola arc (tau, tau^2) sampled exactly over [lo, hi].
pme::SplineMap parabola_piece(double lo, double hi, int n = 25) {
  pme::Matrix params(n, 1), values(n, 2);
  for (int i = 0; i < n; ++i) {
    double tau = lo + (hi - lo) * i / double(n - 1);
    params(i, 0) = tau;
    values.row(i) << tau, tau * tau;
  }
  return interpolate(params, values);
}

pme::Matrix parabola_points(double lo, double hi, int n) {
  pme::Matrix Z(n, 2);
  for (int i = 0; i < n; ++i) {
    double tau = lo + (hi - lo) * i / double(n - 1);
    Z.row(i) << tau, tau * tau;
  }
  return Z;
}

struct ParabolaWeld {
  pme::SplineMap f1, f2;
  pme::GlueJunction junction;
};

ParabolaWeld make_weld() {
  ParabolaWeld w;
  w.f1 = parabola_piece(1.0, 2.8);
  w.f2 = parabola_piece(2.2, 4.0);
  pme::Matrix Z = parabola_points(2.2, 2.8, 40);
  pme::Vector xi1 = Z.row(0).transpose();   // anchor on the f1 side
  pme::Vector xi2 = Z.row(39).transpose();  // anchor on the f2 side
  w.junction = pme::build_junction(Z, xi1, xi2, 0);
  return w;
}

double blend_weight(const pme::GlueJunction& J, double zg) {
  double lo = (2.0 / 3.0) * J.B_L + (1.0 / 3.0) * J.B_U;
  double width = (J.B_U - J.B_L) / 3.0;
  return pme::kappa((zg - lo) / width);
}

// Hand-assembled junction with no rotation, for exercising chart inversion
// in isolation. box rows are (lo, hi) per ambient coordinate.
pme::GlueJunction identity_junction(const pme::Matrix& box) {
  pme::GlueJunction J;
  const int D = static_cast<int>(box.rows());
  J.R = pme::Matrix::Identity(D, D);
  J.g = 0;
  J.box = box;
  J.B_L = box(0, 0);
  J.B_U = box(0, 1);
  J.rot_mean = 0.5 * (box.col(0) + box.col(1));
  J.xi1 = box.col(0);
  J.xi2 = box.col(1);
  J.data_box = box;
  return J;
}

}  // namespace

TEST_CASE("blending weight endpoints, midpoint and clamps") {
  CHECK(pme::kappa(0.0) == 1.0);
  CHECK(pme::kappa(1.0) == 0.0);
  CHECK(pme::kappa(0.5) == doctest::Approx(0.5).epsilon(1e-15));  // 1 - 0.75 + 0.25
  CHECK(pme::kappa(-2.0) == 1.0);
  CHECK(pme::kappa(3.0) == 0.0);
}

TEST_CASE("blending weight is C1 and monotone on the unit interval") {
  // derivative vanishes at both ends: finite differences across the clamps
  double h = 1e-7;
  CHECK(std::abs(pme::kappa(h) - pme::kappa(-h)) / (2 * h) <= 1e-5);
  CHECK(std::abs(pme::kappa(1 + h) - pme::kappa(1 - h)) / (2 * h) <= 1e-5);
  for (int i = 0; i + 1 <= 100; ++i) {
    double a = i / 100.0, b = (i + 1) / 100.0;
    CHECK(pme::kappa(b) <= pme::kappa(a) + 1e-15);
  }
}

TEST_CASE("junction construction on an axis-aligned slab") {
  // points spread mostly along x, slightly along y: principal axes = identity
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  pme::Matrix Z(60, 2);
  for (int i = 0; i < 60; ++i) Z.row(i) << 3.0 * u(rng), 0.2 * u(rng);
  pme::Vector xi1(2), xi2(2);
  xi1 << -2.5, 0.0;
  xi2 << 2.5, 0.0;
  pme::GlueJunction J = pme::build_junction(Z, xi1, xi2, 0);

  // rotation is orthogonal and axis-aligned up to sign and the small tilt a
  // finite sample's principal axes carry
  CHECK((J.R * J.R.transpose() - pme::Matrix::Identity(2, 2)).norm() <= 1e-10);
  CHECK(std::abs(std::abs(J.R.determinant()) - 1.0) <= 1e-10);
  CHECK(std::abs(J.R(0, 0)) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(J.R(1, 1)) == doctest::Approx(1.0).epsilon(1e-4));

  // box = coordinate bounding box of the rotated points
  pme::Matrix RZ = (J.R * Z.transpose()).transpose();
  CHECK(J.box(0, 0) == doctest::Approx(RZ.col(0).minCoeff()).epsilon(1e-12));
  CHECK(J.box(0, 1) == doctest::Approx(RZ.col(0).maxCoeff()).epsilon(1e-12));
  CHECK(J.B_L == doctest::Approx(J.box(0, 0)));
  CHECK(J.B_U == doctest::Approx(J.box(0, 1)));

  // the first anchor sits at the low end of the blend axis
  CHECK((J.R * xi1)(J.g) <= (J.R * xi2)(J.g));

  SUBCASE("swapping the anchors flips the gluing row and reflects the bounds") {
    pme::GlueJunction Jswap = pme::build_junction(Z, xi2, xi1, 0);
    CHECK((Jswap.R.row(0) + J.R.row(0)).norm() <= 1e-10);
    CHECK(Jswap.B_L == doctest::Approx(-J.B_U).epsilon(1e-12));
    CHECK(Jswap.B_U == doctest::Approx(-J.B_L).epsilon(1e-12));
  }
}

TEST_CASE("junction construction rejects unusable overlaps") {
  pme::Vector left(2), right(2);
  left << -1.0, 0.0;
  right << 1.0, 0.0;

  SUBCASE("too few points") {
    pme::Matrix Z(2, 2);
    Z << -1, 0, /**/ 1, 0;
    CHECK_THROWS_AS(pme::build_junction(Z, left, right, 0), pme::ValidationError);
  }
  SUBCASE("coincident anchors") {
    pme::Matrix Z(10, 2);
    for (int i = 0; i < 10; ++i) Z.row(i) << 0.3 * i, 0.1 * (i % 3);
    CHECK_THROWS_AS(pme::build_junction(Z, left, left, 0), pme::ValidationError);
  }
  SUBCASE("no variance along the requested axis") {
    pme::Matrix Z(10, 2);
    for (int i = 0; i < 10; ++i) Z.row(i) << -1.0 + 2.0 * i / 9.0, 0.0;
    CHECK_THROWS_AS(pme::build_junction(Z, left, right, 1), pme::NumericalError);
  }
}

TEST_CASE("blend weight crosses from one to zero over the middle third") {
  ParabolaWeld w = make_weld();
  const pme::GlueJunction& J = w.junction;
  REQUIRE(J.g == 0);
  pme::Matrix Z = parabola_points(2.2, 2.8, 200);
  std::vector<double> zg(200);
  for (int i = 0; i < 200; ++i) zg[size_t(i)] = (J.R * Z.row(i).transpose())(J.g);
  std::sort(zg.begin(), zg.end());
  double prev = 2.0;
  for (double z : zg) {
    double K = blend_weight(J, z);
    CHECK(K <= prev + 1e-15);  // non-increasing along the axis
    prev = K;
  }
  CHECK(blend_weight(J, zg.front()) == 1.0);
  CHECK(blend_weight(J, zg.back()) == 0.0);
  double third_lo = (2.0 / 3.0) * J.B_L + (1.0 / 3.0) * J.B_U;
  double third_hi = (1.0 / 3.0) * J.B_L + (2.0 / 3.0) * J.B_U;
  CHECK(blend_weight(J, third_lo) == 1.0);
  CHECK(blend_weight(J, third_hi) == 0.0);
  CHECK(blend_weight(J, 0.5 * (third_lo + third_hi)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chart inversion") {
  SUBCASE("affine map with identity rotation reduces to a linear solve") {
    pme::SplineMap f;
    f.d = 1;
    f.D = 2;
    f.centers.resize(3, 1);
    f.centers << -1, 0, 1;
    f.kernel = pme::Matrix::Zero(3, 2);
    f.affine.resize(2, 2);
    f.affine << 0.5, -1.0, /**/ 2.0, 1.0;  // f(t) = (0.5 + 2t, -1 + t)
    pme::Matrix box(2, 2);
    box << -1.5, 2.5, /**/ -2.0, 0.0;
    pme::GlueJunction J = identity_junction(box);
    pme::Vector zeta(1);
    zeta << 1.7;  // 0.5 + 2t = 1.7 -> t = 0.6
    pme::Vector t = pme::invert_chart(f, J, zeta);
    CHECK(t[0] == doctest::Approx(0.6).epsilon(1e-10));
  }
  SUBCASE("round trip on a fitted curve") {
    ParabolaWeld w = make_weld();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(2.25, 2.75);
    for (int rep = 0; rep < 10; ++rep) {
      pme::Vector t0(1);
      t0 << u(rng);
      pme::Vector zeta = (w.junction.R * w.f1.eval(t0)).head(1);
      pme::Vector t = pme::invert_chart(w.f1, w.junction, zeta);
      CHECK(t[0] == doctest::Approx(t0[0]).epsilon(1e-8));
    }
  }
  SUBCASE("folded charts raise an inversion error") {
    // curve (t^2, t): the first coordinate folds at t = 0, so zeta = -0.5
    // has no preimage and the iteration must report failure
    pme::Matrix params(9, 1), values(9, 2);
    for (int i = 0; i < 9; ++i) {
      double t = -1.0 + 0.25 * i;
      params(i, 0) = t;
      values.row(i) << t * t, t;
    }
    pme::SplineMap fold = interpolate(params, values);
    pme::Matrix box(2, 2);
    box << 0.0, 1.0, /**/ -1.0, 1.0;
    pme::GlueJunction J = identity_junction(box);
    pme::Vector zeta(1);
    zeta << -0.5;
    CHECK_THROWS_AS(pme::invert_chart(fold, J, zeta), pme::NumericalError);
  }
}

TEST_CASE("glued evaluation matches the pure branches outside the middle third") {
  ParabolaWeld w = make_weld();
  const pme::GlueJunction& J = w.junction;
  double third_lo = (2.0 / 3.0) * J.B_L + (1.0 / 3.0) * J.B_U;
  double third_hi = (1.0 / 3.0) * J.B_L + (2.0 / 3.0) * J.B_U;

  for (double frac : {0.05, 0.5, 0.95}) {
    pme::Vector zeta(1);
    // weight-one slab: from B_L to the first third boundary
    zeta << J.B_L + frac * (third_lo - J.B_L);
    pme::Vector g = pme::glue_eval(w.f1, w.f2, J, zeta);
    pme::Vector pure = w.f1.eval(pme::invert_chart(w.f1, J, zeta));
    CHECK((g - pure).norm() <= 1e-12);

    // weight-zero slab: from the second third boundary to B_U
    zeta << third_hi + frac * (J.B_U - third_hi);
    g = pme::glue_eval(w.f1, w.f2, J, zeta);
    pure = w.f2.eval(pme::invert_chart(w.f2, J, zeta));
    CHECK((g - pure).norm() <= 1e-12);
  }
}

TEST_CASE("gluing a piece to itself reproduces the piece") {
  ParabolaWeld w = make_weld();
  const pme::GlueJunction& J = w.junction;
  for (double frac : {0.1, 0.4, 0.6, 0.9}) {
    pme::Vector zeta(1);
    zeta << J.B_L + frac * (J.B_U - J.B_L);
    pme::Vector g = pme::glue_eval(w.f1, w.f1, J, zeta);
    pme::Vector pure = w.f1.eval(pme::invert_chart(w.f1, J, zeta));
    CHECK((g - pure).norm() <= 1e-10);
  }
}

TEST_CASE("welded curve is continuous with a continuous first derivative") {
  ParabolaWeld w = make_weld();
  const pme::GlueJunction& J = w.junction;
  double third_lo = (2.0 / 3.0) * J.B_L + (1.0 / 3.0) * J.B_U;
  double third_hi = (1.0 / 3.0) * J.B_L + (2.0 / 3.0) * J.B_U;
  const double h = 1e-5 * (J.B_U - J.B_L);

  auto G = [&](double z) {
    pme::Vector zeta(1);
    zeta << z;
    return pme::glue_eval(w.f1, w.f2, J, zeta);
  };
  // one-sided slopes agree where the blend weight switches on and off
  for (double boundary : {third_lo, third_hi}) {
    pme::Vector d_in = (G(boundary + 2 * h) - G(boundary)) / (2 * h);
    pme::Vector d_out = (G(boundary) - G(boundary - 2 * h)) / (2 * h);
    double scale = std::max(d_in.norm(), d_out.norm());
    CHECK((d_in - d_out).norm() / scale <= 1e-4);
  }
}

TEST_CASE("ring fitting partitions the band and welds every seam") {
  const int I = fixtures::sphere_cloud().count();
  const pme::ClosedFit& cf = fixtures::sphere_ring_fit();

  REQUIRE(cf.piece_count() == 6);
  REQUIRE(cf.junctions.size() == 6);
  REQUIRE(cf.sector.size() == size_t(I));
  CHECK(cf.d == 2);
  CHECK(cf.D == 3);

  // sectors are balanced on a rotationally uniform sample
  std::vector<int> counts(6, 0);
  for (int s : cf.sector) {
    REQUIRE(s >= 0);
    REQUIRE(s < 6);
    counts[size_t(s)]++;
  }
  int lo = *std::min_element(counts.begin(), counts.end());
  int hi = *std::max_element(counts.begin(), counts.end());
  CHECK(lo > 0);
  CHECK(hi <= 3 * lo);

  // every piece fit converged on the noiseless band
  REQUIRE(cf.info.size() == 6);
  for (const pme::PieceInfo& info : cf.info) {
    CHECK(info.converged);
    CHECK(info.msd < 1e-2);
  }

  // junction invariants
  for (const pme::GlueJunction& J : cf.junctions) {
    CHECK((J.R * J.R.transpose() - pme::Matrix::Identity(3, 3)).norm() <= 1e-10);
    CHECK(J.B_L < J.B_U);
    CHECK(J.g >= 0);
    CHECK(J.g < 2);
    CHECK((J.R * J.xi1)(J.g) <= (J.R * J.xi2)(J.g) + 1e-12);
  }

  // seam continuity: the blend equals each piece on its pure slab
  for (int k = 0; k < 6; ++k) {
    const pme::GlueJunction& J = cf.junctions[size_t(k)];
    const pme::SplineMap& f1 = cf.pieces[size_t(k)];
    const pme::SplineMap& f2 = cf.pieces[size_t((k + 1) % 6)];
    double third_lo = (2.0 / 3.0) * J.B_L + (1.0 / 3.0) * J.B_U;
    double third_hi = (1.0 / 3.0) * J.B_L + (2.0 / 3.0) * J.B_U;
    pme::Vector mid = 0.5 * (J.box.col(0) + J.box.col(1));
    int checked = 0;
    for (double frac : {0.2, 0.8}) {
      pme::Vector zeta = mid.head(cf.d);
      zeta[J.g] = J.B_L + frac * (third_lo - J.B_L);
      try {
        pme::Vector g = pme::glue_eval(f1, f2, J, zeta);
        pme::Vector pure = f1.eval(pme::invert_chart(f1, J, zeta));
        CHECK((g - pure).norm() <= 1e-8);
        ++checked;
      } catch (const pme::NumericalError&) {
        // probe fell off the invertible patch; acceptable for edge rows
      }
      zeta[J.g] = third_hi + frac * (J.B_U - third_hi);
      try {
        pme::Vector g = pme::glue_eval(f1, f2, J, zeta);
        pme::Vector pure = f2.eval(pme::invert_chart(f2, J, zeta));
        CHECK((g - pure).norm() <= 1e-8);
        ++checked;
      } catch (const pme::NumericalError&) {
      }
    }
    CHECK(checked >= 2);
  }
}

TEST_CASE("ring fitting rejects an oversized piece count") {
  pme::PointCloud cloud = pme::generate({pme::Setting::PunchedSphereNoiseless, 40, 1});
  pme::FitClosedOptions opts;
  opts.lambda = 1e-3;
  // 30 sectors over 40 points leaves some nearly or fully empty
  CHECK_THROWS_AS(pme::fit_closed(cloud.points, 30, opts), pme::ValidationError);
}
