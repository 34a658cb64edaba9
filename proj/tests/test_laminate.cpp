#include "doctest.h"

#include "lamopt/laminate.hpp"

#include <Eigen/QR>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace lamopt;
using Mat = IsotropicMaterial<double>;
using Params = LaminateParams<double>;

namespace {

constexpr double kPi = std::numbers::pi;

Sym2<double> sym(double a, double b, double c) {
  Sym2<double> s;
  s << a, b, b, c;
  return s;
}

// Rotation by explicit fourth-order transformation C*_mnop = Q_mi Q_nj Q_ok Q_pl C_ijkl.
VoigtTensor<double> rotate_fourth_order(const VoigtTensor<double>& cv, double alpha) {
  const int voigt[2][2] = {{0, 2}, {2, 1}};
  double c[2][2][2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) c[i][j][k][l] = cv(voigt[i][j], voigt[k][l]);
  Eigen::Matrix2d q;
  q << std::cos(alpha), -std::sin(alpha), std::sin(alpha), std::cos(alpha);
  double r[2][2][2][2] = {};
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n)
      for (int o = 0; o < 2; ++o)
        for (int p = 0; p < 2; ++p)
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                  r[m][n][o][p] += q(m, i) * q(n, j) * q(o, k) * q(p, l) * c[i][j][k][l];
  VoigtTensor<double> out;
  out << r[0][0][0][0], r[0][0][1][1], r[0][0][0][1],
         r[1][1][0][0], r[1][1][1][1], r[1][1][0][1],
         r[0][1][0][0], r[0][1][1][1], r[0][1][0][1];
  return out;
}

// Energy of the laminate with the optimal (alpha, m) for sigma at density theta,
// by pseudo-inverting the unregularised (singular) Voigt matrix.
double inverted_laminate_energy(const Sym2<double>& sigma, double theta, const Mat& mat) {
  Params p = params_from_stress(sigma, 1.0, mat);
  p.theta = theta;
  const VoigtTensor<double> c = effective_tensor(p, mat, 0.0);
  const Voigt<double> s = to_voigt_stress(sigma);
  const Voigt<double> e = c.completeOrthogonalDecomposition().pseudoInverse() * s;
  return s.dot(e);
}

}  // namespace

TEST_CASE("eig_sym2 conventions") {
  auto e = eig_sym2(sym(2, 0, 1));
  CHECK(e.lambda1 == 2);
  CHECK(e.lambda2 == 1);
  CHECK(e.tau1.isApprox(Eigen::Vector2d(1, 0)));

  e = eig_sym2(sym(0, 1, 0));
  CHECK(e.lambda1 == doctest::Approx(1));
  CHECK(e.lambda2 == doctest::Approx(-1));
  CHECK(e.tau1.isApprox(Eigen::Vector2d(1, 1) / std::sqrt(2.0)));

  for (double c : {3.0, -2.0, 0.0}) {
    e = eig_sym2(sym(c, 0, c));
    CHECK(e.lambda1 == c);
    CHECK(e.lambda2 == c);
    CHECK(e.tau1 == Eigen::Vector2d(1, 0));
  }

  // dominant negative eigenvalue comes first
  e = eig_sym2(sym(-3, 0, 1));
  CHECK(e.lambda1 == -3);
  CHECK(e.tau1.isApprox(Eigen::Vector2d(1, 0)));
  e = eig_sym2(sym(1, 0, -3));
  CHECK(e.lambda1 == -3);
  CHECK(e.tau1.isApprox(Eigen::Vector2d(0, 1)));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 200; ++k) {
    const Sym2<double> s = sym(u(rng), u(rng), u(rng));
    e = eig_sym2(s);
    CHECK(std::abs(e.lambda1) >= std::abs(e.lambda2));
    CHECK((s * e.tau1 - e.lambda1 * e.tau1).norm() < 1e-13);
    CHECK((s * e.tau2 - e.lambda2 * e.tau2).norm() < 1e-13);
    CHECK(e.tau1.dot(e.tau2) == doctest::Approx(0).epsilon(1e-14));
    CHECK(e.tau1(0) >= 0);
  }
}

TEST_CASE("params_from_stress") {
  const Mat mat{1, 1};
  Params p = params_from_stress(sym(2, 0, 1), 13.5, mat);
  CHECK(p.theta == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p.m == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p.alpha == 0);

  p = params_from_stress(sym(0, 0, 0), 13.5, mat);
  CHECK(p.alpha == 0);
  CHECK(p.m == 0.5);
  CHECK(p.theta == kClampEps);

  p = params_from_stress(sym(-0.7, 0, -0.7), 2.0, mat);
  CHECK(p.m == 0.5);

  // theta saturates at 1 and is clamped below
  CHECK(params_from_stress(sym(100, 0, 0), 1.0, mat).theta == 1.0);
  CHECK(params_from_stress(sym(1e-9, 0, 0), 1.0, mat).theta == kClampEps);
  // alpha normalised to [-pi/2, pi/2)
  CHECK(params_from_stress(sym(0, 0, 1), 1.0, mat).alpha == doctest::Approx(-kPi / 2));
}

TEST_CASE("theta is nondecreasing in the eigenvalue sum and nonincreasing in l") {
  const Mat mat{0.5, 1.3};
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 200; ++k) {
    const Sym2<double> s = sym(u(rng), u(rng), u(rng));
    const double l = 0.1 + std::abs(u(rng));
    const double t = params_from_stress(s, l, mat).theta;
    CHECK(params_from_stress(Sym2<double>(1.5 * s), l, mat).theta >= t);
    CHECK(params_from_stress(s, 2 * l, mat).theta <= t);
  }
}

TEST_CASE("effective tensor special cases") {
  const Mat mat{0.7, 1.2};
  for (double m : {0.1, 0.5, 0.9}) {
    const VoigtTensor<double> c = effective_tensor(Params{0.0, m, 1.0}, mat);
    CHECK(c(0, 0) == doctest::Approx(mat.lam + 2 * mat.mu).epsilon(1e-13));
    CHECK(c(1, 1) == doctest::Approx(mat.lam + 2 * mat.mu).epsilon(1e-13));
    CHECK(c(0, 1) == doctest::Approx(mat.lam).epsilon(1e-13));
    CHECK(c(2, 2) == kShearRegularization);
  }
  const VoigtTensor<double> ref = laminate_tensor(0.3, 0.6, mat);
  CHECK(effective_tensor(Params{0.0, 0.3, 0.6}, mat) == ref);
  const VoigtTensor<double> quarter = effective_tensor(Params{kPi / 2, 0.3, 0.6}, mat);
  CHECK(quarter(0, 0) == doctest::Approx(ref(1, 1)).epsilon(1e-13));
  CHECK(quarter(1, 1) == doctest::Approx(ref(0, 0)).epsilon(1e-13));
}

TEST_CASE("Voigt rotation agrees with the explicit fourth-order transformation") {
  const Mat mat{1.1, 0.8};
  for (double alpha : {-1.3, -0.4, 0.0, 0.3, 1.0, 1.5})
    for (double m : {0.2, 0.45})
      for (double theta : {0.3, 0.9}) {
        const VoigtTensor<double> c_ref = laminate_tensor(m, theta, mat);
        const VoigtTensor<double> a = effective_tensor(Params{alpha, m, theta}, mat);
        const VoigtTensor<double> b = rotate_fourth_order(c_ref, alpha);
        CHECK((a - b).norm() <= 1e-13 * b.norm());
        CHECK((a - a.transpose()).norm() <= 1e-14 * a.norm());
      }
}

TEST_CASE("rotation periodicity and the m <-> 1-m exchange") {
  const Mat mat{1, 1};
  for (double alpha = -1.5; alpha < 1.5; alpha += 0.25)
    for (double m = 0.1; m < 0.95; m += 0.2)
      for (double theta = 0.1; theta < 0.95; theta += 0.2) {
        const VoigtTensor<double> c = effective_tensor(Params{alpha, m, theta}, mat);
        const VoigtTensor<double> c_pi = effective_tensor(Params{alpha + kPi, m, theta}, mat);
        CHECK((c - c_pi).cwiseAbs().maxCoeff() <= 1e-12);
        const VoigtTensor<double> swapped =
            effective_tensor(Params{alpha + kPi / 2, 1 - m, theta}, mat);
        CHECK((c - swapped).cwiseAbs().maxCoeff() <= 1e-10);
      }
}

TEST_CASE("tensor derivatives match central differences") {
  const Mat mat{1, 1};
  const double step = 1e-6;
  for (int i = 1; i <= 9; ++i)
    for (int j = 1; j <= 9; ++j) {
      const double m = 0.1 * i, theta = 0.1 * j;
      const auto [dm, dt] = tensor_derivatives(Params{0.0, m, theta}, mat);
      const VoigtTensor<double> fd_m =
          (laminate_tensor(m + step, theta, mat) - laminate_tensor(m - step, theta, mat)) /
          (2 * step);
      const VoigtTensor<double> fd_t =
          (laminate_tensor(m, theta + step, mat) - laminate_tensor(m, theta - step, mat)) /
          (2 * step);
      for (auto [r, c] : {std::pair{0, 0}, {1, 1}, {0, 1}}) {
        CHECK(std::abs(dm(r, c) - fd_m(r, c)) <= 1e-6 * std::max(std::abs(fd_m(r, c)), 1e-3));
        CHECK(std::abs(dt(r, c) - fd_t(r, c)) <= 1e-6 * std::max(std::abs(fd_t(r, c)), 1e-3));
      }
      CHECK(dm(2, 2) == 0);
      CHECK(dt(2, 2) == 0);
    }
  const auto [dm, dt] = tensor_derivatives(Params{0.0, 0.5, 0.6}, mat);
  CHECK(dm(0, 0) == doctest::Approx(-dm(1, 1)).epsilon(1e-13));
  CHECK(std::abs(dm(0, 1)) <= 1e-15);
}

TEST_CASE("Hashin-Shtrikman energy density") {
  const Mat mat{1, 1};
  CHECK(isotropic_compliance_energy(sym(1, 0, 1), mat) == doctest::Approx(0.5));
  CHECK(hs_energy_density(sym(1, 0, 1), 0.5, mat) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(hs_energy_density(sym(0, 0, 0), 0.3, mat) == 0);
  CHECK(hs_energy_density(sym(1.2, 0.3, -0.4), 1.0, mat) ==
        isotropic_compliance_energy(sym(1.2, 0.3, -0.4), mat));
  // the isotropic energy agrees with inverting the isotropic tensor
  const Mat other{0.4, 1.7};
  const Sym2<double> s = sym(0.9, -0.2, 0.35);
  const Voigt<double> sv = to_voigt_stress(s);
  CHECK(isotropic_compliance_energy(s, other) ==
        doctest::Approx(sv.dot(other.tensor().inverse() * sv)).epsilon(1e-13));
}

TEST_CASE("optimal laminate attains the Hashin-Shtrikman energy for any alpha branch") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const Mat mat : {Mat{1, 1}, Mat{1.3, 0.7}, Mat{0.0, 2.0}}) {
    for (int k = 0; k < 100; ++k) {
      const Sym2<double> s = sym(u(rng), u(rng), u(rng));
      const auto e = eig_sym2(s);
      if (std::abs(e.lambda2) < 1e-2 * std::abs(e.lambda1)) continue;  // m clamp
      for (double theta : {0.1, 0.5, 0.9}) {
        const double hs = hs_energy_density(s, theta, mat);
        const double inv = inverted_laminate_energy(s, theta, mat);
        CHECK(std::abs(inv - hs) <= 1e-6 * hs);
        // the other labelling (alpha + pi/2, 1 - m) gives the same tensor and energy
        Params p = params_from_stress(s, 1.0, mat);
        p.theta = theta;
        Params q{p.alpha + kPi / 2, 1 - p.m, theta};
        const Voigt<double> sv = to_voigt_stress(s);
        const double inv_q = sv.dot(
            effective_tensor(q, mat, 0.0).completeOrthogonalDecomposition().pseudoInverse() * sv);
        CHECK(std::abs(inv_q - hs) <= 1e-6 * hs);
      }
    }
  }
}

namespace {

// Strain whose laminate stress has eigenvalues (l1, l2) along the frame of alpha.
Sym2<double> strain_for(double alpha, double l1, double l2, double theta, const Mat& mat) {
  const double m = std::abs(l2) / (std::abs(l1) + std::abs(l2));
  const VoigtTensor<double> c = laminate_tensor(m, theta, mat);
  const Eigen::Vector2d e_ref = c.topLeftCorner<2, 2>().inverse() * Eigen::Vector2d(l1, l2);
  Sym2<double> e;
  e << e_ref(0), 0, 0, e_ref(1);
  Eigen::Matrix2d q;
  q << std::cos(alpha), -std::sin(alpha), std::sin(alpha), std::cos(alpha);
  return q * e * q.transpose();
}

}  // namespace

TEST_CASE("Newton recovery round trip") {
  const Mat mat{1, 1};
  const double alpha = 0.4, m = 0.3, theta = 0.7;
  const double l1 = 1.4, l2 = -1.4 * m / (1 - m);
  const Sym2<double> eps = strain_for(alpha, l1, l2, theta, mat);

  // stress of the laminate at these parameters has the prescribed eigen-pairs
  const Voigt<double> sv = effective_tensor(Params{alpha, m, theta}, mat) * to_voigt_strain(eps);
  const auto e = eig_sym2(from_voigt_stress(sv));
  CHECK(e.lambda1 == doctest::Approx(l1).epsilon(1e-12));
  CHECK(e.lambda2 == doctest::Approx(l2).epsilon(1e-12));

  auto exact = recover_params_newton(eps, theta, Eigen::Vector3d(alpha, l1, l2), mat);
  CHECK(exact.converged);
  CHECK(exact.iterations <= 1);
  CHECK(exact.residual <= 1e-12);

  auto from_params = recover_params_newton(eps, theta, Params{alpha, m, theta}, mat);
  CHECK(from_params.converged);
  CHECK(from_params.iterations <= 1);

  auto perturbed =
      recover_params_newton(eps, theta, Eigen::Vector3d(alpha + 0.05, l1 + 0.05, l2 + 0.05), mat);
  REQUIRE(perturbed.converged);
  CHECK(std::abs(perturbed.alpha - alpha) <= 1e-8);
  CHECK(std::abs(perturbed.m - m) <= 1e-8);
  CHECK(perturbed.lambda1 == doctest::Approx(l1).epsilon(1e-8));

  // starting from the swapped labelling still reports |lambda1| >= |lambda2|
  auto swapped =
      recover_params_newton(eps, theta, Eigen::Vector3d(alpha + kPi / 2, l2, l1), mat);
  REQUIRE(swapped.converged);
  CHECK(std::abs(swapped.alpha - alpha) <= 1e-8);
  CHECK(std::abs(swapped.m - m) <= 1e-8);

  auto zero = recover_params_newton(Sym2<double>::Zero().eval(), theta, Params{alpha, m, theta}, mat);
  CHECK_FALSE(zero.converged);
}

TEST_CASE("Newton Jacobian direction: residual decreases quadratically") {
  const Mat mat{1.3, 0.7};
  const Sym2<double> eps = strain_for(-0.9, -2.0, 0.5, 0.35, mat);
  auto r = recover_params_newton(eps, 0.35, Eigen::Vector3d(-0.8, -1.8, 0.6), mat);
  REQUIRE(r.converged);
  CHECK(r.iterations <= 8);
  CHECK(r.alpha == doctest::Approx(-0.9).epsilon(1e-9));
  CHECK(r.lambda1 == doctest::Approx(-2.0).epsilon(1e-9));
}
