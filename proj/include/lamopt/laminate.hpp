#pragma once

// Rank-2 sequential laminate of an isotropic material and void: optimal
// parameters from a stress, the closed-form effective tensor in Voigt form,
// its parameter derivatives and the inverse (strain -> parameter) recovery.
//
// Voigt convention used throughout: strain (e11, e22, 2 e12), stress
// (s11, s22, s12). The shear diagonal entry stores C1212.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace lamopt {

template <typename Scalar> using Sym2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Voigt = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using VoigtTensor = Eigen::Matrix<Scalar, 3, 3>;

/// Lower clamp for m and theta; upper clamp for m is 1 - kClampEps.
inline constexpr double kClampEps = 1e-3;
/// Constant shear stiffness added to the (otherwise singular) laminate.
inline constexpr double kShearRegularization = 1e-2;

template <typename Scalar = double>
struct IsotropicMaterial {
  Scalar lam = 1;
  Scalar mu = 1;

  Scalar kappa() const { return lam + mu; }
  bool valid() const { return mu > 0 && lam >= 0; }

  VoigtTensor<Scalar> tensor() const {
    VoigtTensor<Scalar> c;
    c << lam + 2 * mu, lam, 0,
         lam, lam + 2 * mu, 0,
         0, 0, mu;
    return c;
  }
};

template <typename Scalar = double>
struct LaminateParams {
  Scalar alpha = 0;  ///< lamination direction, radians in [-pi/2, pi/2)
  Scalar m = Scalar(0.5);
  Scalar theta = 1;
};

template <typename Scalar = double>
struct Eigen2 {
  Scalar lambda1;
  Scalar lambda2;
  Eigen::Matrix<Scalar, 2, 1> tau1;
  Eigen::Matrix<Scalar, 2, 1> tau2;
};

template <typename Scalar>
Voigt<Scalar> to_voigt_strain(const Sym2<Scalar>& e) {
  return Voigt<Scalar>(e(0, 0), e(1, 1), 2 * e(0, 1));
}

template <typename Scalar>
Voigt<Scalar> to_voigt_stress(const Sym2<Scalar>& s) {
  return Voigt<Scalar>(s(0, 0), s(1, 1), s(0, 1));
}

template <typename Scalar>
Sym2<Scalar> from_voigt_stress(const Voigt<Scalar>& v) {
  Sym2<Scalar> s;
  s << v(0), v(2), v(2), v(1);
  return s;
}

template <typename Scalar>
Sym2<Scalar> from_voigt_strain(const Voigt<Scalar>& v) {
  Sym2<Scalar> e;
  e << v(0), v(2) / 2, v(2) / 2, v(1);
  return e;
}

/// Maps an angle to [-pi/2, pi/2).
template <typename Scalar>
Scalar normalize_angle(Scalar a) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::fmod(a + pi / 2, pi);
  if (a < 0) a += pi;
  return a - pi / 2;
}

/// Closed-form eigendecomposition of a symmetric 2x2 matrix, ordered so that
/// |lambda1| >= |lambda2| (ties: lambda1 >= lambda2). tau1 has a nonnegative
/// x component (ties: nonnegative y); tau2 is tau1 rotated by +90 degrees.
/// For a multiple of the identity tau1 = (1, 0).
template <typename Scalar>
Eigen2<Scalar> eig_sym2(const Sym2<Scalar>& s) {
  using std::atan2, std::cos, std::hypot, std::sin;
  const Scalar a = s(0, 0), b = (s(0, 1) + s(1, 0)) / 2, c = s(1, 1);
  const Scalar mean = (a + c) / 2;
  const Scalar radius = hypot((a - c) / 2, b);

  Eigen2<Scalar> out;
  Eigen::Matrix<Scalar, 2, 1> t;
  if (radius == 0) {
    out.lambda1 = out.lambda2 = mean;
    t << 1, 0;
  } else {
    const Scalar phi = atan2(2 * b, a - c) / 2;  // direction of mean + radius
    if (mean >= 0) {
      out.lambda1 = mean + radius;
      out.lambda2 = mean - radius;
      t << cos(phi), sin(phi);
    } else {
      out.lambda1 = mean - radius;
      out.lambda2 = mean + radius;
      t << -sin(phi), cos(phi);
    }
    if (t(0) < 0 || (t(0) == 0 && t(1) < 0)) t = -t;
  }
  out.tau1 = t;
  out.tau2 << -t(1), t(0);
  return out;
}

/// sqrt((2 mu + lambda) / (4 mu (mu + lambda))): theta = min(1, k S / sqrt(l)).
template <typename Scalar>
Scalar density_coefficient(const IsotropicMaterial<Scalar>& mat) {
  using std::sqrt;
  return sqrt((2 * mat.mu + mat.lam) / (4 * mat.mu * (mat.mu + mat.lam)));
}

/// Density from the eigenvalue sum S = |l1| + |l2| at multiplier l, clamped
/// to [eps, 1].
template <typename Scalar>
Scalar density_from_stress_sum(Scalar stress_sum, Scalar l,
                               const IsotropicMaterial<Scalar>& mat) {
  using std::sqrt;
  const Scalar theta = density_coefficient(mat) * stress_sum / sqrt(l);
  return std::clamp(theta, Scalar(kClampEps), Scalar(1));
}

/// Optimal laminate parameters for stress `sigma` at volume multiplier `l`.
/// sigma = 0 gives (0, 1/2, eps).
template <typename Scalar>
LaminateParams<Scalar> params_from_stress(const Sym2<Scalar>& sigma, Scalar l,
                                          const IsotropicMaterial<Scalar>& mat) {
  using std::abs, std::atan2;
  const Eigen2<Scalar> e = eig_sym2(sigma);
  const Scalar sum = abs(e.lambda1) + abs(e.lambda2);
  LaminateParams<Scalar> p;
  if (sum == 0) {
    p.alpha = 0;
    p.m = Scalar(0.5);
    p.theta = Scalar(kClampEps);
    return p;
  }
  p.alpha = normalize_angle(atan2(e.tau1(1), e.tau1(0)));
  p.m = std::clamp(abs(e.lambda2) / sum, Scalar(kClampEps), Scalar(1 - kClampEps));
  p.theta = density_from_stress_sum(sum, l, mat);
  return p;
}

namespace detail {

// Numerators and common denominator of the three normal entries of the
// unrotated laminate tensor together with their m- and theta-derivatives.
template <typename Scalar>
struct LaminateRational {
  Scalar n11, n22, n12, den;
  Scalar n11_m, n22_m, n12_m, den_m;
  Scalar n11_t, n22_t, n12_t, den_t;
};

template <typename Scalar>
LaminateRational<Scalar> laminate_rational(Scalar m, Scalar theta,
                                           const IsotropicMaterial<Scalar>& mat) {
  const Scalar k = mat.kappa(), mu = mat.mu, lam = mat.lam;
  const Scalar a = 4 * k * mu * (k + mu);
  const Scalar b = 4 * k * mu * lam;
  const Scalar c = 4 * k * mu;
  const Scalar km2 = (k + mu) * (k + mu);
  const Scalar mm = m * (1 - m);

  LaminateRational<Scalar> r;
  r.den = c * mm * theta * theta + km2 * (1 - theta);
  r.n11 = a * theta * (1 - theta * (1 - m)) * (1 - m);
  r.n22 = a * theta * (1 - theta * m) * m;
  r.n12 = b * theta * theta * mm;

  r.den_m = c * (1 - 2 * m) * theta * theta;
  r.n11_m = a * theta * (2 * theta * (1 - m) - 1);
  r.n22_m = a * theta * (1 - 2 * theta * m);
  r.n12_m = b * theta * theta * (1 - 2 * m);

  r.den_t = 2 * c * mm * theta - km2;
  r.n11_t = a * (1 - m) * (1 - 2 * theta * (1 - m));
  r.n22_t = a * m * (1 - 2 * theta * m);
  r.n12_t = 2 * b * theta * mm;
  return r;
}

}  // namespace detail

/// Laminate tensor in its own frame (axis 1 = first lamination normal).
template <typename Scalar>
VoigtTensor<Scalar> laminate_tensor(Scalar m, Scalar theta,
                                    const IsotropicMaterial<Scalar>& mat,
                                    Scalar shear = Scalar(kShearRegularization)) {
  const auto r = detail::laminate_rational(m, theta, mat);
  if (!(r.den > 0)) throw std::logic_error("laminate_tensor: nonpositive denominator");
  VoigtTensor<Scalar> c = VoigtTensor<Scalar>::Zero();
  c(0, 0) = r.n11 / r.den;
  c(1, 1) = r.n22 / r.den;
  c(0, 1) = c(1, 0) = r.n12 / r.den;
  c(2, 2) = shear;
  return c;
}

/// Voigt stress transformation T(alpha): for sigma = Q sigma_ref Q^T with
/// Q the rotation by alpha, sigma_v = T sigma_ref_v and eps_ref_v = T^T eps_v.
template <typename Scalar>
VoigtTensor<Scalar> voigt_rotation(Scalar alpha) {
  using std::cos, std::sin;
  const Scalar c = cos(alpha), s = sin(alpha);
  VoigtTensor<Scalar> t;
  t << c * c, s * s, -2 * c * s,
       s * s, c * c, 2 * c * s,
       c * s, -c * s, c * c - s * s;
  return t;
}

/// d T / d alpha.
template <typename Scalar>
VoigtTensor<Scalar> voigt_rotation_derivative(Scalar alpha) {
  using std::cos, std::sin;
  const Scalar c = cos(alpha), s = sin(alpha);
  const Scalar c2 = c * c - s * s, cs = c * s;
  VoigtTensor<Scalar> t;
  t << -2 * cs, 2 * cs, -2 * c2,
       2 * cs, -2 * cs, 2 * c2,
       c2, -c2, -4 * cs;
  return t;
}

template <typename Scalar>
VoigtTensor<Scalar> rotate(const VoigtTensor<Scalar>& c_ref, Scalar alpha) {
  const VoigtTensor<Scalar> t = voigt_rotation(alpha);
  return t * c_ref * t.transpose();
}

/// Effective tensor of the laminate rotated into the frame given by alpha.
template <typename Scalar>
VoigtTensor<Scalar> effective_tensor(const LaminateParams<Scalar>& p,
                                     const IsotropicMaterial<Scalar>& mat,
                                     Scalar shear = Scalar(kShearRegularization)) {
  return rotate(laminate_tensor(p.m, p.theta, mat, shear), p.alpha);
}

/// Unrotated (dC/dm, dC/dtheta); the shear entry is constant.
template <typename Scalar>
std::pair<VoigtTensor<Scalar>, VoigtTensor<Scalar>> tensor_derivatives(
    const LaminateParams<Scalar>& p, const IsotropicMaterial<Scalar>& mat) {
  const auto r = detail::laminate_rational(p.m, p.theta, mat);
  const Scalar d2 = r.den * r.den;
  auto quotient = [&](Scalar n, Scalar dn, Scalar dd) { return (dn * r.den - n * dd) / d2; };

  VoigtTensor<Scalar> dm = VoigtTensor<Scalar>::Zero();
  dm(0, 0) = quotient(r.n11, r.n11_m, r.den_m);
  dm(1, 1) = quotient(r.n22, r.n22_m, r.den_m);
  dm(0, 1) = dm(1, 0) = quotient(r.n12, r.n12_m, r.den_m);

  VoigtTensor<Scalar> dt = VoigtTensor<Scalar>::Zero();
  dt(0, 0) = quotient(r.n11, r.n11_t, r.den_t);
  dt(1, 1) = quotient(r.n22, r.n22_t, r.den_t);
  dt(0, 1) = dt(1, 0) = quotient(r.n12, r.n12_t, r.den_t);
  return {dm, dt};
}

/// A^{-1} sigma : sigma for the plane isotropic law sigma = 2 mu e + lambda tr(e) I.
template <typename Scalar>
Scalar isotropic_compliance_energy(const Sym2<Scalar>& sigma,
                                   const IsotropicMaterial<Scalar>& mat) {
  const Scalar tr = sigma.trace();
  const Scalar dev2 = sigma.squaredNorm() - tr * tr / 2;
  return tr * tr / (4 * mat.kappa()) + dev2 / (2 * mat.mu);
}

/// Complementary energy density of the optimal laminate with density theta:
/// A^{-1} s:s + (kappa + mu)(1 - theta) / (4 kappa mu theta) (|l1| + |l2|)^2.
/// At theta = 1 the second term vanishes.
template <typename Scalar>
Scalar hs_energy_density(const Sym2<Scalar>& sigma, Scalar theta,
                         const IsotropicMaterial<Scalar>& mat) {
  using std::abs;
  const Scalar base = isotropic_compliance_energy(sigma, mat);
  if (theta >= 1) return base;
  const Eigen2<Scalar> e = eig_sym2(sigma);
  const Scalar sum = abs(e.lambda1) + abs(e.lambda2);
  const Scalar k = mat.kappa(), mu = mat.mu;
  return base + (k + mu) * (1 - theta) / (4 * k * mu * theta) * sum * sum;
}

template <typename Scalar = double>
struct NewtonRecovery {
  Scalar alpha = 0;
  Scalar lambda1 = 0;
  Scalar lambda2 = 0;
  Scalar m = Scalar(0.5);
  Scalar residual = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Scalar>
Scalar ratio_of(Scalar l1, Scalar l2) {
  using std::abs;
  const Scalar sum = abs(l1) + abs(l2);
  if (sum == 0) return Scalar(0.5);
  return std::clamp(abs(l2) / sum, Scalar(kClampEps), Scalar(1 - kClampEps));
}

template <typename Scalar>
Voigt<Scalar> recovery_residual(const Voigt<Scalar>& strain, Scalar theta,
                                const IsotropicMaterial<Scalar>& mat,
                                const Eigen::Matrix<Scalar, 3, 1>& x) {
  const Scalar m = ratio_of(x(1), x(2));
  const Voigt<Scalar> e_ref = voigt_rotation(x(0)).transpose() * strain;
  return laminate_tensor(m, theta, mat) * e_ref - Voigt<Scalar>(x(1), x(2), 0);
}

}  // namespace detail

/// Solves C[m(l1, l2), theta] (T(alpha)^T eps) = (l1, l2, 0) for
/// (alpha, l1, l2): the laminate parameters that are self-consistent with a
/// given strain at fixed density. `start` = (alpha, lambda1, lambda2).
/// Converged when the residual max norm is at most tol times the stress scale.
/// The result is relabelled so that |lambda1| >= |lambda2|.
template <typename Scalar>
NewtonRecovery<Scalar> recover_params_newton(const Sym2<Scalar>& strain, Scalar theta,
                                             const Eigen::Matrix<Scalar, 3, 1>& start,
                                             const IsotropicMaterial<Scalar>& mat,
                                             Scalar tol = Scalar(1e-10),
                                             int max_iterations = 50) {
  using std::abs, std::max;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

  const Voigt<Scalar> e = to_voigt_strain(strain);
  NewtonRecovery<Scalar> out;

  Vec3 x = start;
  Voigt<Scalar> r = detail::recovery_residual(e, theta, mat, x);
  const Scalar scale =
      max(laminate_tensor(Scalar(0.5), theta, mat).norm() * e.norm(), Scalar(1e-300));
  auto done = [&](const Voigt<Scalar>& res) {
    return res.template lpNorm<Eigen::Infinity>() <= tol * scale;
  };

  int it = 0;
  bool ok = e.norm() > 0 && done(r);
  while (!ok && it < max_iterations && e.norm() > 0) {
    const Scalar l1 = x(1), l2 = x(2);
    const Scalar sum = abs(l1) + abs(l2);
    const Scalar m_raw = sum > 0 ? abs(l2) / sum : Scalar(0.5);
    const Scalar m = detail::ratio_of(l1, l2);
    const bool clamped = m != m_raw;

    const Voigt<Scalar> e_ref = voigt_rotation(x(0)).transpose() * e;
    const Voigt<Scalar> de_ref = voigt_rotation_derivative(x(0)).transpose() * e;
    LaminateParams<Scalar> p{x(0), m, theta};
    const VoigtTensor<Scalar> c = laminate_tensor(m, theta, mat);
    const VoigtTensor<Scalar> dc_dm = tensor_derivatives(p, mat).first;

    Scalar dm_dl1 = 0, dm_dl2 = 0;
    if (!clamped && sum > 0) {
      const Scalar s1 = l1 > 0 ? 1 : (l1 < 0 ? -1 : 0);
      const Scalar s2 = l2 > 0 ? 1 : (l2 < 0 ? -1 : 0);
      dm_dl1 = -abs(l2) * s1 / (sum * sum);
      dm_dl2 = abs(l1) * s2 / (sum * sum);
    }
    Mat3 jac;
    jac.col(0) = c * de_ref;
    jac.col(1) = dc_dm * e_ref * dm_dl1 - Vec3(1, 0, 0);
    jac.col(2) = dc_dm * e_ref * dm_dl2 - Vec3(0, 1, 0);

    Eigen::FullPivLU<Mat3> lu(jac);
    if (!lu.isInvertible()) break;
    const Vec3 step = -lu.solve(r);

    Scalar t = 1;
    Vec3 trial = x + step;
    Voigt<Scalar> r_trial = detail::recovery_residual(e, theta, mat, trial);
    while (r_trial.norm() >= r.norm() && t > Scalar(1e-8)) {
      t /= 2;
      trial = x + t * step;
      r_trial = detail::recovery_residual(e, theta, mat, trial);
    }
    x = trial;
    r = r_trial;
    ++it;
    ok = done(r);
  }

  out.iterations = it;
  out.residual = r.template lpNorm<Eigen::Infinity>();
  out.converged = ok;
  Scalar alpha = x(0), l1 = x(1), l2 = x(2);
  if (abs(l1) < abs(l2) || (abs(l1) == abs(l2) && l1 < l2)) {
    std::swap(l1, l2);
    alpha += std::numbers::pi_v<Scalar> / 2;
  }
  out.alpha = normalize_angle(alpha);
  out.lambda1 = l1;
  out.lambda2 = l2;
  out.m = detail::ratio_of(l1, l2);
  return out;
}

/// Starting point derived from a parameter guess: eigenvalues of the stress
/// produced by that guess.
template <typename Scalar>
NewtonRecovery<Scalar> recover_params_newton(const Sym2<Scalar>& strain, Scalar theta,
                                             const LaminateParams<Scalar>& init,
                                             const IsotropicMaterial<Scalar>& mat,
                                             Scalar tol = Scalar(1e-10),
                                             int max_iterations = 50) {
  const Voigt<Scalar> e_ref = voigt_rotation(init.alpha).transpose() * to_voigt_strain(strain);
  const Voigt<Scalar> s_ref = laminate_tensor(init.m, theta, mat) * e_ref;
  const Eigen::Matrix<Scalar, 3, 1> start(init.alpha, s_ref(0), s_ref(1));
  return recover_params_newton(strain, theta, start, mat, tol, max_iterations);
}

}  // namespace lamopt
