#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>

#include "salmix/errors.hpp"

namespace salmix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

// Coefficients of 1/Gamma(1+z) = 1 + c1 z + c2 z^2 + ...; only the odd ones
// enter gam1 below.
inline constexpr double kEulerGamma = 0.57721566490153286060651209;
inline constexpr double kC3 = -0.04200263503409523552900393; // zeta(3)/3 - g*pi^2/12 + g^3/6
inline constexpr double kMaxExp = 709.0;

// Temme's auxiliary functions for |mu| <= 1/2:
//   gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu)
//   gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)] / 2
inline void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
  gampl = 1.0 / std::tgamma(1.0 + mu);
  gammi = 1.0 / std::tgamma(1.0 - mu);
  if (std::abs(mu) < 1e-3) {
    gam1 = -(kEulerGamma + kC3 * mu * mu);
  } else {
    gam1 = (gammi - gampl) / (2.0 * mu);
  }
  gam2 = 0.5 * (gammi + gampl);
}

// K_mu(x) and K_{mu+1}(x) for x <= 2, |mu| <= 1/2 (Temme's series).
inline void bessel_k_temme(double mu, double x, double& kmu, double& kmu1) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = (std::abs(pimu) < eps) ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = (std::abs(e) < eps) ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  temme_gammas(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  for (int i = 1; i <= 200; ++i) {
    ff = (i * ff + p + q) / (i * i - mu * mu);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::abs(del) < std::abs(sum) * eps) break;
  }
  kmu = sum;
  kmu1 = sum1 * (2.0 / x);
}

// e^x K_mu(x) and e^x K_{mu+1}(x) for x > 2, |mu| <= 1/2 (Steed's CF2).
inline void bessel_k_cf2_scaled(double mu, double x, double& kmu, double& kmu1) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double mu2 = mu * mu;
  const double a1 = 0.25 - mu2;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  double a = -a1;
  double q = a1, c = a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= 10000; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < eps) break;
  }
  h = a1 * h;
  kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
  kmu1 = kmu * (mu + x + 0.5 - h) / x;
}

} // namespace detail

/// log K_nu(x), the modified Bessel function of the third kind, for any real
/// order and x > 0. Series for x <= 2, continued fraction for x > 2, then the
/// three-term recurrence in the order with dynamic rescaling, so the result
/// stays finite far beyond where K itself under- or overflows.
inline double log_bessel_k(double nu, double x) {
  if (!std::isfinite(nu) || !std::isfinite(x) || x <= 0.0)
    throw DomainError("log_bessel_k: requires finite nu and x > 0");

  nu = std::abs(nu); // K_{-nu} = K_{nu}
  const int n = static_cast<int>(std::floor(nu + 0.5));
  const double mu = nu - n; // in [-1/2, 1/2]

  double km, kp;   // K_{mu}, K_{mu+1} (possibly scaled)
  double lscale = 0.0;
  if (x <= 2.0) {
    detail::bessel_k_temme(mu, x, km, kp);
  } else {
    detail::bessel_k_cf2_scaled(mu, x, km, kp);
    lscale = -x;
  }

  constexpr double big = 1e250;
  constexpr double logbig = 575.6462732485114210; // log(1e250)
  for (int j = 1; j < n; ++j) {
    const double knew = km + (2.0 * (mu + j) / x) * kp;
    km = kp;
    kp = knew;
    if (kp > big) {
      km /= big;
      kp /= big;
      lscale += logbig;
    }
  }
  return std::log(n == 0 ? km : kp) + lscale;
}

/// Lower-triangular Cholesky factor with solves and log-determinant.
class CholeskyFactor {
public:
  explicit CholeskyFactor(const Mat& m) : lower_(Mat::Zero(m.rows(), m.cols())) {
    const auto p = m.rows();
    if (m.cols() != p) throw ShapeError("cholesky: matrix must be square");
    for (Eigen::Index j = 0; j < p; ++j) {
      double d = m(j, j) - lower_.row(j).head(j).squaredNorm();
      if (!(d > 0.0) || !std::isfinite(d))
        throw NotPositiveDefinite(static_cast<int>(j), d);
      const double ljj = std::sqrt(d);
      lower_(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < p; ++i) {
        lower_(i, j) =
            (m(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
      }
    }
  }

  const Mat& lower() const { return lower_; }
  Eigen::Index dim() const { return lower_.rows(); }

  double log_det() const { // of the factored matrix, not of L
    return 2.0 * lower_.diagonal().array().log().sum();
  }

  /// L^{-1} v.
  Vec half_solve(const Vec& v) const {
    return lower_.triangularView<Eigen::Lower>().solve(v);
  }

  /// (L L^T)^{-1} v.
  Vec solve(const Vec& v) const {
    Vec y = lower_.triangularView<Eigen::Lower>().solve(v);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  /// (L L^T)^{-1}, via two triangular solves per column.
  Mat inverse() const {
    const auto p = dim();
    Mat inv(p, p);
    for (Eigen::Index j = 0; j < p; ++j) inv.col(j) = solve(Vec::Unit(p, j));
    return 0.5 * (inv + inv.transpose());
  }

private:
  Mat lower_;
};

/// Symmetric positive-definite matrix; factored once at construction.
class SpdMatrix {
public:
  explicit SpdMatrix(Mat m) : m_(std::move(m)), chol_(symmetrized(m_)) {
    m_ = symmetrized(m_);
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Mat& matrix() const { return m_; }
  const CholeskyFactor& chol() const { return chol_; }
  double log_det() const { return chol_.log_det(); }
  Vec solve(const Vec& v) const { return chol_.solve(v); }

private:
  static Mat symmetrized(const Mat& m) {
    if (m.rows() != m.cols()) throw ShapeError("SpdMatrix: matrix must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale)
      throw ShapeError("SpdMatrix: matrix not symmetric within tolerance");
    return 0.5 * (m + m.transpose());
  }

  Mat m_;
  CholeskyFactor chol_;
};

inline CholeskyFactor cholesky(const SpdMatrix& m) { return m.chol(); }

/// (x - mu)' Sigma^{-1} (x - mu), via a triangular solve.
inline double mahalanobis(const Vec& x, const Vec& mu, const SpdMatrix& sigma) {
  if (x.size() != mu.size() || x.size() != sigma.dim())
    throw ShapeError("mahalanobis: dimension mismatch");
  return sigma.chol().half_solve(x - mu).squaredNorm();
}

/// Numerically careful log(sum(exp(v))).
inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

} // namespace salmix
