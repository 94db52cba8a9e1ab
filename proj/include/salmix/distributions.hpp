#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "salmix/numerics.hpp"
#include "salmix/rng.hpp"

namespace salmix {

// ---------------------------------------------------------------------------
// Generalized inverse Gaussian, density of Eq.-(2) form:
//   f(y) = (phi/chi)^{nu/2} y^{nu-1} / (2 K_nu(sqrt(phi chi))) exp{-(phi y + chi/y)/2}
// ---------------------------------------------------------------------------

struct GigParams {
  double phi;
  double chi;
  double nu;

  GigParams(double phi_, double chi_, double nu_) : phi(phi_), chi(chi_), nu(nu_) {
    if (!(phi > 0.0) || !std::isfinite(phi) || !(chi > 0.0) || !std::isfinite(chi) ||
        !std::isfinite(nu))
      throw DomainError("GigParams: requires phi > 0, chi > 0, finite nu");
  }

  double omega() const { return std::sqrt(phi) * std::sqrt(chi); }
};

inline double gig_log_density(double y, const GigParams& p) {
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("gig_log_density: y must be > 0");
  return 0.5 * p.nu * (std::log(p.phi) - std::log(p.chi)) + (p.nu - 1.0) * std::log(y) -
         std::numbers::ln2 - log_bessel_k(p.nu, p.omega()) - 0.5 * (p.phi * y + p.chi / y);
}

inline double gig_mean(const GigParams& p) {
  const double om = p.omega();
  const double log_ratio = log_bessel_k(p.nu + 1.0, om) - log_bessel_k(p.nu, om);
  return std::exp(0.5 * (std::log(p.chi) - std::log(p.phi)) + log_ratio);
}

inline double gig_mean_inverse(const GigParams& p) {
  const double om = p.omega();
  const double log_ratio = log_bessel_k(p.nu + 1.0, om) - log_bessel_k(p.nu, om);
  return std::exp(0.5 * (std::log(p.phi) - std::log(p.chi)) + log_ratio) - 2.0 * p.nu / p.chi;
}

namespace detail {

// Two-parameter form used by the sampler: g(t) ∝ t^{lam-1} exp(-om (t + 1/t)/2).
// Mode of g.
inline double gig_mode(double lam, double om) {
  if (lam >= 1.0) return (std::sqrt((lam - 1.0) * (lam - 1.0) + om * om) + (lam - 1.0)) / om;
  return om / (std::sqrt((1.0 - lam) * (1.0 - lam) + om * om) + (1.0 - lam));
}

// Ratio-of-uniforms with shift of the mode; lam >= 1 or om > 1.
inline double gig_rou_shift(double lam, double om, Rng& rng) {
  const double t = 0.5 * (lam - 1.0);
  const double s = 0.25 * om;
  const double xm = gig_mode(lam, om);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // stationary points of (x - xm) sqrt(g(x)): roots of a depressed cubic
  const double a = -(2.0 * (lam + 1.0) / om + xm);
  const double b = 2.0 * (lam - 1.0) * xm / om - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double fi = std::acos(std::clamp(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)), -1.0, 1.0));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;

  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = rng.uniform(uminus, uplus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Plain ratio-of-uniforms; 0 <= lam <= 1 and moderate om.
inline double gig_rou_noshift(double lam, double om, Rng& rng) {
  const double t = 0.5 * (lam - 1.0);
  const double s = 0.25 * om;
  const double xm = gig_mode(lam, om);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lam + 1.0) + std::sqrt((lam + 1.0) * (lam + 1.0) + om * om)) / om;
  const double um = std::exp(0.5 * (lam + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);

  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection with a three-piece hat (constant over the T-concave center,
// power and exponential tails); 0 <= lam < 1, 0 < om <= 1.
inline double gig_three_piece(double lam, double om, Rng& rng) {
  const double xm = gig_mode(lam, om);
  const double x0 = om / (1.0 - lam);
  const double k0 = std::exp((lam - 1.0) * std::log(xm) - 0.5 * om * (xm + 1.0 / xm));
  const double a0 = k0 * x0;

  double k1 = 0.0, k2, a1 = 0.0, a2;
  if (x0 >= 2.0 / om) {
    k2 = std::pow(x0, lam - 1.0);
    a2 = k2 * 2.0 * std::exp(-0.5 * om * x0) / om;
  } else {
    k1 = std::exp(-om);
    a1 = (lam == 0.0) ? k1 * std::log(2.0 / (om * om))
                      : k1 / lam * (std::pow(2.0 / om, lam) - std::pow(x0, lam));
    k2 = std::pow(2.0 / om, lam - 1.0);
    a2 = k2 * 2.0 * std::exp(-1.0) / om;
  }
  const double atot = a0 + a1 + a2;

  for (;;) {
    double v = atot * rng.uniform();
    double x, hx;
    if (v <= a0) {
      x = x0 * v / a0;
      hx = k0;
    } else if ((v -= a0) <= a1) {
      if (lam == 0.0) {
        x = om * std::exp(std::exp(om) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lam) + lam / k1 * v, 1.0 / lam);
        hx = k1 * std::pow(x, lam - 1.0);
      }
    } else {
      v -= a1;
      const double a = std::max(x0, 2.0 / om);
      x = -2.0 / om * std::log(std::exp(-0.5 * om * a) - 0.5 * om / k2 * v);
      hx = k2 * std::exp(-0.5 * om * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lam - 1.0) * std::log(x) - 0.5 * om * (x + 1.0 / x)) return x;
  }
}

inline double gig_sample_standard(double lam, double om, Rng& rng) {
  if (lam >= 1.0 || om > 1.0) return gig_rou_shift(lam, om, rng);
  if (om >= std::min(0.5, 2.0 / 3.0 * std::sqrt(1.0 - lam))) return gig_rou_noshift(lam, om, rng);
  return gig_three_piece(lam, om, rng);
}

} // namespace detail

/// One draw from GIG(phi, chi, nu). Rejection samplers with uniformly bounded
/// acceptance over the whole parameter range; negative orders go through the
/// reciprocal identity 1/Y ~ GIG(chi, phi, -nu).
inline double gig_sample(const GigParams& p, Rng& rng) {
  const double om = p.omega();
  const double eta = std::sqrt(p.chi) / std::sqrt(p.phi); // y = eta * t
  const double t = (p.nu < 0.0) ? 1.0 / detail::gig_sample_standard(-p.nu, om, rng)
                                : detail::gig_sample_standard(p.nu, om, rng);
  return eta * t;
}

// ---------------------------------------------------------------------------
// Shifted asymmetric Laplace
// ---------------------------------------------------------------------------

struct SalParams {
  Vec mu;
  Vec alpha;
  SpdMatrix sigma;

  SalParams(Vec mu_, Vec alpha_, SpdMatrix sigma_)
      : mu(std::move(mu_)), alpha(std::move(alpha_)), sigma(std::move(sigma_)) {
    if (mu.size() != alpha.size() || mu.size() != sigma.dim())
      throw ShapeError("SalParams: inconsistent dimensions");
    if (!mu.allFinite() || !alpha.allFinite())
      throw DomainError("SalParams: mu and alpha must be finite");
  }

  Eigen::Index dim() const { return mu.size(); }
};

/// Per-component quantities reused across observations.
struct SalCache {
  explicit SalCache(const SalParams& p)
      : params(&p),
        solved_alpha(p.sigma.solve(p.alpha)),
        q_alpha(p.alpha.dot(solved_alpha)),
        log_det(p.sigma.log_det()),
        index(0.5 * (2.0 - static_cast<double>(p.dim()))) {
    const auto d = static_cast<double>(p.dim());
    log_const = std::numbers::ln2 - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  }

  const SalParams* params;
  Vec solved_alpha; // Sigma^{-1} alpha
  double q_alpha;   // alpha' Sigma^{-1} alpha
  double log_det;
  double index; // nu = (2 - p)/2
  double log_const;

  double delta(const Vec& x) const {
    return params->sigma.chol().half_solve(x - params->mu).squaredNorm();
  }

  double log_density(const Vec& x) const {
    const double del = delta(x);
    if (del == 0.0) {
      if (params->dim() >= 2) throw UnboundedDensity();
      // univariate limit: 1 / sqrt(sigma^2 (2 + q_alpha))
      return -0.5 * log_det - 0.5 * std::log(2.0 + q_alpha);
    }
    const double u = std::sqrt((2.0 + q_alpha) * del);
    return log_const + (x - params->mu).dot(solved_alpha) +
           0.5 * index * (std::log(del) - std::log(2.0 + q_alpha)) + log_bessel_k(index, u);
  }

  GigParams conditional_scale_law(const Vec& x) const {
    // W | X = x, Eq.-(2) parameterization recovered from the generative joint.
    return GigParams(2.0 + q_alpha, delta(x), index);
  }
};

inline double sal_log_density(const Vec& x, const SalParams& p) {
  if (x.size() != p.dim()) throw ShapeError("sal_log_density: dimension mismatch");
  if (!x.allFinite()) throw DomainError("sal_log_density: x must be finite");
  return SalCache(p).log_density(x);
}

/// n rows from X = mu + W alpha + sqrt(W) N, W ~ Exp(1), N ~ N(0, Sigma).
inline Mat sal_sample(const SalParams& p, int n, Rng& rng) {
  if (n < 1) throw DomainError("sal_sample: n must be >= 1");
  const auto d = p.dim();
  const Mat& lower = p.sigma.chol().lower();
  Mat out(n, d);
  Vec z(d);
  for (int i = 0; i < n; ++i) {
    const double w = rng.exponential();
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    out.row(i) = (p.mu + w * p.alpha + std::sqrt(w) * (lower * z)).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard multivariate draws
// ---------------------------------------------------------------------------

/// Wishart(df, scale) via the Bartlett decomposition.
inline SpdMatrix wishart_sample(double df, const SpdMatrix& scale, Rng& rng) {
  const auto p = scale.dim();
  if (!(df >= static_cast<double>(p)))
    throw DomainError("wishart_sample: df must be >= dimension");
  Mat a = Mat::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Mat la = scale.chol().lower() * a;
  return SpdMatrix(la * la.transpose());
}

inline Vec mvn_sample(const Vec& mean, const SpdMatrix& cov, Rng& rng) {
  if (mean.size() != cov.dim()) throw ShapeError("mvn_sample: dimension mismatch");
  Vec z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + cov.chol().lower() * z;
}

inline Vec dirichlet_sample(const Vec& concentrations, Rng& rng) {
  if (concentrations.size() < 1 || (concentrations.array() <= 0.0).any())
    throw DomainError("dirichlet_sample: concentrations must all be > 0");
  Vec g(concentrations.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = rng.gamma(concentrations[j], 1.0);
  const double total = g.sum();
  return g / total;
}

} // namespace salmix
