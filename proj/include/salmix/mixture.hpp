#pragma once

#include <utility>
#include <vector>

#include "salmix/distributions.hpp"

namespace salmix {

struct MixtureParams {
  Vec weights;                      // simplex, strictly positive
  std::vector<SalParams> components;

  MixtureParams(Vec weights_, std::vector<SalParams> components_)
      : weights(std::move(weights_)), components(std::move(components_)) {
    if (weights.size() == 0 || static_cast<std::size_t>(weights.size()) != components.size())
      throw ShapeError("MixtureParams: weights/components size mismatch");
    if ((weights.array() <= 0.0).any())
      throw DomainError("MixtureParams: weights must be strictly positive");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
      throw DomainError("MixtureParams: weights must sum to 1");
    for (const auto& c : components)
      if (c.dim() != components.front().dim())
        throw ShapeError("MixtureParams: components must share a dimension");
  }

  int g() const { return static_cast<int>(components.size()); }
  Eigen::Index p() const { return components.front().dim(); }
};

/// Per-observation latent state: soft (or hard 0/1) responsibilities z and
/// positive latent scales w, both n x G.
struct LatentState {
  Mat z;
  Mat w;

  void validate() const {
    if (z.rows() != w.rows() || z.cols() != w.cols())
      throw ShapeError("LatentState: z and w must have equal shapes");
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (std::abs(z.row(i).sum() - 1.0) > 1e-12 || (z.row(i).array() < 0.0).any() ||
          (z.row(i).array() > 1.0).any())
        throw DomainError("LatentState: z row " + std::to_string(i) + " not on the simplex");
    }
    if ((w.array() <= 0.0).any()) throw DomainError("LatentState: w must be positive");
  }
};

/// Exponential-family statistics of one component. t3, t4, t5 carry the 1/2
/// factors they are defined with; the posterior algebra doubles them back.
struct SufficientStats {
  double t0 = 0.0; // sum z
  Vec t1;          // sum z x
  Vec t2;          // sum (z/w) x
  double t3 = 0.0; // (1/2) sum z w
  double t4 = 0.0; // (1/2) sum z / w
  Mat t5;          // (1/2) sum (z/w) x x'

  static SufficientStats zero(Eigen::Index p) {
    SufficientStats s;
    s.t1 = Vec::Zero(p);
    s.t2 = Vec::Zero(p);
    s.t5 = Mat::Zero(p, p);
    return s;
  }
};

/// Weighted sums with separate scale and inverse-scale weights, so the same
/// accumulator serves both engines: Gibbs passes (w, 1/w) draws, EM passes the
/// conditional expectations (E[W], E[1/W]).
inline std::vector<SufficientStats> accumulate_stats(const Mat& data, const Mat& z,
                                                     const Mat& w_mean, const Mat& winv_mean) {
  const Eigen::Index n = data.rows(), p = data.cols(), g = z.cols();
  if (z.rows() != n || w_mean.rows() != n || w_mean.cols() != g || winv_mean.rows() != n ||
      winv_mean.cols() != g)
    throw ShapeError("accumulate_stats: shape mismatch");
  std::vector<SufficientStats> stats(g, SufficientStats::zero(p));
  for (Eigen::Index k = 0; k < g; ++k) {
    auto& s = stats[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zi = z(i, k);
      if (zi == 0.0) continue;
      const Vec x = data.row(i).transpose();
      const double zb = zi * winv_mean(i, k);
      s.t0 += zi;
      s.t1 += zi * x;
      s.t2 += zb * x;
      s.t3 += 0.5 * zi * w_mean(i, k);
      s.t4 += 0.5 * zb;
      s.t5 += 0.5 * zb * (x * x.transpose());
    }
  }
  return stats;
}

inline std::vector<SufficientStats> accumulate_stats(const Mat& data, const LatentState& latent) {
  latent.validate();
  return accumulate_stats(data, latent.z, latent.w, latent.w.cwiseInverse());
}

inline std::vector<SalCache> component_caches(const MixtureParams& params) {
  std::vector<SalCache> caches;
  caches.reserve(params.components.size());
  for (const auto& c : params.components) caches.emplace_back(c);
  return caches;
}

/// Per-observation component log terms log pi_g + log f_SAL(x_i | theta_g).
inline Mat component_log_terms(const Mat& data, const MixtureParams& params) {
  const auto caches = component_caches(params);
  const Eigen::Index n = data.rows();
  const int g = params.g();
  if (data.cols() != params.p()) throw ShapeError("component_log_terms: dimension mismatch");
  Mat lt(n, g);
  const Vec logw = params.weights.array().log();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec x = data.row(i).transpose();
    for (int k = 0; k < g; ++k) {
      try {
        lt(i, k) = logw[k] + caches[k].log_density(x);
      } catch (const UnboundedDensity&) {
        throw UnboundedLikelihood(static_cast<int>(i), k);
      }
    }
  }
  return lt;
}

inline double mixture_log_likelihood(const Mat& data, const MixtureParams& params) {
  const Mat lt = component_log_terms(data, params);
  double total = 0.0;
  for (Eigen::Index i = 0; i < lt.rows(); ++i) total += log_sum_exp(lt.row(i).transpose());
  return total;
}

namespace detail {

inline Mat normalize_rows_from_log(const Mat& lt) {
  Mat z(lt.rows(), lt.cols());
  for (Eigen::Index i = 0; i < lt.rows(); ++i) {
    const double lse = log_sum_exp(lt.row(i).transpose());
    if (!std::isfinite(lse))
      throw NumericError(static_cast<int>(i), "degenerate responsibility row");
    z.row(i) = (lt.row(i).array() - lse).exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

} // namespace detail

/// Marginal responsibilities: rows proportional to pi_g f_SAL(x_i | theta_g).
inline Mat responsibilities(const Mat& data, const MixtureParams& params) {
  return detail::normalize_rows_from_log(component_log_terms(data, params));
}

/// Conditional-on-w responsibilities of the Gibbs z update: rows proportional
/// to pi_g N(x_i | mu_g + w_ig alpha_g, w_ig Sigma_g) Exp(w_ig | 1).
inline Mat responsibilities(const Mat& data, const MixtureParams& params, const Mat& w) {
  const Eigen::Index n = data.rows();
  const int g = params.g();
  const auto d = static_cast<double>(params.p());
  if (w.rows() != n || w.cols() != g) throw ShapeError("responsibilities: w shape mismatch");
  if ((w.array() <= 0.0).any()) throw DomainError("responsibilities: w must be positive");
  const auto caches = component_caches(params);
  const Vec logw = params.weights.array().log();
  Mat lt(n, g);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec x = data.row(i).transpose();
    for (int k = 0; k < g; ++k) {
      const double wi = w(i, k);
      const Vec r = x - caches[k].params->mu - wi * caches[k].params->alpha;
      const double quad = caches[k].params->sigma.chol().half_solve(r).squaredNorm() / wi;
      lt(i, k) = logw[k] - 0.5 * d * std::log(2.0 * std::numbers::pi * wi) -
                 0.5 * caches[k].log_det - 0.5 * quad - wi;
    }
  }
  return detail::normalize_rows_from_log(lt);
}

} // namespace salmix
