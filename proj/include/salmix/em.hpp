#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "salmix/mixture.hpp"

namespace salmix {

struct EmConfig {
  int max_iters = 1000;
  double aitken_eps = 0.01;         // Lin (1995) stopping tolerance
  double setback_threshold = 1e-6;  // max-coordinate distance that freezes mu
  int restarts_on_failure = 10;
  std::uint64_t restart_seed = 0x5eedu;

  void validate() const {
    if (max_iters < 1 || !(aitken_eps > 0.0) || !(setback_threshold > 0.0) ||
        restarts_on_failure < 0)
      throw ConfigError("EmConfig: all fields must be positive");
  }
};

struct EmResult {
  MixtureParams params;
  std::vector<double> loglik_trace;
  bool converged = false;
  std::vector<bool> setback_engaged;
  int setback_first_iter = -1; // trace index of the first engagement, -1 if none
  Mat final_z;
  int restarts_used = 0;
};

/// E-step output: responsibilities and the conditional latent-scale moments
/// a = E[W | x, theta_g], b = E[1/W | x, theta_g].
struct EStep {
  Mat z;
  Mat a;
  Mat b;
  double loglik = 0.0;
};

/// Aitken-accelerated stopping rule on three consecutive log-likelihoods:
/// stop when the asymptotic estimate is within eps of the current value.
inline bool aitken_converged(double l0, double l1, double l2, double eps) {
  const double d1 = l1 - l0;
  const double d2 = l2 - l1;
  if (std::abs(d2) < 1e-12) return true;
  if (d1 == 0.0) return false;
  const double a = d2 / d1;
  if (a < 0.0 || a >= 1.0) return false;
  const double l_inf = l1 + d2 / (1.0 - a);
  return std::abs(l_inf - l2) < eps;
}

inline EStep e_step(const Mat& data, const MixtureParams& params) {
  const Eigen::Index n = data.rows();
  const int g = params.g();
  const auto caches = component_caches(params);
  const Vec logw = params.weights.array().log();
  EStep out;
  out.z.resize(n, g);
  out.a.resize(n, g);
  out.b.resize(n, g);
  Mat lt(n, g);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec x = data.row(i).transpose();
    for (int k = 0; k < g; ++k) {
      const auto& c = caches[k];
      const double del = c.delta(x);
      if (del == 0.0) throw UnboundedLikelihood(static_cast<int>(i), k);
      const double phi = 2.0 + c.q_alpha;
      const double u = std::sqrt(phi * del);
      const double log_k0 = log_bessel_k(c.index, u);
      const double log_k1 = log_bessel_k(c.index + 1.0, u);
      lt(i, k) = logw[k] + c.log_const + (x - c.params->mu).dot(c.solved_alpha) +
                 0.5 * c.index * (std::log(del) - std::log(phi)) + log_k0;
      const double log_ratio = log_k1 - log_k0;
      out.a(i, k) = std::exp(0.5 * (std::log(del) - std::log(phi)) + log_ratio);
      out.b(i, k) = std::exp(0.5 * (std::log(phi) - std::log(del)) + log_ratio) -
                    2.0 * c.index / del;
      if (!(out.a(i, k) > 0.0) || !(out.b(i, k) > 0.0))
        throw NumericError(static_cast<int>(i), "conditional scale moment not positive");
    }
  }
  out.loglik = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(lt.row(i).transpose());
    if (!std::isfinite(lse)) throw NumericError(static_cast<int>(i), "degenerate E-step row");
    out.loglik += lse;
    out.z.row(i) = (lt.row(i).array() - lse).exp();
    out.z.row(i) /= out.z.row(i).sum();
  }
  return out;
}

namespace detail {

// MLE scale matrix given (mu, alpha), from unhalved statistic sums.
inline Mat mle_scale(const SufficientStats& s, const Vec& mu, const Vec& alpha, double sw,
                     double siw, const Mat& sxx) {
  Mat d = sxx - s.t2 * mu.transpose() - mu * s.t2.transpose() - s.t1 * alpha.transpose() -
          alpha * s.t1.transpose() + siw * (mu * mu.transpose()) +
          s.t0 * (mu * alpha.transpose() + alpha * mu.transpose()) +
          sw * (alpha * alpha.transpose());
  d /= s.t0;
  return 0.5 * (d + d.transpose());
}

struct ComponentUpdate {
  Vec mu;
  Vec alpha;
  Mat sigma;
};

// Joint maximizer of the expected complete-data log-likelihood; the
// zero-prior limit of the conjugate posterior means.
inline ComponentUpdate mle_update(const SufficientStats& s, int k) {
  const double sw = 2.0 * s.t3;
  const double siw = 2.0 * s.t4;
  const Mat sxx = 2.0 * s.t5;
  const double det = sw * siw - s.t0 * s.t0;
  if (!(det > 1e-12 * sw * siw))
    throw DegenerateComponent(k, "singular normal equations (a3 a4 - a0^2 ~ 0)");
  ComponentUpdate u;
  u.mu = (sw * s.t2 - s.t0 * s.t1) / det;
  u.alpha = (siw * s.t1 - s.t0 * s.t2) / det;
  u.sigma = mle_scale(s, u.mu, u.alpha, sw, siw, sxx);
  return u;
}

// Conditional MLE with mu held fixed (post set-back).
inline ComponentUpdate mle_update_fixed_mu(const SufficientStats& s, const Vec& mu, int k) {
  const double sw = 2.0 * s.t3;
  const double siw = 2.0 * s.t4;
  const Mat sxx = 2.0 * s.t5;
  if (!(sw > 0.0)) throw DegenerateComponent(k, "zero scale mass");
  ComponentUpdate u;
  u.mu = mu;
  u.alpha = (s.t1 - s.t0 * mu) / sw;
  u.sigma = mle_scale(s, u.mu, u.alpha, sw, siw, sxx);
  return u;
}

inline SalParams to_sal(const ComponentUpdate& u, int k) {
  try {
    return SalParams(u.mu, u.alpha, SpdMatrix(u.sigma));
  } catch (const NotPositiveDefinite& e) {
    throw DegenerateComponent(k, std::string("scale update not positive definite: ") + e.what());
  }
}

// smallest over observations of the max-coordinate distance to mu
inline double min_maxcoord_distance(const Mat& data, const Vec& mu) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    best = std::min(best, (data.row(i).transpose() - mu).cwiseAbs().maxCoeff());
  return best;
}

} // namespace detail

inline MixtureParams m_step(const Mat& data, const EStep& expectations) {
  const Eigen::Index n = data.rows();
  const int g = static_cast<int>(expectations.z.cols());
  const auto stats = accumulate_stats(data, expectations.z, expectations.a, expectations.b);
  Vec weights(g);
  std::vector<SalParams> comps;
  comps.reserve(g);
  for (int k = 0; k < g; ++k) {
    if (!(stats[k].t0 > 1e-10)) throw EmptyComponent(k);
    weights[k] = stats[k].t0 / static_cast<double>(n);
    comps.push_back(detail::to_sal(detail::mle_update(stats[k], k), k));
  }
  weights /= weights.sum();
  return MixtureParams(weights, std::move(comps));
}

/// Hard partition -> S0-style parameters: alpha = 0.05, mu / Sigma from the
/// component sample moments, pi from the proportions.
inline MixtureParams params_from_partition(const Mat& data, const std::vector<int>& partition,
                                           int g) {
  const Eigen::Index n = data.rows(), p = data.cols();
  if (static_cast<Eigen::Index>(partition.size()) != n)
    throw ShapeError("params_from_partition: partition size mismatch");
  Vec weights(g);
  std::vector<SalParams> comps;
  for (int k = 0; k < g; ++k) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (partition[i] == k) idx.push_back(i);
    if (idx.empty()) throw EmptyComponent(k);
    Vec mean = Vec::Zero(p);
    for (auto i : idx) mean += data.row(i).transpose();
    mean /= static_cast<double>(idx.size());
    Mat cov = Mat::Zero(p, p);
    for (auto i : idx) {
      const Vec d = data.row(i).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= std::max<double>(1.0, static_cast<double>(idx.size()) - 1.0);
    double ridge = 1e-8 * std::max(1.0, cov.trace() / static_cast<double>(p));
    for (int tries = 0; tries < 12; ++tries) {
      try {
        comps.emplace_back(mean, Vec::Constant(p, 0.05), SpdMatrix(cov));
        break;
      } catch (const NotPositiveDefinite&) {
        cov += ridge * Mat::Identity(p, p);
        ridge *= 10.0;
      }
    }
    if (static_cast<int>(comps.size()) != k + 1)
      throw DegenerateComponent(k, "could not regularize initial scale matrix");
    weights[k] = static_cast<double>(idx.size()) / static_cast<double>(n);
  }
  weights /= weights.sum();
  return MixtureParams(weights, std::move(comps));
}

namespace detail {

inline std::vector<int> random_partition(Eigen::Index n, int g, Rng& rng) {
  std::vector<int> part(n);
  for (;;) {
    std::vector<int> counts(g, 0);
    for (auto& v : part) {
      v = rng.uniform_int(g);
      ++counts[v];
    }
    bool ok = true;
    for (int c : counts) ok = ok && c > 0;
    if (ok) return part;
  }
}

} // namespace detail

inline EmResult run_em(const Mat& data, int g, const std::vector<int>& init,
                       const EmConfig& config) {
  config.validate();
  if (g < 1) throw ConfigError("run_em: g must be >= 1");
  Rng restart_rng(config.restart_seed);
  std::vector<int> partition = init;
  int restarts = 0;
  for (;;) {
    try {
      MixtureParams params = params_from_partition(data, partition, g);
      std::vector<bool> engaged(g, false);
      std::vector<Vec> frozen_mu(g);
      std::vector<double> trace;
      trace.reserve(config.max_iters + 1);
      bool converged = false;
      int first_engaged = -1;
      Mat final_z;
      for (int iter = 0; iter <= config.max_iters; ++iter) {
        const EStep es = e_step(data, params);
        trace.push_back(es.loglik);
        final_z = es.z;
        const auto t = trace.size();
        if (t >= 3 &&
            aitken_converged(trace[t - 3], trace[t - 2], trace[t - 1], config.aitken_eps)) {
          converged = true;
          break;
        }
        if (iter == config.max_iters) break;

        const auto stats = accumulate_stats(data, es.z, es.a, es.b);
        Vec weights(g);
        std::vector<SalParams> comps;
        comps.reserve(g);
        for (int k = 0; k < g; ++k) {
          if (!(stats[k].t0 > 1e-10)) throw EmptyComponent(k);
          weights[k] = stats[k].t0 / static_cast<double>(data.rows());
          if (engaged[k]) {
            comps.push_back(
                detail::to_sal(detail::mle_update_fixed_mu(stats[k], frozen_mu[k], k), k));
            continue;
          }
          auto update = detail::mle_update(stats[k], k);
          if (detail::min_maxcoord_distance(data, update.mu) < config.setback_threshold) {
            // set-back: hold mu at the previous iterate, refit alpha conditionally
            engaged[k] = true;
            if (first_engaged < 0) first_engaged = iter;
            frozen_mu[k] = params.components[k].mu;
            update = detail::mle_update_fixed_mu(stats[k], frozen_mu[k], k);
          }
          comps.push_back(detail::to_sal(update, k));
        }
        weights /= weights.sum();
        params = MixtureParams(weights, std::move(comps));
      }
      EmResult result{std::move(params),   std::move(trace), converged,
                      std::move(engaged),  first_engaged,    std::move(final_z),
                      restarts};
      return result;
    } catch (const Error& e) {
      // random partitions until convergence: poles and degenerate components
      // both count as failed starts
      const bool restartable = dynamic_cast<const UnboundedLikelihood*>(&e) ||
                               dynamic_cast<const DegenerateComponent*>(&e) ||
                               dynamic_cast<const EmptyComponent*>(&e);
      if (!restartable || restarts >= config.restarts_on_failure) throw;
      ++restarts;
      partition = detail::random_partition(data.rows(), g, restart_rng);
    }
  }
}

} // namespace salmix
