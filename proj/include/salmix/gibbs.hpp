#pragma once

#include <cstdint>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "salmix/diagnostics.hpp"
#include "salmix/em.hpp"
#include "salmix/mixture.hpp"

namespace salmix {

// ---------------------------------------------------------------------------
// Priors and posteriors. Hyperparameters a3, a4, a5 live in the same units as
// the posterior formulas (sum z w, sum z / w, sum (z/w) x x'); update_hypers
// doubles the half-convention statistics t3, t4, t5 accordingly.
// ---------------------------------------------------------------------------

struct PriorHyper {
  double a0;      // pseudo-count: Wishart df and tau_mualpha
  Vec a1;         // pseudo sum z x
  Vec a2;         // pseudo sum (z/w) x
  double a3;      // pseudo sum z w       (tau_alpha)
  double a4;      // pseudo sum z / w     (tau_mu)
  Mat a5;         // Wishart inverse scale
  Vec dirichlet;  // mixing-proportion concentrations, length G

  void validate(Eigen::Index p) const {
    if (a1.size() != p || a2.size() != p || a5.rows() != p || a5.cols() != p)
      throw ShapeError("PriorHyper: dimension mismatch");
    if (!(a0 > 0.0) || !(a3 > 0.0) || !(a4 > 0.0))
      throw DomainError("PriorHyper: a0, a3, a4 must be positive");
    if (!(a3 * a4 - a0 * a0 > 0.0))
      throw DomainError("PriorHyper: requires a3 a4 - a0^2 > 0 (Gaussian prior block PD)");
    if (!(a0 >= static_cast<double>(p)))
      throw DomainError("PriorHyper: Wishart degrees of freedom a0 must be >= dimension");
    if (dirichlet.size() < 1 || (dirichlet.array() <= 0.0).any())
      throw DomainError("PriorHyper: Dirichlet concentrations must be positive");
    SpdMatrix check(a5); // throws if not SPD
  }

  /// Scale-adapted weakly informative default: unit Dirichlet, minimal proper
  /// Wishart df, zero location/skew pseudo-data, full-data covariance scale.
  static PriorHyper weakly_informative(const Mat& data, int g) {
    const Eigen::Index n = data.rows(), p = data.cols();
    const Vec mean = data.colwise().mean().transpose();
    Mat cov = Mat::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec d = data.row(i).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= std::max<double>(1.0, static_cast<double>(n - 1));
    PriorHyper prior;
    prior.a0 = static_cast<double>(p) + 2.0;
    prior.a1 = Vec::Zero(p);
    prior.a2 = Vec::Zero(p);
    // smallest integer-ish choice keeping a3 a4 > a0^2
    prior.a3 = static_cast<double>(p) + 3.0;
    prior.a4 = static_cast<double>(p) + 3.0;
    prior.a5 = cov;
    prior.dirichlet = Vec::Ones(g);
    return prior;
  }
};

struct PosteriorHyper {
  double a0;
  Vec a1, a2;
  double a3, a4;
  Mat a5;
  // derived
  Vec mu0, alpha0;
  double tau_mu, tau_alpha, tau_mualpha;
  Mat v0_inv;
};

namespace detail {

// m' T m as a p x p matrix, T = [[tau_mu, tau_ma], [tau_ma, tau_alpha]].
inline Mat tau_quadratic(double tau_mu, double tau_alpha, double tau_ma, const Vec& mu,
                         const Vec& alpha) {
  return tau_mu * (mu * mu.transpose()) +
         tau_ma * (mu * alpha.transpose() + alpha * mu.transpose()) +
         tau_alpha * (alpha * alpha.transpose());
}

} // namespace detail

inline PosteriorHyper update_hypers(const PriorHyper& prior, const SufficientStats& stats,
                                    int component = 0) {
  PosteriorHyper post;
  post.a0 = prior.a0 + stats.t0;
  post.a1 = prior.a1 + stats.t1;
  post.a2 = prior.a2 + stats.t2;
  post.a3 = prior.a3 + 2.0 * stats.t3;
  post.a4 = prior.a4 + 2.0 * stats.t4;
  post.a5 = prior.a5 + 2.0 * stats.t5;

  const double det = post.a3 * post.a4 - post.a0 * post.a0;
  if (!(det > 0.0))
    throw DegeneratePosterior(component, "a3 a4 - a0^2 not positive");
  post.mu0 = (post.a3 * post.a2 - post.a0 * post.a1) / det;
  post.alpha0 = (post.a4 * post.a1 - post.a0 * post.a2) / det;
  post.tau_mu = post.a4;
  post.tau_alpha = post.a3;
  post.tau_mualpha = post.a0;

  const double det0 = prior.a3 * prior.a4 - prior.a0 * prior.a0;
  const Vec mu0p = (prior.a3 * prior.a2 - prior.a0 * prior.a1) / det0;
  const Vec alpha0p = (prior.a4 * prior.a1 - prior.a0 * prior.a2) / det0;
  Mat v = post.a5 + detail::tau_quadratic(prior.a4, prior.a3, prior.a0, mu0p, alpha0p) -
          detail::tau_quadratic(post.tau_mu, post.tau_alpha, post.tau_mualpha, post.mu0,
                                post.alpha0);
  post.v0_inv = 0.5 * (v + v.transpose());
  return post;
}

/// Joint draw of (mu, alpha, Sigma): Sigma^{-1} ~ Wishart(a0, V0) with the
/// pair integrated out, then (mu, alpha) | Sigma from the 2p-Gaussian whose
/// PRECISION carries the displayed tau Sigma^{-1} blocks. The
/// covariance-vs-precision reading is frozen by the calibration tests.
inline SalParams draw_component_params(const PosteriorHyper& post, Rng& rng, int component = 0) {
  const Eigen::Index p = post.mu0.size();
  if (!(post.a0 >= static_cast<double>(p)))
    throw DomainError("draw_component_params: Wishart df below dimension");
  Mat v0;
  try {
    const SpdMatrix v0inv(post.v0_inv);
    v0 = v0inv.chol().inverse();
  } catch (const NotPositiveDefinite& e) {
    throw DegeneratePosterior(component, std::string("V0 inverse not PD: ") + e.what());
  }
  const SpdMatrix lambda = wishart_sample(post.a0, SpdMatrix(v0), rng); // Sigma^{-1}
  const SpdMatrix sigma(lambda.chol().inverse());

  const double dt = post.tau_mu * post.tau_alpha - post.tau_mualpha * post.tau_mualpha;
  if (!(dt > 0.0)) throw DegeneratePosterior(component, "tau block not PD");
  // cov(mu, alpha) = T^{-1} (x) Sigma; Cholesky of the 2x2 coefficient matrix
  const double s00 = post.tau_alpha / dt;
  const double s10 = -post.tau_mualpha / dt;
  const double s11 = post.tau_mu / dt;
  const double c00 = std::sqrt(s00);
  const double c10 = s10 / c00;
  const double c11 = std::sqrt(std::max(0.0, s11 - c10 * c10));

  const Mat& lsig = sigma.chol().lower();
  Vec z1(p), z2(p);
  for (Eigen::Index j = 0; j < p; ++j) z1[j] = rng.normal();
  for (Eigen::Index j = 0; j < p; ++j) z2[j] = rng.normal();
  const Vec y1 = lsig * z1;
  const Vec y2 = lsig * z2;
  return SalParams(post.mu0 + c00 * y1, post.alpha0 + c10 * y1 + c11 * y2, sigma);
}

// ---------------------------------------------------------------------------
// k-means initialization (S0)
// ---------------------------------------------------------------------------

/// Lloyd's algorithm with k-means++ seeding, 100-iteration cap; empty
/// clusters are reseeded from the farthest point.
inline std::vector<int> kmeans_init(const Mat& data, int g, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  if (g < 1 || static_cast<Eigen::Index>(g) > n)
    throw DomainError("kmeans_init: requires 1 <= g <= n");
  Rng rng(seed);
  std::vector<Vec> centers;
  centers.reserve(g);
  centers.push_back(data.row(rng.uniform_int(static_cast<int>(n))).transpose());
  Vec d2(n);
  while (static_cast<int>(centers.size()) < g) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers)
        best = std::min(best, (data.row(i).transpose() - c).squaredNorm());
      d2[i] = best;
    }
    const double total = d2.sum();
    if (total <= 0.0) { // all points coincide with centers
      centers.push_back(data.row(rng.uniform_int(static_cast<int>(n))).transpose());
      continue;
    }
    double u = rng.uniform() * total;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      u -= d2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(data.row(pick).transpose());
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int k = 0; k < g; ++k) {
        const double d = (data.row(i).transpose() - centers[k]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<int> counts(g, 0);
    for (int a : assign) ++counts[a];
    for (int k = 0; k < g; ++k) {
      if (counts[k] > 0) continue;
      // reseed this center at the point farthest from its current center
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (data.row(i).transpose() - centers[assign[i]]).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers[k] = data.row(far).transpose();
      assign[far] = k;
      counts[k] = 1;
      changed = true;
    }
    for (int k = 0; k < g; ++k) centers[k].setZero();
    std::vector<int> cnt(g, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      centers[assign[i]] += data.row(i).transpose();
      ++cnt[assign[i]];
    }
    for (int k = 0; k < g; ++k) centers[k] /= static_cast<double>(cnt[k]);
    if (!changed) break;
  }
  return assign;
}

// ---------------------------------------------------------------------------
// Sweeps and chains
// ---------------------------------------------------------------------------

struct GibbsConfig {
  int n_chains = 3;
  int min_sweeps = 400;
  int max_sweeps = 10000;
  int psrf_interval = 100;
  double psrf_threshold = 1.1;
  double burn_in_fraction = 0.5;
  int n_retained = 500;
  double guard_eps = 1e-6;
  int max_resample = 100;
  int empty_flag_sweeps = 50;
  std::uint64_t seed = 0xd1ce;
  bool parallel_chains = true;

  void validate() const {
    if (n_chains < 2 || min_sweeps < 20 || max_sweeps < min_sweeps || psrf_interval < 1 ||
        !(psrf_threshold > 1.0) || !(burn_in_fraction > 0.0) || !(burn_in_fraction < 1.0) ||
        n_retained < 2 || !(guard_eps > 0.0) || max_resample < 1 || empty_flag_sweeps < 1)
      throw ConfigError("GibbsConfig: invalid field");
    const double kept =
        n_chains * (1.0 - burn_in_fraction) * static_cast<double>(min_sweeps);
    if (kept < n_retained)
      throw ConfigError("GibbsConfig: min_sweeps too small to pool n_retained samples");
  }
};

struct GibbsState {
  MixtureParams params;
  Mat w;                   // n x G latent scales
  std::vector<int> labels; // hard z
};

struct SweepInfo {
  double loglik = 0.0;
  int resamples = 0;
  std::vector<int> counts;
};

/// One full S1-S2 sweep, in place.
inline SweepInfo gibbs_sweep(GibbsState& state, const Mat& data, const PriorHyper& prior,
                             Rng& rng, double guard_eps = 1e-6, int max_resample = 100) {
  const Eigen::Index n = data.rows();
  const int g = state.params.g();
  SweepInfo info;
  info.counts.assign(g, 0);

  // S1: draw hard labels from Eq.-(6) probabilities at (params, w)
  if (g == 1) {
    std::fill(state.labels.begin(), state.labels.end(), 0);
  } else {
    const Mat z = responsibilities(data, state.params, state.w);
    for (Eigen::Index i = 0; i < n; ++i) {
      double u = rng.uniform();
      int pick = g - 1;
      for (int k = 0; k < g; ++k) {
        u -= z(i, k);
        if (u <= 0.0) {
          pick = k;
          break;
        }
      }
      state.labels[i] = pick;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) ++info.counts[state.labels[i]];

  // S2.1: refresh all latent scales from the conditional GIG law
  {
    const auto caches = component_caches(state.params);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec x = data.row(i).transpose();
      for (int k = 0; k < g; ++k) {
        const double del = std::max(caches[k].delta(x), 1e-12);
        state.w(i, k) = gig_sample(GigParams(2.0 + caches[k].q_alpha, del, caches[k].index), rng);
      }
    }
  }

  // S2.2: sufficient statistics from the hard labels and fresh scales
  Mat zhard = Mat::Zero(n, g);
  for (Eigen::Index i = 0; i < n; ++i) zhard(i, state.labels[i]) = 1.0;
  const auto stats = accumulate_stats(data, zhard, state.w, state.w.cwiseInverse());

  // S2.3 + S2.4: component draws with the degeneracy guard
  std::vector<SalParams> comps;
  comps.reserve(g);
  for (int k = 0; k < g; ++k) {
    const PosteriorHyper post = update_hypers(prior, stats[k], k);
    bool accepted = false;
    for (int attempt = 0; attempt <= max_resample; ++attempt) {
      SalParams cand = draw_component_params(post, rng, k);
      double min_delta = std::numeric_limits<double>::infinity();
      const CholeskyFactor& ch = cand.sigma.chol();
      for (Eigen::Index i = 0; i < n; ++i) {
        min_delta = std::min(
            min_delta, ch.half_solve(data.row(i).transpose() - cand.mu).squaredNorm());
        if (min_delta < guard_eps) break;
      }
      if (min_delta >= guard_eps) {
        comps.push_back(std::move(cand));
        accepted = true;
        break;
      }
      ++info.resamples;
    }
    if (!accepted) throw DegenerateDraw(k, max_resample);
  }

  // S2.5: mixing proportions
  Vec conc(g);
  for (int k = 0; k < g; ++k) conc[k] = prior.dirichlet[k] + info.counts[k];
  const Vec pi = dirichlet_sample(conc, rng);

  state.params = MixtureParams(pi, std::move(comps));
  info.loglik = mixture_log_likelihood(data, state.params);
  return info;
}

struct ChainRun {
  std::uint64_t seed = 0;
  std::vector<MixtureParams> draws;
  std::vector<double> loglik_trace;
  std::vector<std::vector<std::uint8_t>> labels;
  std::vector<int> resample_counts;
  std::vector<int> max_empty_streak; // per component
  bool persistent_empty = false;
};

struct GibbsFit {
  std::vector<ChainRun> chains;
  PsrfReport psrf_report;
  std::vector<MixtureParams> retained;
  MixtureParams estimate;
  PosteriorSummary summary;
  std::vector<int> map_labels;
  double loglik_at_estimate = 0.0;
  bool converged = false;
  int total_sweeps = 0;

  GibbsFit(std::vector<ChainRun> chains_, PsrfReport rep, std::vector<MixtureParams> retained_,
           MixtureParams estimate_, PosteriorSummary summary_, std::vector<int> map_labels_,
           double loglik, bool converged_, int sweeps)
      : chains(std::move(chains_)), psrf_report(rep), retained(std::move(retained_)),
        estimate(std::move(estimate_)), summary(std::move(summary_)),
        map_labels(std::move(map_labels_)), loglik_at_estimate(loglik), converged(converged_),
        total_sweeps(sweeps) {}
};

namespace detail {

struct ChainWorker {
  GibbsState state;
  ChainRun run;
  Rng rng;
  std::vector<int> empty_streak;

  ChainWorker(const Mat& data, int g, std::uint64_t seed)
      : state{params_from_partition(
                  data, kmeans_init(data, g, seed * 0x9e3779b97f4a7c15ULL + 0x6b6dULL), g),
              Mat::Ones(data.rows(), g), std::vector<int>(data.rows(), 0)},
        rng(seed), empty_streak(g, 0) {
    run.seed = seed;
    run.max_empty_streak.assign(g, 0);
  }

  void advance(const Mat& data, const PriorHyper& prior, int sweeps, double guard_eps,
               int max_resample, int empty_flag_sweeps) {
    const int g = state.params.g();
    for (int s = 0; s < sweeps; ++s) {
      const SweepInfo info = gibbs_sweep(state, data, prior, rng, guard_eps, max_resample);
      run.draws.push_back(state.params);
      run.loglik_trace.push_back(info.loglik);
      run.labels.emplace_back(state.labels.begin(), state.labels.end());
      run.resample_counts.push_back(info.resamples);
      for (int k = 0; k < g; ++k) {
        empty_streak[k] = (info.counts[k] == 0) ? empty_streak[k] + 1 : 0;
        run.max_empty_streak[k] = std::max(run.max_empty_streak[k], empty_streak[k]);
        if (run.max_empty_streak[k] > empty_flag_sweeps) run.persistent_empty = true;
      }
    }
  }
};

} // namespace detail

/// Three independent chains from distinct k-means initializations, run until
/// the pooled log-likelihood PSRF drops below threshold (or the sweep budget
/// is exhausted), relabeled, then thinned to exactly n_retained pooled draws.
/// Point estimates are the averages of the retained draws.
inline GibbsFit run_chains(const Mat& data, int g, const PriorHyper& prior,
                           const GibbsConfig& config) {
  config.validate();
  prior.validate(data.cols());
  if (prior.dirichlet.size() != g)
    throw ShapeError("run_chains: Dirichlet concentration length must equal g");

  std::vector<detail::ChainWorker> workers;
  workers.reserve(config.n_chains);
  for (int c = 0; c < config.n_chains; ++c)
    workers.emplace_back(data, g,
                         Rng::substream(config.seed, static_cast<std::uint64_t>(c)).next_u64());

  int sweeps_done = 0;
  PsrfReport rep;
  bool converged = false;
  auto kept_length = [&](int done) {
    return done - static_cast<int>(config.burn_in_fraction * done);
  };
  while (sweeps_done < config.max_sweeps) {
    const int todo = std::min(config.psrf_interval, config.max_sweeps - sweeps_done);
    auto advance_one = [&](detail::ChainWorker& w) {
      w.advance(data, prior, todo, config.guard_eps, config.max_resample,
                config.empty_flag_sweeps);
    };
    if (config.parallel_chains) {
      std::vector<std::thread> threads;
      std::exception_ptr first_error;
      std::mutex err_mutex;
      for (auto& w : workers)
        threads.emplace_back([&advance_one, &w, &first_error, &err_mutex] {
          try {
            advance_one(w);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        });
      for (auto& t : threads) t.join();
      if (first_error) std::rethrow_exception(first_error);
    } else {
      for (auto& w : workers) advance_one(w);
    }
    sweeps_done += todo;

    const int kept = kept_length(sweeps_done);
    if (sweeps_done >= config.min_sweeps && kept >= 10) {
      std::vector<std::vector<double>> tails;
      for (const auto& w : workers)
        tails.emplace_back(w.run.loglik_trace.end() - kept, w.run.loglik_trace.end());
      rep = psrf(tails, config.psrf_threshold);
      if (rep.converged && config.n_chains * kept >= config.n_retained) {
        converged = true;
        break;
      }
    }
  }

  // Label alignment on copies of the kept segments (raw chain records stay as
  // sampled): match each sweep to a running within-chain reference, align
  // chains on their segment means, then apply the ascending-mixing-proportion
  // convention globally.
  const int kept = kept_length(sweeps_done);
  const auto p = data.cols();
  std::vector<std::vector<MixtureParams>> kept_draws;
  kept_draws.reserve(config.n_chains);
  for (const auto& w : workers) {
    std::vector<MixtureParams> seg(w.run.draws.end() - kept, w.run.draws.end());
    std::vector<Vec> ref;
    for (const auto& comp : seg.front().components) ref.push_back(comp.mu);
    for (auto& draw : seg) {
      std::vector<Vec> cur;
      for (const auto& comp : draw.components) cur.push_back(comp.mu);
      const auto perm = detail::best_matching_permutation(ref, cur);
      draw = detail::permute_components(draw, perm);
      for (int k = 0; k < g; ++k) ref[k] = 0.9 * ref[k] + 0.1 * draw.components[k].mu;
    }
    kept_draws.push_back(std::move(seg));
  }
  auto segment_mean_mu = [&](const std::vector<MixtureParams>& seg) {
    std::vector<Vec> mm(g, Vec::Zero(p));
    for (const auto& d : seg)
      for (int k = 0; k < g; ++k) mm[k] += d.components[k].mu;
    for (int k = 0; k < g; ++k) mm[k] /= static_cast<double>(seg.size());
    return mm;
  };
  const auto ref0 = segment_mean_mu(kept_draws.front());
  for (int c = 1; c < config.n_chains; ++c) {
    const auto perm = detail::best_matching_permutation(ref0, segment_mean_mu(kept_draws[c]));
    for (auto& d : kept_draws[c]) d = detail::permute_components(d, perm);
  }

  std::vector<MixtureParams> pooled;
  pooled.reserve(static_cast<std::size_t>(config.n_chains) * kept);
  for (const auto& kd : kept_draws) pooled.insert(pooled.end(), kd.begin(), kd.end());
  {
    Vec avg_pi = Vec::Zero(g);
    for (const auto& d : pooled) avg_pi += d.weights;
    std::vector<int> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return avg_pi[a] < avg_pi[b]; });
    for (auto& d : pooled) d = detail::permute_components(d, order);
  }

  std::vector<MixtureParams> retained;
  retained.reserve(config.n_retained);
  const auto total = static_cast<std::int64_t>(pooled.size());
  for (std::int64_t k = 0; k < config.n_retained; ++k)
    retained.push_back(pooled[static_cast<std::size_t>(k * total / config.n_retained)]);

  Vec pi = Vec::Zero(g);
  std::vector<Vec> mu(g, Vec::Zero(p)), alpha(g, Vec::Zero(p));
  std::vector<Mat> sigma(g, Mat::Zero(p, p));
  for (const auto& d : retained) {
    pi += d.weights;
    for (int k = 0; k < g; ++k) {
      mu[k] += d.components[k].mu;
      alpha[k] += d.components[k].alpha;
      sigma[k] += d.components[k].sigma.matrix();
    }
  }
  const double m = static_cast<double>(retained.size());
  pi /= pi.sum();
  std::vector<SalParams> comps;
  comps.reserve(g);
  for (int k = 0; k < g; ++k)
    comps.emplace_back(mu[k] / m, alpha[k] / m, SpdMatrix(sigma[k] / m));
  MixtureParams estimate(pi, std::move(comps));

  PosteriorSummary summary = summarize(retained);
  const double ll = mixture_log_likelihood(data, estimate);
  const Mat resp = responsibilities(data, estimate);
  std::vector<int> map_labels(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    Eigen::Index arg;
    resp.row(i).maxCoeff(&arg);
    map_labels[i] = static_cast<int>(arg);
  }
  std::vector<ChainRun> chains;
  chains.reserve(workers.size());
  for (auto& w : workers) chains.push_back(std::move(w.run));
  return GibbsFit(std::move(chains), rep, std::move(retained), std::move(estimate),
                  std::move(summary), std::move(map_labels), ll, converged, sweeps_done);
}

} // namespace salmix
