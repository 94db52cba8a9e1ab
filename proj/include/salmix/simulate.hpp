#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "salmix/fit.hpp"

namespace salmix {

struct ScenarioSpec {
  std::string name;
  MixtureParams truth;
  int n_per_dataset = 500;
  int n_datasets = 100;
  std::uint64_t seed = 1;
};

namespace detail {

inline SalParams make_component(std::initializer_list<double> mu,
                                std::initializer_list<double> alpha,
                                std::initializer_list<double> sigma_rowmajor) {
  const auto p = static_cast<Eigen::Index>(mu.size());
  Vec m(p), a(p);
  std::copy(mu.begin(), mu.end(), m.data());
  std::copy(alpha.begin(), alpha.end(), a.data());
  Mat s(p, p);
  auto it = sigma_rowmajor.begin();
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) s(i, j) = *it++;
  return SalParams(std::move(m), std::move(a), SpdMatrix(std::move(s)));
}

} // namespace detail

/// Two well separated bivariate clusters.
inline ScenarioSpec scenario_1() {
  Vec w(2);
  w << 0.5, 0.5;
  MixtureParams truth(w, {detail::make_component({0, 5}, {2, 2}, {1, 0.5, 0.5, 1}),
                          detail::make_component({0, -2}, {2, 1}, {1, 0, 0, 1})});
  return {"scenario1", std::move(truth), 500, 100, 101};
}

/// The same clusters moved closer together.
inline ScenarioSpec scenario_2() {
  Vec w(2);
  w << 0.5, 0.5;
  MixtureParams truth(w, {detail::make_component({0, 3}, {2, 2}, {1, 0.5, 0.5, 1}),
                          detail::make_component({0, -1}, {2, 1}, {1, 0, 0, 1})});
  return {"scenario2", std::move(truth), 500, 100, 102};
}

/// The inverted trillium: three clusters skewed toward the origin.
inline ScenarioSpec scenario_3() {
  Vec w(3);
  w << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  MixtureParams truth(w, {detail::make_component({0, 10}, {0, -3}, {1, 0.5, 0.5, 1}),
                          detail::make_component({-10, -10}, {3, 3}, {1, 0, 0, 1}),
                          detail::make_component({10, -10}, {-3, 3}, {1, 0.25, 0.25, 1})});
  return {"scenario3", std::move(truth), 500, 100, 103};
}

/// Two three-dimensional clusters (the realized truth values).
inline ScenarioSpec scenario_4() {
  Vec w(2);
  w << 0.5, 0.5;
  MixtureParams truth(
      w, {detail::make_component({0, 0, 0}, {2.30, 1.79, 0.69},
                                 {6.29, -1.32, 0.68, -1.32, 7.56, -0.04, 0.68, -0.04, 3.89}),
          detail::make_component({-4.92, 0.24, 4.32}, {-0.60, 1.54, 3.43},
                                 {4.73, -1.41, 0.71, -1.41, 4.63, 0.04, 0.71, 0.04, 1.19})});
  return {"scenario4", std::move(truth), 500, 100, 104};
}

inline ScenarioSpec builtin_scenario(int which) {
  switch (which) {
    case 1: return scenario_1();
    case 2: return scenario_2();
    case 3: return scenario_3();
    case 4: return scenario_4();
    default: throw ConfigError("builtin_scenario: expected 1..4");
  }
}

/// Mixture draw: component index by the mixing proportions, then the
/// stochastic representation X = mu + W alpha + sqrt(W) N. True labels come
/// along for classification scoring.
inline std::pair<Mat, std::vector<int>> rmsal(const MixtureParams& params, int n, Rng& rng) {
  if (n < 1) throw DomainError("rmsal: n must be >= 1");
  Mat data(n, params.p());
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    int k = params.g() - 1;
    for (int j = 0; j < params.g(); ++j) {
      u -= params.weights[j];
      if (u <= 0.0) {
        k = j;
        break;
      }
    }
    labels[i] = k;
    data.row(i) = sal_sample(params.components[k], 1, rng).row(0);
  }
  return {std::move(data), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Simulation studies
// ---------------------------------------------------------------------------

struct EngineSelection {
  bool ok = false;
  std::string failure;
  int selected_g_bic = 0;
  int selected_g_icl = 0;
  double ari_bic = 0.0;
  double ari_icl = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> recovery; // true-G estimate, matched to truth, flattened
};

struct DatasetResult {
  EngineSelection em;
  EngineSelection gibbs;
};

struct StudyAggregates {
  int n_ok = 0;
  double mean_ari_bic = 0.0, sd_ari_bic = 0.0;
  double mean_ari_icl = 0.0, sd_ari_icl = 0.0;
  int correct_g_bic = 0, correct_g_icl = 0;
  double mean_wall_seconds = 0.0;
  std::vector<double> recovery_mean;
  std::vector<double> recovery_sd;
};

struct StudyReport {
  std::string scenario;
  MixtureParams truth;
  int n_per_dataset = 0;
  int n_datasets = 0;
  std::uint64_t seed = 0;
  std::vector<int> g_range;
  std::vector<DatasetResult> per_dataset;
  StudyAggregates em;
  StudyAggregates gibbs;
  std::vector<std::string> recovery_names;

  explicit StudyReport(MixtureParams truth_) : truth(std::move(truth_)) {}
};

struct StudyOptions {
  bool run_em = true;
  bool run_gibbs = true;
  std::vector<int> g_range = {1, 2, 3};
  FitOptions fit;
  int n_threads = static_cast<int>(std::thread::hardware_concurrency());
};

namespace detail {

/// Components of `est` permuted to best match the truth's mu layout.
inline MixtureParams match_to_truth(const MixtureParams& est, const MixtureParams& truth) {
  std::vector<Vec> ref, cur;
  for (const auto& c : truth.components) ref.push_back(c.mu);
  for (const auto& c : est.components) cur.push_back(c.mu);
  return permute_components(est, best_matching_permutation(ref, cur));
}

inline std::vector<double> flatten_params(const MixtureParams& p) {
  std::vector<double> v;
  for (int k = 0; k < p.g(); ++k) {
    v.push_back(p.weights[k]);
    for (Eigen::Index j = 0; j < p.p(); ++j) v.push_back(p.components[k].mu[j]);
    for (Eigen::Index j = 0; j < p.p(); ++j) v.push_back(p.components[k].alpha[j]);
    for (Eigen::Index i = 0; i < p.p(); ++i)
      for (Eigen::Index j = i; j < p.p(); ++j)
        v.push_back(p.components[k].sigma.matrix()(i, j));
  }
  return v;
}

inline std::vector<std::string> flatten_names(int g, Eigen::Index p) {
  std::vector<std::string> v;
  for (int k = 1; k <= g; ++k) {
    const std::string kk = std::to_string(k);
    v.push_back("pi[" + kk + "]");
    for (Eigen::Index j = 1; j <= p; ++j)
      v.push_back("mu[" + kk + "][" + std::to_string(j) + "]");
    for (Eigen::Index j = 1; j <= p; ++j)
      v.push_back("alpha[" + kk + "][" + std::to_string(j) + "]");
    for (Eigen::Index i = 1; i <= p; ++i)
      for (Eigen::Index j = i; j <= p; ++j)
        v.push_back("sigma[" + kk + "][" + std::to_string(i) + "][" + std::to_string(j) + "]");
  }
  return v;
}

inline EngineSelection run_engine_on_dataset(const Mat& data, const std::vector<int>& labels,
                                             Engine engine, const MixtureParams& truth,
                                             const StudyOptions& options,
                                             std::uint64_t dataset_seed) {
  EngineSelection out;
  const auto start = std::chrono::steady_clock::now();
  try {
    FitOptions fo = options.fit;
    fo.seed = dataset_seed ^ (engine == Engine::Em ? 0x1ULL : 0x2ULL);
    // datasets already fan out across the pool; keep chains sequential then
    fo.gibbs_config.parallel_chains = options.n_threads <= 1;
    SelectionResult sel = fit_over_range(data, engine, options.g_range, fo);
    if (sel.fits.empty())
      throw Error(sel.failures.empty() ? "no fits" : sel.failures.front().second);
    out.selected_g_bic = sel.best_bic_g;
    out.selected_g_icl = sel.best_icl_g;
    out.ari_bic = ari(labels, sel.best_bic().map_labels);
    out.ari_icl = ari(labels, sel.best_icl().map_labels);
    for (const auto& f : sel.fits)
      if (f.g == truth.g())
        out.recovery = flatten_params(match_to_truth(f.params, truth));
    out.ok = true;
  } catch (const std::exception& e) {
    out.failure = e.what();
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline void aggregate(const std::vector<DatasetResult>& results, bool use_em, int true_g,
                      std::size_t n_params, StudyAggregates& agg) {
  std::vector<double> ab, ai;
  std::vector<std::vector<double>> recov;
  for (const auto& r : results) {
    const EngineSelection& s = use_em ? r.em : r.gibbs;
    if (!s.ok) continue;
    ++agg.n_ok;
    ab.push_back(s.ari_bic);
    ai.push_back(s.ari_icl);
    agg.correct_g_bic += (s.selected_g_bic == true_g);
    agg.correct_g_icl += (s.selected_g_icl == true_g);
    agg.mean_wall_seconds += s.wall_seconds;
    if (s.recovery.size() == n_params) recov.push_back(s.recovery);
  }
  auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) return;
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    sd = 0.0;
    if (v.size() > 1) {
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / (static_cast<double>(v.size()) - 1.0));
    }
  };
  mean_sd(ab, agg.mean_ari_bic, agg.sd_ari_bic);
  mean_sd(ai, agg.mean_ari_icl, agg.sd_ari_icl);
  if (agg.n_ok > 0) agg.mean_wall_seconds /= agg.n_ok;
  agg.recovery_mean.assign(n_params, 0.0);
  agg.recovery_sd.assign(n_params, 0.0);
  if (!recov.empty()) {
    for (std::size_t j = 0; j < n_params; ++j) {
      std::vector<double> col;
      col.reserve(recov.size());
      for (const auto& r : recov) col.push_back(r[j]);
      mean_sd(col, agg.recovery_mean[j], agg.recovery_sd[j]);
    }
  }
}

} // namespace detail

/// Simulate n_datasets sets from the scenario truth, fit the requested
/// engines over the g range, select by BIC and ICL, and aggregate parameter
/// recovery, ARI, selection counts, and wall-clock. Deterministic given the
/// spec seed; datasets fan out over a small thread pool.
inline StudyReport run_study(const ScenarioSpec& spec, const StudyOptions& options) {
  StudyReport report(spec.truth);
  report.scenario = spec.name;
  report.n_per_dataset = spec.n_per_dataset;
  report.n_datasets = spec.n_datasets;
  report.seed = spec.seed;
  report.g_range = options.g_range;
  report.recovery_names = detail::flatten_names(spec.truth.g(), spec.truth.p());
  report.per_dataset.resize(spec.n_datasets);

  std::atomic<int> next{0};
  const int n_workers = std::max(1, std::min(options.n_threads, spec.n_datasets));
  auto worker = [&] {
    for (;;) {
      const int d = next.fetch_add(1);
      if (d >= spec.n_datasets) return;
      Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(d));
      auto [data, labels] = rmsal(spec.truth, spec.n_per_dataset, rng);
      const std::uint64_t fit_seed = Rng::substream(spec.seed, 7000 + d).next_u64();
      DatasetResult& res = report.per_dataset[d];
      if (options.run_em)
        res.em = detail::run_engine_on_dataset(data, labels, Engine::Em, spec.truth, options,
                                               fit_seed);
      if (options.run_gibbs)
        res.gibbs = detail::run_engine_on_dataset(data, labels, Engine::Gibbs, spec.truth,
                                                  options, fit_seed);
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const std::size_t n_params = report.recovery_names.size();
  if (options.run_em)
    detail::aggregate(report.per_dataset, true, spec.truth.g(), n_params, report.em);
  if (options.run_gibbs)
    detail::aggregate(report.per_dataset, false, spec.truth.g(), n_params, report.gibbs);
  return report;
}

} // namespace salmix
