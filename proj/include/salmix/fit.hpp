#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "salmix/gibbs.hpp"
#include "salmix/metrics.hpp"

namespace salmix {

enum class Engine { Em, Gibbs };

inline std::string engine_name(Engine e) { return e == Engine::Em ? "em" : "gibbs"; }

struct FitOptions {
  EmConfig em_config;
  GibbsConfig gibbs_config;
  std::optional<PriorHyper> prior; // default: weakly informative from the data
  RhoConvention rho = RhoConvention::FullCovariance;
  std::uint64_t seed = 20240401;
  bool extend_on_boundary = true; // grow g range while the top g keeps winning
  int max_extra_components = 3;
};

/// One engine, one component count.
struct ModelFit {
  Engine engine;
  int g = 0;
  MixtureParams params;
  double loglik = 0.0;
  FitScore score;
  bool converged = false;
  double wall_seconds = 0.0;
  std::vector<int> map_labels;
  std::shared_ptr<EmResult> em;     // engine == Em
  std::shared_ptr<GibbsFit> gibbs;  // engine == Gibbs

  ModelFit(Engine e, int g_, MixtureParams params_)
      : engine(e), g(g_), params(std::move(params_)) {}
};

struct SelectionResult {
  std::vector<ModelFit> fits;
  std::vector<std::pair<int, std::string>> failures; // (g, reason)
  int best_bic_g = 0;
  int best_icl_g = 0;

  const ModelFit& by_g(int g) const {
    for (const auto& f : fits)
      if (f.g == g) return f;
    throw Error("SelectionResult: no successful fit for g = " + std::to_string(g));
  }
  const ModelFit& best_bic() const { return by_g(best_bic_g); }
  const ModelFit& best_icl() const { return by_g(best_icl_g); }
};

namespace detail {

inline std::vector<int> map_labels_from(const Mat& z) {
  std::vector<int> labels(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index arg;
    z.row(i).maxCoeff(&arg);
    labels[i] = static_cast<int>(arg);
  }
  return labels;
}

} // namespace detail

/// Fit one engine at one component count. The marginal responsibilities of
/// the returned parameters drive both the ICL entropy and the MAP labels.
inline ModelFit fit_single(const Mat& data, Engine engine, int g, const FitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  std::optional<ModelFit> out;
  if (engine == Engine::Em) {
    EmConfig cfg = options.em_config;
    cfg.restart_seed = Rng::substream(options.seed, 1000 + g).next_u64();
    const auto part = kmeans_init(data, g, Rng::substream(options.seed, g).next_u64());
    auto result = std::make_shared<EmResult>(run_em(data, g, part, cfg));
    out.emplace(engine, g, result->params);
    out->loglik = result->loglik_trace.back();
    out->converged = result->converged;
    out->em = std::move(result);
  } else {
    GibbsConfig cfg = options.gibbs_config;
    cfg.seed = Rng::substream(options.seed, 2000 + g).next_u64();
    PriorHyper prior =
        options.prior ? *options.prior : PriorHyper::weakly_informative(data, g);
    if (prior.dirichlet.size() != g) prior.dirichlet = Vec::Ones(g) * prior.dirichlet[0];
    auto result = std::make_shared<GibbsFit>(run_chains(data, g, prior, cfg));
    out.emplace(engine, g, result->estimate);
    out->loglik = result->loglik_at_estimate;
    out->converged = result->converged;
    out->gibbs = std::move(result);
  }
  const Mat z = responsibilities(data, out->params);
  out->map_labels = detail::map_labels_from(z);
  out->score = score_fit(out->loglik, g, static_cast<int>(data.cols()), data.rows(), z,
                         options.rho);
  out->wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(*out);
}

/// Fit every g in the range, select by BIC and ICL, optionally extending the
/// range upward while a boundary solution keeps being selected.
inline SelectionResult fit_over_range(const Mat& data, Engine engine, std::vector<int> g_range,
                                      const FitOptions& options) {
  if (g_range.empty()) throw ConfigError("fit_over_range: empty g range");
  std::sort(g_range.begin(), g_range.end());
  SelectionResult sel;
  auto fit_g = [&](int g) {
    try {
      sel.fits.push_back(fit_single(data, engine, g, options));
    } catch (const Error& e) {
      sel.failures.emplace_back(g, e.what());
    }
  };
  for (int g : g_range) fit_g(g);

  auto best_by = [&](auto key) {
    int best_g = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (const auto& f : sel.fits)
      if (key(f.score) > best_v) {
        best_v = key(f.score);
        best_g = f.g;
      }
    return best_g;
  };
  auto rescore = [&] {
    sel.best_bic_g = best_by([](const FitScore& s) { return s.bic; });
    sel.best_icl_g = best_by([](const FitScore& s) { return s.icl; });
  };
  rescore();

  // a single-G request is exact; extension applies to genuine range searches
  if (options.extend_on_boundary && g_range.size() > 1) {
    int extra = 0;
    while (extra < options.max_extra_components && !sel.fits.empty() &&
           (sel.best_bic_g == g_range.back() || sel.best_icl_g == g_range.back())) {
      const int next = g_range.back() + 1;
      g_range.push_back(next);
      fit_g(next);
      rescore();
      ++extra;
    }
  }
  return sel;
}

} // namespace salmix
