#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "salmix/mixture.hpp"

namespace salmix {

struct PsrfReport {
  double rhat = 1.0;
  int n_chains = 0;
  int n_kept = 0;
  bool converged = false;
  bool degenerate = false; // zero within-chain variance
};

/// Gelman-Rubin potential scale reduction factor on whole post-burn-in
/// chains: R = sqrt(var_plus / W), var_plus = ((n-1)/n) W + B/n.
inline PsrfReport psrf(const std::vector<std::vector<double>>& traces, double threshold = 1.1) {
  const int m = static_cast<int>(traces.size());
  if (m < 2) throw ShapeError("psrf: needs at least 2 chains");
  const std::size_t n = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != n) throw ShapeError("psrf: chains must have equal kept lengths");
  if (n < 10) throw ShapeError("psrf: kept length must be >= 10");

  std::vector<double> means(m), vars(m);
  for (int j = 0; j < m; ++j) {
    const auto& t = traces[j];
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : t) ss += (v - mean) * (v - mean);
    means[j] = mean;
    vars[j] = ss / static_cast<double>(n - 1);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b_over_n = 0.0;
  for (double mn : means) b_over_n += (mn - grand) * (mn - grand);
  b_over_n /= static_cast<double>(m - 1);

  PsrfReport rep;
  rep.n_chains = m;
  rep.n_kept = static_cast<int>(n);
  if (w <= 0.0) {
    rep.degenerate = true;
    rep.rhat = (b_over_n <= 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
  } else {
    const double nn = static_cast<double>(n);
    const double var_plus = (nn - 1.0) / nn * w + b_over_n;
    rep.rhat = std::sqrt(var_plus / w);
  }
  rep.converged = rep.rhat < threshold;
  return rep;
}

namespace detail {

inline bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (a[j] < b[j]) return true;
    if (a[j] > b[j]) return false;
  }
  return false;
}

inline MixtureParams permute_components(const MixtureParams& params,
                                        const std::vector<int>& perm) {
  Vec w(params.g());
  std::vector<SalParams> comps;
  comps.reserve(params.g());
  for (int j = 0; j < params.g(); ++j) {
    w[j] = params.weights[perm[j]];
    comps.push_back(params.components[perm[j]]);
  }
  return MixtureParams(w, std::move(comps));
}

/// Permutation minimizing the summed squared mu distance to a reference;
/// exhaustive for small G, greedy beyond.
inline std::vector<int> best_matching_permutation(const std::vector<Vec>& ref,
                                                  const std::vector<Vec>& cur) {
  const int g = static_cast<int>(ref.size());
  std::vector<int> perm(g);
  std::iota(perm.begin(), perm.end(), 0);
  if (g > 7) { // greedy fallback
    std::vector<bool> used(g, false);
    for (int j = 0; j < g; ++j) {
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      for (int k = 0; k < g; ++k) {
        if (used[k]) continue;
        const double d = (ref[j] - cur[k]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      used[best] = true;
      perm[j] = best;
    }
    return perm;
  }
  std::vector<int> trial = perm, best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int j = 0; j < g; ++j) cost += (ref[j] - cur[trial[j]]).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = trial;
    }
  } while (std::next_permutation(trial.begin(), trial.end()));
  return best;
}

} // namespace detail

/// Identifiability constraint of the summaries: within each sweep, order
/// components by ascending mixing proportion, ties by lexicographic mu.
inline std::vector<MixtureParams> relabel(const std::vector<MixtureParams>& samples) {
  std::vector<MixtureParams> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<int> idx(s.g());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (s.weights[a] != s.weights[b]) return s.weights[a] < s.weights[b];
      return detail::lex_less(s.components[a].mu, s.components[b].mu);
    });
    out.push_back(detail::permute_components(s, idx));
  }
  return out;
}

struct PosteriorSummary {
  struct Entry {
    std::string name;
    double mean;
    double sd;
    double lo; // 2.5 percentile
    double hi; // 97.5 percentile
  };
  std::vector<Entry> entries;

  const Entry& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw Error("PosteriorSummary: no entry named " + name);
  }
};

/// Type-7 empirical quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double prob) {
  if (v.empty()) throw ShapeError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

/// Means, sds and 95% percentile intervals for every scalar parameter, from
/// exactly the retained samples.
inline PosteriorSummary summarize(const std::vector<MixtureParams>& samples) {
  if (samples.size() < 2) throw ShapeError("summarize: needs >= 2 retained samples");
  const int g = samples.front().g();
  const auto p = samples.front().p();
  PosteriorSummary out;
  auto add = [&](const std::string& name, auto&& getter) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(getter(s));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (v.size() - 1.0));
    out.entries.push_back(
        {name, mean, sd, quantile_type7(v, 0.025), quantile_type7(v, 0.975)});
  };
  for (int k = 0; k < g; ++k) {
    const std::string kk = std::to_string(k + 1);
    add("pi[" + kk + "]", [k](const MixtureParams& s) { return s.weights[k]; });
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::string jj = std::to_string(j + 1);
      add("mu[" + kk + "][" + jj + "]",
          [k, j](const MixtureParams& s) { return s.components[k].mu[j]; });
      add("alpha[" + kk + "][" + jj + "]",
          [k, j](const MixtureParams& s) { return s.components[k].alpha[j]; });
    }
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i; j < p; ++j)
        add("sigma[" + kk + "][" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
            [k, i, j](const MixtureParams& s) { return s.components[k].sigma.matrix()(i, j); });
  }
  return out;
}

} // namespace salmix
