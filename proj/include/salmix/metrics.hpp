#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "salmix/numerics.hpp"

namespace salmix {

enum class RhoConvention {
  FullCovariance, // G-1 + 2Gp + G p(p+1)/2
  Paper           // G-1 + 2Gp + G p(p-1)/2, as printed with Eq. (7)
};

inline int count_free_params(int g, int p, RhoConvention convention = RhoConvention::FullCovariance) {
  if (g < 1 || p < 1) throw DomainError("count_free_params: g, p must be >= 1");
  const int cov = (convention == RhoConvention::Paper) ? g * p * (p - 1) / 2
                                                       : g * p * (p + 1) / 2;
  return g - 1 + 2 * g * p + cov;
}

/// BIC = 2 l(x | theta_hat) - rho log n; larger is better.
inline double bic(double loglik, int rho, long n) {
  if (n < 1) throw DomainError("bic: n must be >= 1");
  return 2.0 * loglik - static_cast<double>(rho) * std::log(static_cast<double>(n));
}

/// ICL = BIC + sum_i sum_g MAP(z_ig) log(z_ig). The MAP entry's log is
/// floored near the smallest representable log so certain-but-underflowed
/// rows stay finite.
inline double icl(double bic_value, const Mat& z) {
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index arg;
    z.row(i).maxCoeff(&arg);
    entropy += std::max(std::log(z(i, arg)), -745.0);
  }
  return bic_value + entropy;
}

struct FitScore {
  double loglik = 0.0;
  int n_free_params = 0;
  double bic = 0.0;
  double icl = 0.0;
  int g = 0;
};

inline FitScore score_fit(double loglik, int g, int p, long n, const Mat& z,
                          RhoConvention convention = RhoConvention::FullCovariance) {
  FitScore s;
  s.loglik = loglik;
  s.g = g;
  s.n_free_params = count_free_params(g, p, convention);
  s.bic = bic(loglik, s.n_free_params, n);
  s.icl = icl(s.bic, z);
  return s;
}

namespace detail {

template <typename T>
std::vector<int> dense_codes(const std::vector<T>& labels, int& k) {
  std::map<T, int> seen;
  std::vector<int> codes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = seen.emplace(labels[i], static_cast<int>(seen.size()));
    codes[i] = it->second;
  }
  k = static_cast<int>(seen.size());
  return codes;
}

inline double comb2(double n) { return 0.5 * n * (n - 1.0); }

} // namespace detail

/// Hubert-Arabie adjusted Rand index. Two single-cluster partitions agree
/// perfectly; that degenerate case returns 1 by convention.
template <typename T, typename U>
double ari(const std::vector<T>& labels_a, const std::vector<U>& labels_b) {
  if (labels_a.size() != labels_b.size() || labels_a.size() < 2)
    throw ShapeError("ari: labelings must have equal length >= 2");
  int ka = 0, kb = 0;
  const auto ca = detail::dense_codes(labels_a, ka);
  const auto cb = detail::dense_codes(labels_b, kb);
  Mat table = Mat::Zero(ka, kb);
  for (std::size_t i = 0; i < ca.size(); ++i) table(ca[i], cb[i]) += 1.0;

  double sum_ij = 0.0;
  for (Eigen::Index i = 0; i < ka; ++i)
    for (Eigen::Index j = 0; j < kb; ++j) sum_ij += detail::comb2(table(i, j));
  double sum_a = 0.0, sum_b = 0.0;
  for (Eigen::Index i = 0; i < ka; ++i) sum_a += detail::comb2(table.row(i).sum());
  for (Eigen::Index j = 0; j < kb; ++j) sum_b += detail::comb2(table.col(j).sum());
  const double expected = sum_a * sum_b / detail::comb2(static_cast<double>(ca.size()));
  const double denom = 0.5 * (sum_a + sum_b) - expected;
  if (denom == 0.0) return 1.0;
  return (sum_ij - expected) / denom;
}

struct ClassificationReport {
  std::vector<std::string> true_classes;
  std::vector<std::string> predicted_classes;
  Eigen::MatrixXi table; // rows: true classes, cols: predicted
  double hit_rate = 0.0; // best-permutation accuracy
  double ari = 0.0;
};

/// Cross-tabulation with chance-corrected agreement and the accuracy under
/// the best matching of predicted to true classes.
template <typename T, typename U>
ClassificationReport classification_report(const std::vector<T>& true_labels,
                                           const std::vector<U>& map_labels) {
  if (true_labels.size() != map_labels.size() || true_labels.size() < 2)
    throw ShapeError("classification_report: labelings must have equal length >= 2");
  int ka = 0, kb = 0;
  const auto ca = detail::dense_codes(true_labels, ka);
  const auto cb = detail::dense_codes(map_labels, kb);
  ClassificationReport rep;
  rep.table = Eigen::MatrixXi::Zero(ka, kb);
  for (std::size_t i = 0; i < ca.size(); ++i) rep.table(ca[i], cb[i]) += 1;
  {
    std::map<T, int> seen_a;
    for (const auto& l : true_labels) seen_a.emplace(l, static_cast<int>(seen_a.size()));
    rep.true_classes.resize(ka);
    for (const auto& [name, code] : seen_a) {
      std::ostringstream os;
      os << name;
      rep.true_classes[code] = os.str();
    }
    std::map<U, int> seen_b;
    for (const auto& l : map_labels) seen_b.emplace(l, static_cast<int>(seen_b.size()));
    rep.predicted_classes.resize(kb);
    for (const auto& [name, code] : seen_b) {
      std::ostringstream os;
      os << name;
      rep.predicted_classes[code] = os.str();
    }
  }

  // best assignment of predicted columns to true rows
  const int big = std::max(ka, kb);
  std::vector<int> perm(big);
  std::iota(perm.begin(), perm.end(), 0);
  long best = -1;
  do {
    long agree = 0;
    for (int j = 0; j < kb; ++j)
      if (perm[j] < ka) agree += rep.table(perm[j], j);
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  rep.hit_rate = static_cast<double>(best) / static_cast<double>(ca.size());
  rep.ari = ari(ca, cb);
  return rep;
}

} // namespace salmix
