// Test-only numerical oracles, independent of the library's own evaluation
// paths: panelled adaptive Simpson quadrature and a Nelder-Mead maximizer.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

namespace detail {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 60 || std::abs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
}

} // namespace detail

/// Adaptive Simpson on one panel.
inline double integrate_panel(const std::function<double(double)>& f, double a, double b,
                              double eps) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, eps, 0);
}

/// Integral over (lo, hi) split into geometric panels anchored at `scale`, so
/// a sharply peaked integrand cannot fool a single adaptive pass.
inline double integrate_peaked(const std::function<double(double)>& f, double lo, double hi,
                               double scale, double eps = 1e-12) {
  std::vector<double> knots{lo};
  for (double k : {1e-6, 1e-4, 1e-2, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0,
                   1024.0, 8192.0}) {
    const double t = scale * k;
    if (t > lo && t < hi) knots.push_back(t);
  }
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    total += integrate_panel(f, knots[i], knots[i + 1], eps / static_cast<double>(knots.size()));
  return total;
}

/// Nelder-Mead minimizer (maximize by negating), enough for low-dimensional
/// smooth objectives used as independent M-step checks.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> start, double step = 0.1,
                                       int max_iter = 20000, double ftol = 1e-13) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i)
    simplex[i + 1][i] += (start[i] != 0.0 ? std::abs(start[i]) : 1.0) * step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> order(n + 1);
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s2[i] = simplex[order[i]];
      f2[i] = fv[order[i]];
    }
    simplex = std::move(s2);
    fv = std::move(f2);
    if (std::abs(fv[n] - fv[0]) < ftol * (std::abs(fv[0]) + ftol)) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

    auto blend = [&](double c) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + c * (simplex[n][j] - centroid[j]);
      return x;
    };
    const auto reflected = blend(-1.0);
    const double fr = f(reflected);
    if (fr < fv[0]) {
      const auto expanded = blend(-2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[n] = expanded;
        fv[n] = fe;
      } else {
        simplex[n] = reflected;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = reflected;
      fv[n] = fr;
    } else {
      const auto contracted = blend(0.5);
      const double fc = f(contracted);
      if (fc < fv[n]) {
        simplex[n] = contracted;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j)
            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return simplex[best];
}

} // namespace oracles
