#include <catch2/catch_amalgamated.hpp>

#include "salmix/mixture.hpp"

using namespace salmix;

namespace {

SalParams laplace1d(double mu, double alpha, double s2) {
  Vec m(1), a(1);
  m << mu;
  a << alpha;
  Mat s(1, 1);
  s << s2;
  return SalParams(m, a, SpdMatrix(s));
}

MixtureParams two_component_2d() {
  Vec mu1(2), a1(2), mu2(2), a2(2);
  mu1 << 0, 5;
  a1 << 2, 2;
  mu2 << 0, -2;
  a2 << 2, 1;
  Mat s1(2, 2), s2(2, 2);
  s1 << 1, 0.5, 0.5, 1;
  s2 << 1, 0, 0, 1;
  Vec w(2);
  w << 0.5, 0.5;
  return MixtureParams(w, {SalParams(mu1, a1, SpdMatrix(s1)), SalParams(mu2, a2, SpdMatrix(s2))});
}

} // namespace

TEST_CASE("MixtureParams validates weights and dimensions") {
  Vec w(2);
  w << 0.6, 0.5;
  REQUIRE_THROWS_AS(MixtureParams(w, {laplace1d(0, 0, 1), laplace1d(1, 0, 1)}), DomainError);
  Vec w0(2);
  w0 << 1.0, 0.0;
  REQUIRE_THROWS_AS(MixtureParams(w0, {laplace1d(0, 0, 1), laplace1d(1, 0, 1)}), DomainError);
}

TEST_CASE("single-component log-likelihood reduces to summed densities") {
  Vec w(1);
  w << 1.0;
  const MixtureParams params(w, {laplace1d(0.0, 0.5, 1.3)});
  Mat data(4, 1);
  data << -1.0, 0.2, 0.9, 3.0;
  double direct = 0.0;
  for (int i = 0; i < 4; ++i)
    direct += sal_log_density(data.row(i).transpose(), params.components[0]);
  REQUIRE_THAT(mixture_log_likelihood(data, params), Catch::Matchers::WithinAbs(direct, 1e-12));
}

TEST_CASE("mixture log-likelihood against hand-summed univariate Laplace") {
  // standard Laplace components: f(x) = (1/sqrt(2)) exp(-sqrt(2)|x - mu|)
  Vec w(2);
  w << 0.3, 0.7;
  const MixtureParams params(w, {laplace1d(-1.0, 0.0, 1.0), laplace1d(2.0, 0.0, 1.0)});
  Mat data(5, 1);
  data << -2.0, -0.5, 0.0, 1.5, 4.0;
  double want = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double x = data(i, 0);
    const double f1 = std::exp(-std::sqrt(2.0) * std::abs(x + 1.0)) / std::sqrt(2.0);
    const double f2 = std::exp(-std::sqrt(2.0) * std::abs(x - 2.0)) / std::sqrt(2.0);
    want += std::log(0.3 * f1 + 0.7 * f2);
  }
  REQUIRE_THAT(mixture_log_likelihood(data, params), Catch::Matchers::WithinAbs(want, 1e-10));
}

TEST_CASE("small mixing weight perturbs the likelihood continuously") {
  // points sit inside component 1's region, so the density ratio f2/f1 stays
  // bounded and the epsilon-weight shift is O(eps)
  const auto params = two_component_2d();
  Mat data(3, 2);
  data << 1.0, 6.0, -0.5, 4.0, 2.0, 8.0;
  Vec w1(1);
  w1 << 1.0;
  const MixtureParams one(w1, {params.components[0]});
  const double base = mixture_log_likelihood(data, one);
  const double eps = 1e-9;
  Vec w2(2);
  w2 << 1.0 - eps, eps;
  const MixtureParams two(w2, {params.components[0], params.components[1]});
  REQUIRE_THAT(mixture_log_likelihood(data, two), Catch::Matchers::WithinAbs(base, 1e-5));
}

TEST_CASE("likelihood reports the pole's row and component") {
  auto params = two_component_2d();
  Mat data(2, 2);
  data << 1.0, 1.0, 0.0, -2.0; // second row sits exactly on mu_2
  try {
    mixture_log_likelihood(data, params);
    FAIL("expected UnboundedLikelihood");
  } catch (const UnboundedLikelihood& e) {
    REQUIRE(e.row == 1);
    REQUIRE(e.component == 1);
  }
}

TEST_CASE("likelihood is invariant under component permutation") {
  const auto params = two_component_2d();
  Vec w(2);
  w << params.weights[1], params.weights[0];
  const MixtureParams flipped(w, {params.components[1], params.components[0]});
  Mat data(6, 2);
  data << 1, 6, 0, 4, 2, 8, -1, -2, 0.5, -1, 3, 0;
  REQUIRE_THAT(mixture_log_likelihood(data, params),
               Catch::Matchers::WithinAbs(mixture_log_likelihood(data, flipped), 1e-12));
}

TEST_CASE("accumulate_stats hand-worked single observation") {
  // n = 1, z = 1, w = 2, x = 3
  Mat data(1, 1);
  data << 3.0;
  LatentState latent{Mat::Ones(1, 1), Mat::Constant(1, 1, 2.0)};
  const auto stats = accumulate_stats(data, latent);
  REQUIRE(stats.size() == 1);
  REQUIRE(stats[0].t0 == 1.0);
  REQUIRE(stats[0].t1[0] == 3.0);
  REQUIRE(stats[0].t2[0] == 1.5);
  REQUIRE(stats[0].t3 == 1.0);
  REQUIRE(stats[0].t4 == 0.25);
  REQUIRE(stats[0].t5(0, 0) == 2.25);
}

TEST_CASE("empty component accumulates zero statistics") {
  Mat data(3, 2);
  data << 1, 2, 3, 4, 5, 6;
  Mat z(3, 2);
  z << 1, 0, 1, 0, 1, 0;
  Mat w = Mat::Constant(3, 2, 1.5);
  const auto stats = accumulate_stats(data, LatentState{z, w});
  REQUIRE(stats[1].t0 == 0.0);
  REQUIRE(stats[1].t1.isZero());
  REQUIRE(stats[1].t3 == 0.0);
  REQUIRE(stats[1].t5.isZero());
}

TEST_CASE("doubling the scales doubles t3, halves t4, fixes t1") {
  Rng rng(17);
  Mat data(8, 2);
  Mat z(8, 2), w(8, 2);
  for (int i = 0; i < 8; ++i) {
    data(i, 0) = rng.normal();
    data(i, 1) = rng.normal();
    const double u = rng.uniform();
    z(i, 0) = u;
    z(i, 1) = 1.0 - u;
    w(i, 0) = 0.5 + rng.uniform();
    w(i, 1) = 0.5 + rng.uniform();
  }
  const auto base = accumulate_stats(data, LatentState{z, w});
  const auto doubled = accumulate_stats(data, LatentState{z, 2.0 * w});
  for (int k = 0; k < 2; ++k) {
    REQUIRE_THAT(doubled[k].t3, Catch::Matchers::WithinRel(2.0 * base[k].t3, 1e-12));
    REQUIRE_THAT(doubled[k].t4, Catch::Matchers::WithinRel(0.5 * base[k].t4, 1e-12));
    REQUIRE(doubled[k].t1 == base[k].t1);
  }
}

TEST_CASE("accumulate_stats equals a naive double loop") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + rng.uniform_int(19);
    const int g = 1 + rng.uniform_int(3);
    Mat data(n, 2), z(n, g), w(n, g);
    for (int i = 0; i < n; ++i) {
      data(i, 0) = rng.normal();
      data(i, 1) = rng.normal();
      double row = 0.0;
      for (int k = 0; k < g; ++k) {
        z(i, k) = rng.uniform();
        row += z(i, k);
        w(i, k) = 0.1 + 3.0 * rng.uniform();
      }
      z.row(i) /= row;
    }
    const auto stats = accumulate_stats(data, LatentState{z, w});
    for (int k = 0; k < g; ++k) {
      double t0 = 0, t3 = 0, t4 = 0;
      Vec t1 = Vec::Zero(2), t2 = Vec::Zero(2);
      Mat t5 = Mat::Zero(2, 2);
      for (int i = 0; i < n; ++i) {
        const Vec x = data.row(i).transpose();
        t0 += z(i, k);
        t1 += z(i, k) * x;
        t2 += z(i, k) / w(i, k) * x;
        t3 += 0.5 * z(i, k) * w(i, k);
        t4 += 0.5 * z(i, k) / w(i, k);
        t5 += 0.5 * z(i, k) / w(i, k) * x * x.transpose();
      }
      REQUIRE_THAT(stats[k].t0, Catch::Matchers::WithinAbs(t0, 1e-12));
      REQUIRE((stats[k].t1 - t1).cwiseAbs().maxCoeff() < 1e-12);
      REQUIRE((stats[k].t2 - t2).cwiseAbs().maxCoeff() < 1e-12);
      REQUIRE_THAT(stats[k].t3, Catch::Matchers::WithinAbs(t3, 1e-12));
      REQUIRE_THAT(stats[k].t4, Catch::Matchers::WithinAbs(t4, 1e-12));
      REQUIRE((stats[k].t5 - t5).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("LatentState validation") {
  Mat z(1, 2), w(1, 2);
  z << 0.7, 0.2; // does not sum to one
  w << 1.0, 1.0;
  const LatentState bad{z, w};
  REQUIRE_THROWS_AS(bad.validate(), DomainError);
  Mat z2(1, 2), w2(1, 2);
  z2 << 0.5, 0.5;
  w2 << 1.0, -1.0;
  const LatentState badw{z2, w2};
  REQUIRE_THROWS_AS(badw.validate(), DomainError);
}

TEST_CASE("identical components give responsibilities equal to the weights") {
  Vec w(2);
  w << 0.3, 0.7;
  const auto c = laplace1d(0.0, 0.5, 1.0);
  const MixtureParams params(w, {c, c});
  Mat data(3, 1);
  data << -1.0, 0.4, 2.0;
  const Mat z = responsibilities(data, params);
  for (int i = 0; i < 3; ++i) {
    REQUIRE_THAT(z(i, 0), Catch::Matchers::WithinAbs(0.3, 1e-12));
    REQUIRE_THAT(z(i, 1), Catch::Matchers::WithinAbs(0.7, 1e-12));
  }
}

TEST_CASE("deep interior points are assigned with near certainty") {
  const auto params = two_component_2d();
  Mat data(1, 2);
  data << 2.0, 7.0; // far into component 1's high-density region
  const Mat z = responsibilities(data, params);
  REQUIRE(z(0, 0) > 0.99);
}

TEST_CASE("responsibility rows are normalized and recompose the mixture") {
  const auto params = two_component_2d();
  Rng rng(3);
  Mat data(20, 2);
  for (int i = 0; i < 20; ++i) {
    data(i, 0) = 4.0 * rng.normal();
    data(i, 1) = 4.0 * rng.normal();
  }
  const Mat z = responsibilities(data, params);
  const Mat lt = component_log_terms(data, params);
  for (int i = 0; i < 20; ++i) {
    REQUIRE_THAT(z.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    // sum_g pi_g f_g equals the log-sum-exp normalizer
    const double direct = lt.row(i).array().exp().sum();
    REQUIRE_THAT(std::exp(log_sum_exp(lt.row(i).transpose())),
                 Catch::Matchers::WithinRel(direct, 1e-12));
  }
}

TEST_CASE("conditional responsibilities are normalized and honor w") {
  const auto params = two_component_2d();
  Mat data(4, 2);
  data << 1, 6, 0, 4, 0.5, -1, 2, 8;
  Mat w = Mat::Constant(4, 2, 1.0);
  const Mat z = responsibilities(data, params, w);
  for (int i = 0; i < 4; ++i)
    REQUIRE_THAT(z.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  Mat wbad = Mat::Constant(4, 2, -1.0);
  REQUIRE_THROWS_AS(responsibilities(data, params, wbad), DomainError);
}
