#include <gtest/gtest.h>

#include <map>

#include "test_support.hpp"

using namespace attnclust;

namespace {

// Two unit heads with the requested alignments to canonical-style centroids
// m0 = e0, m1 = e1, embedded with extra orthogonal directions chosen by
// `rotation` so that different embeddings share the same coordinates.
std::pair<Vec, Vec> embed(const ReparamCoords& c, int d, const Mat& rotation) {
  // mu0 = k0 m0 + e1 m1 + r0 u, mu1 = e0 m0 + k1 m1 + s u + t w, with u, w
  // orthonormal and orthogonal to the centroids
  const double r0 = std::sqrt(std::max(0.0, 1 - c.kappa0 * c.kappa0 - c.eta1 * c.eta1));
  const double s = r0 > 0 ? (c.xi - c.kappa0 * c.eta0 - c.eta1 * c.kappa1) / r0 : 0.0;
  const double t = std::sqrt(std::max(0.0, 1 - c.eta0 * c.eta0 - c.kappa1 * c.kappa1 - s * s));
  Vec mu0 = Vec::Zero(d), mu1 = Vec::Zero(d);
  mu0(0) = c.kappa0;
  mu0(1) = c.eta1;
  mu1(0) = c.eta0;
  mu1(1) = c.kappa1;
  const Vec u = rotation.col(0), w = rotation.col(1);
  mu0 += r0 * u;
  mu1 += s * u + t * w;
  return {mu0, mu1};
}

// Orthonormal pair inside span{e2..e_{d-1}} drawn from a seed.
Mat complement_frame(int d, std::uint64_t seed) {
  Engine eng = SeedStream(seed).engine();
  Mat Q(d, 2);
  std::vector<Vec> basis = {Vec::Unit(d, 0), Vec::Unit(d, 1)};
  for (int i = 0; i < 2; ++i) {
    Q.col(i) = random_unit_vector_orthogonal_to(d, basis, eng);
    basis.push_back(Q.col(i));
  }
  return Q;
}

std::vector<Vec> e01(int d) { return {Vec::Unit(d, 0), Vec::Unit(d, 1)}; }

}  // namespace

TEST(Reparam, Examples) {
  const auto m = e01(4);
  auto c = reparam(m[0], m[1], m[0], m[1]);
  EXPECT_EQ(c.kappa0, 1);
  EXPECT_EQ(c.kappa1, 1);
  EXPECT_EQ(c.eta0 + c.eta1 + c.xi, 0);
  c = reparam(m[1], m[0], m[0], m[1]);
  EXPECT_EQ(c.kappa0 + c.kappa1 + c.xi, 0);
  EXPECT_EQ(c.eta0, 1);
  EXPECT_EQ(c.eta1, 1);
  const Vec mid = (m[0] + m[1]) / std::sqrt(2.0);
  c = reparam(mid, mid, m[0], m[1]);
  for (double v : {c.kappa0, c.kappa1, c.eta0, c.eta1}) EXPECT_NEAR(v, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(c.xi, 1.0, 1e-15);
}

TEST(EmpiricalRisk, ZeroTemperatureGivesSquaredNorm) {
  const int d = 4;
  const double sigma = 0.5;
  Predictor p{PredictorKind::LinearMultiHead, HeadBank{e01(d), 0.0, 0}};
  const auto est = empirical_risk(p, MixtureSpec::gaussian(e01(d), sigma), 10, 100000, SeedStream(1));
  EXPECT_TRUE(est.agrees_with(1 + d * sigma * sigma)) << est.mean;
}

TEST(EmpiricalRisk, DiracOracleHeads) {
  const int L = 30;
  Predictor p{PredictorKind::LinearMultiHead, HeadBank{e01(5), lambda_star_degenerate(L), 0}};
  const auto est = empirical_risk(p, MixtureSpec::dirac(e01(5)), L, 100000, SeedStream(2));
  EXPECT_TRUE(est.agrees_with(oracle_degenerate_risk(L))) << est.mean << " se " << est.se;
  EXPECT_NEAR(oracle_degenerate_risk(L), 1 - 31.0 * 31.0 / (30.0 * 33.0), 1e-15);
}

TEST(DiracRisk, Examples) {
  const int L = 30;
  EXPECT_NEAR(exact_risk_dirac({1, 1, 0, 0, 0}, lambda_star_degenerate(L), L), 1 - 961.0 / 990.0, 1e-15);
  EXPECT_NEAR(1 - 961.0 / 990.0, 0.0292929, 1e-7);
  for (double lambda : {0.0, 0.4, 2.0}) EXPECT_EQ(exact_risk_dirac({}, lambda, 7), 1.0);
  const auto m = e01(3);
  EXPECT_NEAR(exact_risk_dirac({1, 0, 0, 0, 0}, 0.5, 3),
              dirac_risk_by_enumeration({m[0], Vec::Zero(3)}, m, 0.5, 3), 1e-12);
}

TEST(DiracRisk, GradientMatchesFiniteDifferences) {
  Engine eng(4);
  for (int trial = 0; trial < 20; ++trial) {
    double x[4];
    for (double& v : x) v = 2 * uniform01(eng) - 1;
    const double lambda = 0.2 + uniform01(eng);
    const int L = 2 + uniform_index(eng, 30);
    const auto g = exact_risk_dirac_gradient({x[0], x[1], x[2], x[3], 0}, lambda, L);
    for (int i = 0; i < 4; ++i) {
      const double fd = testing_support::central_difference([&](double h) {
        double y[4] = {x[0], x[1], x[2], x[3]};
        y[i] += h;
        return exact_risk_dirac({y[0], y[1], y[2], y[3], 0}, lambda, L);
      });
      EXPECT_LE(testing_support::relative_error(g[i], fd), 1e-7) << i;
    }
  }
}

TEST(DiracRisk, SignSymmetry) {
  for (double k0 : {-0.7, 0.2})
    for (double k1 : {-0.1, 0.9})
      for (double e0 : {0.3, -0.4})
        for (double e1 : {0.5, -0.6}) {
          const double r = exact_risk_dirac({k0, k1, e0, e1, 0}, 0.8, 9);
          EXPECT_NEAR(r, exact_risk_dirac({-k0, k1, e0, -e1, 0}, 0.8, 9), 1e-12);
          EXPECT_NEAR(r, exact_risk_dirac({k0, -k1, -e0, e1, 0}, 0.8, 9), 1e-12);
        }
}

TEST(ManifoldRisk, DegenerateReduction) {
  for (int L : {1, 2, 5, 30})
    for (double lambda : {0.1, 0.7, 1.5})
      for (double k0 = -1; k0 <= 1; k0 += 0.25)
        for (double k1 = -1; k1 <= 1; k1 += 0.25)
          EXPECT_NEAR(closed_form_risk_gaussian_manifold(k0, k1, 0.0, 5, L, lambda),
                      exact_risk_dirac({k0, k1, 0, 0, 0}, lambda, L), 1e-12);
}

TEST(ManifoldRisk, OriginIsConstantTerm) {
  const auto r = coefficients(0.3, 5, 30, 0.6);
  EXPECT_EQ(closed_form_risk_gaussian_manifold(0, 0, 0.3, 5, 30, 0.6), r.D);
  EXPECT_GT(r.A, 0);
  EXPECT_GE(r.D, 0);
}

TEST(ManifoldRisk, OutOfRangeThrows) {
  EXPECT_THROW(closed_form_risk_gaussian_manifold(1.1, 0, 0.3, 5, 30, 0.6), DomainError);
}

TEST(ManifoldRisk, AgreesWithMonteCarloAtCentroids) {
  const auto m = canonical_centroids(5, 2);
  Predictor p{PredictorKind::LinearMultiHead, HeadBank{m, 0.6, 0}};
  const auto est = empirical_risk(p, MixtureSpec::gaussian(m, 0.3), 30, 100000, SeedStream(3));
  EXPECT_TRUE(est.agrees_with(closed_form_risk_gaussian_manifold(1, 1, 0.3, 5, 30, 0.6))) << est.mean;
}

TEST(ManifoldRisk, GradientMatchesFiniteDifferences) {
  const auto r = coefficients(1.0, 6, 12, 0.3);
  for (double k0 : {-0.8, 0.1, 0.6})
    for (double k1 : {-0.3, 0.95}) {
      const auto g = manifold_risk_gradient(r, k0, k1);
      EXPECT_LE(testing_support::relative_error(
                    g[0], testing_support::central_difference([&](double h) { return manifold_risk(r, k0 + h, k1); })),
                1e-7);
      EXPECT_LE(testing_support::relative_error(
                    g[1], testing_support::central_difference([&](double h) { return manifold_risk(r, k0, k1 + h); })),
                1e-7);
    }
}

TEST(GeneralRisk, RestrictsToManifoldForm) {
  const int d = 6;
  const Mat Q = complement_frame(d, 4);
  for (double s : {0.0, 0.3, 1.0})
    for (int L : {2, 10, 30})
      for (double k0 : {-0.9, 0.0, 0.5, 1.0})
        for (double k1 : {-1.0, 0.3}) {
          const auto [mu0, mu1] = embed({k0, k1, 0, 0, 0}, d, Q);
          EXPECT_NEAR(closed_form_risk_gaussian_general(mu0, mu1, e01(d), s, d, L, 0.7),
                      closed_form_risk_gaussian_manifold(k0, k1, s, d, L, 0.7), 1e-10);
        }
}

TEST(GeneralRisk, DependsOnlyOnAlignmentCoordinates) {
  const int d = 7;
  Engine eng(5);
  for (int trial = 0; trial < 10; ++trial) {
    // draw coordinates from an actual pair so they are realizable
    const Vec a = random_unit_vector(d, eng), b = random_unit_vector(d, eng);
    const auto c = reparam(a, b, Vec::Unit(d, 0), Vec::Unit(d, 1));
    const auto [u0, u1] = embed(c, d, complement_frame(d, 10 + trial));
    const auto [w0, w1] = embed(c, d, complement_frame(d, 100 + trial));
    const auto cu = reparam(u0, u1, Vec::Unit(d, 0), Vec::Unit(d, 1));
    ASSERT_NEAR(cu.xi, c.xi, 1e-12);
    ASSERT_NEAR(u0.norm(), 1.0, 1e-12);
    ASSERT_NEAR(u1.norm(), 1.0, 1e-12);
    EXPECT_GT((u0 - w0).norm(), 1e-3);
    EXPECT_NEAR(closed_form_risk_gaussian_general(u0, u1, e01(d), 0.5, d, 10, 0.6),
                closed_form_risk_gaussian_general(w0, w1, e01(d), 0.5, d, 10, 0.6), 1e-10);
    EXPECT_NEAR(closed_form_risk_gaussian_general(a, b, e01(d), 0.5, d, 10, 0.6),
                closed_form_risk_gaussian_general(u0, u1, e01(d), 0.5, d, 10, 0.6), 1e-10);
  }
}

TEST(GeneralRisk, DegenerateCaseMatchesEnumeration) {
  const int d = 4;
  Engine eng(6);
  for (int L : {2, 3, 5}) {
    const Vec a = random_unit_vector(d, eng), b = random_unit_vector(d, eng);
    EXPECT_NEAR(closed_form_risk_gaussian_general(a, b, e01(d), 0.0, d, L, 0.45),
                dirac_risk_by_enumeration({a, b}, e01(d), 0.45, L), 1e-12);
  }
}

TEST(GeneralRisk, AgreesWithMonteCarloOffManifold) {
  const int d = 5, L = 10;
  Engine eng(7);
  const std::vector<Vec> heads = {random_unit_vector(d, eng), random_unit_vector(d, eng)};
  const auto m = canonical_centroids(d, 2);
  Predictor p{PredictorKind::LinearMultiHead, HeadBank{heads, 0.4, 0}};
  const auto est = empirical_risk(p, MixtureSpec::gaussian(m, 1.0), L, 200000, SeedStream(8));
  EXPECT_TRUE(est.agrees_with(closed_form_risk_gaussian_general(heads, m, 1.0, d, L, 0.4))) << est.mean;
}

TEST(GeneralRisk, ThreeHeadsThreeCentroidsAgreesWithMonteCarlo) {
  const int d = 6, L = 8;
  Engine eng(9);
  const std::vector<Vec> heads = {random_unit_vector(d, eng), random_unit_vector(d, eng), random_unit_vector(d, eng)};
  const auto m = canonical_centroids(d, 3);
  Predictor p{PredictorKind::LinearMultiHead, HeadBank{heads, 0.5, 0}};
  const auto est = empirical_risk(p, MixtureSpec::gaussian(m, 0.3), L, 200000, SeedStream(10));
  EXPECT_TRUE(est.agrees_with(closed_form_risk_gaussian_general(heads, m, 0.3, d, L, 0.5))) << est.mean;
}

TEST(GeneralRisk, NonOrthonormalCentroidsThrow) {
  const Vec a = Vec::Unit(3, 0), b = (Vec::Unit(3, 0) + Vec::Unit(3, 1)).normalized();
  EXPECT_THROW(closed_form_risk_gaussian_general(a, a, {a, b}, 0.3, 3, 5, 0.5), DomainError);
}

TEST(GeneralRisk, AmbientGradientMatchesFiniteDifferences) {
  const int d = 5;
  Engine eng(11);
  std::vector<Vec> heads = {random_unit_vector(d, eng), random_unit_vector(d, eng)};
  const auto m = canonical_centroids(d, 2);
  std::vector<Vec> grads;
  closed_form_risk_gaussian_general_gradient(heads, m, 0.3, d, 30, 0.6, grads);
  for (int h = 0; h < 2; ++h)
    for (int j = 0; j < d; ++j) {
      const double fd = testing_support::central_difference([&](double step) {
        auto moved = heads;
        moved[h](j) += step;
        return detail::general_risk_impl<double>(moved, m, 0.3, d, 30, 0.6);
      });
      EXPECT_LE(testing_support::relative_error(grads[h](j), fd), 1e-6) << h << "," << j;
    }
}

TEST(LambdaStar, DegenerateValue) {
  for (int L = 2; L <= 100; ++L)
    for (int d : {2, 5, 50}) EXPECT_DOUBLE_EQ(lambda_star(0.0, d, L), (L + 1.0) / (L + 3.0));
}

TEST(LambdaStar, LargeLengthLimit) {
  for (double s : {0.3, 1.0}) EXPECT_LE(std::abs(lambda_star(s, 5, 1000000) - lambda_star_infinite(s)), 1e-4);
  EXPECT_DOUBLE_EQ(lambda_star_infinite(1.0), 5.0 / 12.0);
}

TEST(LambdaStar, CornersAreGlobalMinimaOfManifoldRisk) {
  for (double s : {0.0, 0.3, 1.0})
    for (int L : {5, 30}) {
      const double lambda = lambda_star(s, 5, L);
      const auto r = coefficients(s, 5, L, lambda);
      const double corner = manifold_risk(r, 1, 1);
      for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 40; ++j) {
          const double k0 = -1 + i / 20.0, k1 = -1 + j / 20.0;
          const bool is_corner = std::abs(k0) == 1 && std::abs(k1) == 1;
          const double v = manifold_risk(r, k0, k1);
          if (is_corner)
            EXPECT_NEAR(v, corner, 1e-12);
          else
            EXPECT_GT(v, corner) << s << " " << L << " " << k0 << " " << k1;
        }
    }
}

TEST(LambdaStar, DegenerateRiskDecreasesAlongAlignment) {
  const int L = 30;
  for (double lambda : {0.2, 0.6, lambda_star_degenerate(L)})
    for (double k1 : {0.0, 1.0}) {
      double prev = exact_risk_dirac({0, k1, 0, 0, 0}, lambda, L);
      for (int i = 1; i <= 50; ++i) {
        const double k0 = std::sqrt(i / 50.0);
        const double v = exact_risk_dirac({k0, k1, 0, 0, 0}, lambda, L);
        EXPECT_LT(v, prev);
        prev = v;
      }
    }
}

TEST(Regularizer, LinearExamples) {
  const auto m = e01(3);
  EXPECT_EQ(regularizer_linear({m[0], m[1]}, m[1]), 0.0);
  EXPECT_EQ(regularizer_linear_dirac_expectation({m[0], m[1]}, m), 0.0);
  EXPECT_DOUBLE_EQ(regularizer_linear_dirac_expectation({m[0], m[0]}, m), 0.5);
  EXPECT_DOUBLE_EQ(regularizer_linear_dirac_expectation(reparam(m[0], m[0], m[1], m[0])), 0.5);
  EXPECT_THROW(regularizer_linear({m[0]}, m[0]), ConfigError);
}

TEST(Regularizer, DiracExpectationInCoordinates) {
  Engine eng(12);
  const auto m = e01(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec a = random_unit_vector(5, eng), b = random_unit_vector(5, eng);
    EXPECT_NEAR(regularizer_linear_dirac_expectation({a, b}, m),
                regularizer_linear_dirac_expectation(reparam(a, b, m[0], m[1])), 1e-14);
  }
}

TEST(Regularizer, ThreeHeadForms) {
  Vec x(3);
  x << 1, 2, 3;
  const std::vector<Vec> h = {Vec::Unit(3, 0), Vec::Unit(3, 1), Vec::Unit(3, 2)};
  EXPECT_DOUBLE_EQ(regularizer_linear(h, x, RegularizerForm::Pairwise), 1 * 4 + 1 * 9 + 4 * 9);
  EXPECT_DOUBLE_EQ(regularizer_linear(h, x, RegularizerForm::Product), 1 * 4 * 9);
}

TEST(Regularizer, SoftmaxExamples) {
  const auto m = e01(3);
  auto expectation = [&](const Vec& a, const Vec& b) {
    return 0.5 * (regularizer_softmax(a, b, m[0]) + regularizer_softmax(a, b, m[1]));
  };
  EXPECT_EQ(expectation(m[0], m[1]), 0.0);
  // equal heads: the deterministic term is <mu0,mu0> = 1
  const Vec x = Vec::Constant(3, 0.25);
  EXPECT_DOUBLE_EQ(regularizer_softmax(m[0], m[0], x) - std::pow(m[0].dot(x) - 1, 4), 1.0);
  EXPECT_DOUBLE_EQ(expectation(m[0], m[0]), 1.5);
}

TEST(Oracle, MeanFactorAndUnbiasing) {
  for (int L : {1, 10, 500})
    for (double s : {0.0, 0.3, 1.0}) EXPECT_NEAR(oracle_mean_factor(L, s, oracle_unbiasing_lambda(L, s)), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(oracle_unbiasing_lambda(9, 0.0), 0.9);
  EXPECT_NEAR(oracle_unbiasing_lambda(100000000, 0.3), 1 / (1 + 2 * 0.09), 1e-7);
}

TEST(Oracle, Asymptotics) {
  EXPECT_NEAR(oracle_asymptotics(0.3, 10, 0.5).risk_limit, 0.72, 1e-15);
  const double s = 0.3, lambda = 1 / (1 + 2 * s * s);
  EXPECT_NEAR(oracle_asymptotics(s, 10, lambda).variance_limit, 2 * s * s, 1e-15);
  EXPECT_LE(std::abs(oracle_variance(s, 10, 10000, lambda) / (2 * s * s) - 1), 0.01);
  EXPECT_NEAR(oracle_risk(s, 10, 1000000, oracle_optimal_lambda(s)), 0.72, 1e-3);
  EXPECT_NEAR(oracle_asymptotics(s, 10, oracle_optimal_lambda(s)).risk_limit_at_lambda, 0.72, 1e-12);
}

// The oracle risk is the general closed form evaluated at heads = centroids.
TEST(Oracle, RiskMatchesGeneralClosedForm) {
  for (double s : {0.0, 0.3, 1.0})
    for (int d : {3, 10})
      for (int L : {1, 2, 30, 500})
        for (double lambda : {0.3, 0.9}) {
          const auto m = canonical_centroids(d, 2);
          EXPECT_NEAR(oracle_risk(s, d, L, lambda), closed_form_risk_gaussian_general(m, m, s, d, L, lambda),
                      1e-10 * (1 + oracle_risk(s, d, L, lambda)));
        }
}

TEST(Oracle, DegenerateRiskIsOptimum) {
  for (int L : {2, 30}) EXPECT_NEAR(oracle_risk(0, 5, L, lambda_star_degenerate(L)), oracle_degenerate_risk(L), 1e-14);
}

TEST(InContextStatistics, FormulaChecks) {
  for (double s : {0.1, 0.3, 1.0})
    for (int d : {2, 10, 40}) {
      const auto st = ctx_statistics(s, d, 200, 0.5);
      EXPECT_NEAR(ctx_statistics(s, d, 200, st.unbiasing_lambda).mean_factor, 1.0, 1e-14);
      EXPECT_LE(st.asymptotic_risk_at_optimal, s * s * (d - 2) + 1e-15);
      EXPECT_NEAR(ctx_statistics(s, d, 200, st.optimal_lambda).asymptotic_risk, st.asymptotic_risk_at_optimal, 1e-12);
    }
  const auto zero = ctx_statistics(0.0, 10, 100, 1.0);
  EXPECT_EQ(zero.asymptotic_risk_at_optimal, 0.0);
  EXPECT_EQ(zero.optimal_lambda, 1.0);
}

// The in-context layer is a full orthonormal bank, and its risk does not
// depend on which orthonormal pair generated the sequence.
TEST(InContextStatistics, FiniteRiskMatchesFullBankClosedForm) {
  for (double s : {0.0, 0.3, 1.0})
    for (int d : {3, 6})
      for (int L : {1, 3, 40}) {
        std::vector<Vec> bank;
        for (int c = 0; c < d; ++c) bank.push_back(Vec::Unit(d, c));
        const auto m = make_orthonormal_centroids(d, 2, CentroidPlacement::Random, SeedStream(d + L));
        const double closed = closed_form_risk_gaussian_general(bank, m, s, d, L, 0.4);
        EXPECT_NEAR(ctx_statistics(s, d, L, 0.4).finite_risk, closed, 1e-10 * (1 + closed)) << s << " " << d << " " << L;
      }
}

TEST(CriticalPoints, GradientsVanish) {
  const int L = 30;
  const double lambda = lambda_star_degenerate(L);
  for (const auto& fam : critical_points_dirac(L)) {
    for (const auto& p : fam.points) {
      const auto g = exact_risk_dirac_gradient(p, lambda, L);
      EXPECT_LE(std::hypot(std::hypot(g[0], g[1]), std::hypot(g[2], g[3])), 1e-12) << fam.description;
    }
  }
  EXPECT_NEAR(std::pow(critical_points_dirac(L)[3].points[0].kappa0, 2) +
                  std::pow(critical_points_dirac(L)[3].points[0].kappa1, 2),
              33.0 / 62.0, 1e-15);
}

TEST(CriticalPoints, RiskOrdering) {
  const int L = 30;
  const double lambda = lambda_star_degenerate(L);
  std::map<CriticalKind, std::pair<double, double>> range;  // lowest, highest risk per kind
  for (const auto& fam : critical_points_dirac(L))
    for (const auto& p : fam.points) {
      const double r = exact_risk_dirac(p, lambda, L);
      auto [it, fresh] = range.try_emplace(fam.kind, r, r);
      it->second.first = std::min(it->second.first, r);
      it->second.second = std::max(it->second.second, r);
    }
  const auto top = range.at(CriticalKind::LocalMax);
  const auto strict = range.at(CriticalKind::StrictSaddle);
  const auto saddle = range.at(CriticalKind::Saddle);
  const auto bottom = range.at(CriticalKind::GlobalMin);
  EXPECT_GT(top.first, std::max(strict.second, saddle.second));
  EXPECT_GT(std::min(strict.first, saddle.first), bottom.second);
  EXPECT_NEAR(bottom.first, oracle_degenerate_risk(L), 1e-14);
  EXPECT_NEAR(bottom.second, oracle_degenerate_risk(L), 1e-14);
}
