#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include "attnclust/attention.hpp"
#include "attnclust/errors.hpp"
#include "attnclust/mixtures.hpp"
#include "attnclust/moments.hpp"

namespace attnclust {

// ---------------------------------------------------------------------------
// Alignment coordinates
// ---------------------------------------------------------------------------

// kappa0 = <m0,mu0>, kappa1 = <m1,mu1>, eta0 = <mu1,m0>, eta1 = <mu0,m1>,
// xi = <mu0,mu1>, where m0, m1 are the true centroids.
struct ReparamCoords {
  double kappa0 = 0, kappa1 = 0, eta0 = 0, eta1 = 0, xi = 0;
};

inline ReparamCoords reparam(const Vec& mu0, const Vec& mu1, const Vec& m0, const Vec& m1) {
  return {m0.dot(mu0), m1.dot(mu1), mu1.dot(m0), mu0.dot(m1), mu0.dot(mu1)};
}

// ---------------------------------------------------------------------------
// Degenerate (sigma = 0) mixture
// ---------------------------------------------------------------------------

inline double exact_risk_dirac(const ReparamCoords& c, double lambda, int L) {
  if (L < 1) throw ArgumentError("L must be positive");
  const double l = L;
  const double p0 = c.kappa0 * c.kappa0 + c.eta0 * c.eta0;
  const double p1 = c.kappa1 * c.kappa1 + c.eta1 * c.eta1;
  const double q = c.kappa0 * c.eta1 + c.kappa1 * c.eta0;
  return 1.0 - lambda * (l + 1) / l * (p0 + p1) + lambda * lambda * (l + 3) / (2 * l) * (p0 * p0 + p1 * p1) +
         lambda * lambda * (l - 1) / l * q * q;
}

// Partial derivatives in the order (kappa0, kappa1, eta0, eta1).
inline std::array<double, 4> exact_risk_dirac_gradient(const ReparamCoords& c, double lambda, int L) {
  const double l = L;
  const double a = lambda * (l + 1) / l;
  const double b = lambda * lambda * (l + 3) / (2 * l);
  const double e = lambda * lambda * (l - 1) / l;
  const double p0 = c.kappa0 * c.kappa0 + c.eta0 * c.eta0;
  const double p1 = c.kappa1 * c.kappa1 + c.eta1 * c.eta1;
  const double q = c.kappa0 * c.eta1 + c.kappa1 * c.eta0;
  return {-2 * a * c.kappa0 + 4 * b * p0 * c.kappa0 + 2 * e * q * c.eta1,
          -2 * a * c.kappa1 + 4 * b * p1 * c.kappa1 + 2 * e * q * c.eta0,
          -2 * a * c.eta0 + 4 * b * p0 * c.eta0 + 2 * e * q * c.kappa1,
          -2 * a * c.eta1 + 4 * b * p1 * c.eta1 + 2 * e * q * c.kappa0};
}

// Brute-force risk of the linear predictor when every token sits exactly on a
// centroid: averages |X_1 - T(X)_1|^2 over all K^L label patterns. Heads may
// have any norm.
inline double dirac_risk_by_enumeration(const std::vector<Vec>& heads, const std::vector<Vec>& centroids,
                                        double lambda, int L) {
  if (L < 1) throw ArgumentError("L must be positive");
  const int K = static_cast<int>(centroids.size());
  const int H = static_cast<int>(heads.size());
  // scores[z][h] = <m_z, mu_h>
  std::vector<std::vector<double>> score(K, std::vector<double>(H));
  for (int z = 0; z < K; ++z)
    for (int h = 0; h < H; ++h) score[z][h] = centroids[z].dot(heads[h]);
  std::vector<int> z(L, 0);
  double total = 0.0;
  long long patterns = 0;
  const int d = static_cast<int>(centroids.front().size());
  for (;;) {
    Vec t = Vec::Zero(d);
    for (int h = 0; h < H; ++h) {
      const double a = score[z[0]][h];
      for (int k = 0; k < L; ++k) t += (a * score[z[k]][h]) * centroids[z[k]];
    }
    t *= 2.0 * lambda / L;
    total += (centroids[z[0]] - t).squaredNorm();
    ++patterns;
    int pos = 0;
    while (pos < L && ++z[pos] == K) z[pos++] = 0;
    if (pos == L) break;
  }
  return total / static_cast<double>(patterns);
}

// ---------------------------------------------------------------------------
// Gaussian mixture, parameters restricted to the invariant manifold
// (<mu0,m1> = <mu1,m0> = <mu0,mu1> = 0)
// ---------------------------------------------------------------------------

struct RiskCoefficients {
  double A = 0, B = 0, C = 0, D = 0;
  double sigma = 0;
  int d = 0;
  double c1(double n) const { return 1 + n * sigma * sigma; }
  double c2(double n) const { return 1 + sigma * sigma * (d + n); }
};

inline RiskCoefficients coefficients(double sigma, int d, int L, double lambda) {
  RiskCoefficients r;
  r.sigma = sigma;
  r.d = d;
  const double l = L, l2 = l * l, lam2 = lambda * lambda;
  const double s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2;
  auto c1 = [&](double n) { return r.c1(n); };
  auto c2 = [&](double n) { return r.c2(n); };
  r.A = 2 * lam2 / l2 * c2(8) + 2 * lam2 * (l - 1) / l2 * c1(5) + lam2 * (l - 1) / l2 * c2(4) +
        lam2 * (l - 1) * (l - 2) / (2 * l2) * c1(4);
  r.B = -2 * lambda / l * c2(4) + 16 * lam2 * s2 / l2 * c2(6) + 8 * lam2 * s2 * (l - 1) / l2 * c1(6) -
        lambda * (l - 1) / l * c1(4) + 4 * lam2 * s2 * (l - 1) / l2 * c2(3) +
        lam2 * s2 * (l - 1) * (l - 2) / l2 * c1(6);
  r.C = 4 * lam2 * s2 * (l - 1) / l2;
  r.D = c1(d) - 8 * lambda * s2 / l * c2(2) + 32 * lam2 * s4 / l2 * c2(4) + 64 * lam2 * s6 * (l - 1) / l2 -
        8 * lambda * s4 * (l - 1) / l + 8 * lam2 * s4 * (l - 1) / l2 * c2(2) +
        8 * lam2 * s6 * (l - 1) * (l - 2) / l2;
  return r;
}

inline double manifold_risk(const RiskCoefficients& r, double kappa0, double kappa1) {
  const double a = kappa0 * kappa0, b = kappa1 * kappa1;
  return r.A * (a * a + b * b) + r.B * (a + b) + r.C * a * b + r.D;
}

inline std::array<double, 2> manifold_risk_gradient(const RiskCoefficients& r, double kappa0, double kappa1) {
  const double a = kappa0 * kappa0, b = kappa1 * kappa1;
  return {4 * r.A * a * kappa0 + 2 * r.B * kappa0 + 2 * r.C * kappa0 * b,
          4 * r.A * b * kappa1 + 2 * r.B * kappa1 + 2 * r.C * kappa1 * a};
}

inline double closed_form_risk_gaussian_manifold(double kappa0, double kappa1, double sigma, int d, int L,
                                                 double lambda) {
  if (std::abs(kappa0) > 1 + 1e-12 || std::abs(kappa1) > 1 + 1e-12)
    throw DomainError("alignment coordinates must lie in [-1, 1]");
  return manifold_risk(coefficients(sigma, d, L, lambda), kappa0, kappa1);
}

// ---------------------------------------------------------------------------
// Gaussian mixture, general parameters (assembled from the moment helpers)
// ---------------------------------------------------------------------------

namespace detail {

// Risk of the K-head linear predictor on a balanced mixture with the given
// unit centroids. The six sums are the expectations of the cross term with
// X_1 alone, the square of the X_1 term, the X_1/X_k cross terms, the X_k
// cross term with X_1, the squares of the X_k terms and the X_k/X_j cross
// terms.
template <class T>
T general_risk_impl(const std::vector<VecT<T>>& heads, const std::vector<VecT<T>>& cents, double sigma, int d,
                    int L, double lambda) {
  const int K = static_cast<int>(cents.size());
  const double w = 1.0 / K, l = L, lam2 = lambda * lambda;
  T i0(0.0), ii0(0.0), iii0(0.0), i1(0.0), ii(0.0), iii(0.0);
  for (int z = 0; z < K; ++z)
    for (const auto& a : heads) {
      i0 += square_norm_moment_impl<T>(a, cents[z], sigma, d);
      for (const auto& b : heads) ii0 += p0_impl<T>(a, b, cents[z], sigma, d);
    }
  for (int z1 = 0; z1 < K; ++z1)
    for (int z2 = 0; z2 < K; ++z2)
      for (const auto& a : heads) {
        i1 += p3_1_impl<T>(a, a, cents[z1], cents[z2], sigma);
        for (const auto& b : heads) {
          iii0 += p1_impl<T>(a, b, cents[z1], cents[z2], sigma);
          ii += p2_impl<T>(a, b, cents[z1], cents[z2], sigma, d);
        }
      }
  if (L > 2)
    for (int z1 = 0; z1 < K; ++z1)
      for (int z2 = 0; z2 < K; ++z2)
        for (int z3 = 0; z3 < K; ++z3)
          for (const auto& a : heads)
            for (const auto& b : heads) iii += p3_impl<T>(a, b, cents[z1], cents[z2], cents[z3], sigma);
  const T term_i0 = (4 * lambda / l * w) * i0;
  const T term_ii0 = (4 * lam2 / (l * l) * w) * ii0;
  const T term_iii0 = (8 * lam2 * (l - 1) / (l * l) * w * w) * iii0;
  const T term_i = (4 * lambda * (l - 1) / l * w * w) * i1;
  const T term_ii = (4 * lam2 * (l - 1) / (l * l) * w * w) * ii;
  const T term_iii = (4 * lam2 * (l - 1) * (l - 2) / (l * l) * w * w * w) * iii;
  return T(1 + d * sigma * sigma) - term_i0 + term_ii0 + term_iii0 - term_i + term_ii + term_iii;
}

inline void require_orthonormal(const std::vector<Vec>& cents, double tol = 1e-10) {
  if (cents.empty()) throw ArgumentError("need at least one centroid");
  for (std::size_t i = 0; i < cents.size(); ++i)
    for (std::size_t j = 0; j < cents.size(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      if (std::abs(cents[i].dot(cents[j]) - target) > tol) throw DomainError("centroids must be orthonormal");
    }
}

}  // namespace detail

inline double closed_form_risk_gaussian_general(const std::vector<Vec>& heads, const std::vector<Vec>& centroids,
                                                double sigma, int d, int L, double lambda) {
  detail::require_orthonormal(centroids);
  for (const auto& h : heads)
    if (h.size() != centroids.front().size()) throw DimensionError("head and centroid dimensions differ");
  return detail::general_risk_impl<double>(heads, centroids, sigma, d, L, lambda);
}

inline double closed_form_risk_gaussian_general(const Vec& mu0, const Vec& mu1, const std::vector<Vec>& centroids,
                                                double sigma, int d, int L, double lambda) {
  return closed_form_risk_gaussian_general(std::vector<Vec>{mu0, mu1}, centroids, sigma, d, L, lambda);
}

// Exact ambient gradient of the general closed form with respect to every
// head (forward-mode automatic differentiation through the assembly).
inline double closed_form_risk_gaussian_general_gradient(const std::vector<Vec>& heads,
                                                         const std::vector<Vec>& centroids, double sigma, int d,
                                                         int L, double lambda, std::vector<Vec>& grads) {
  detail::require_orthonormal(centroids);
  using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
  const int H = static_cast<int>(heads.size());
  const int dim = static_cast<int>(centroids.front().size());
  const int n = H * dim;
  std::vector<VecT<AD>> ah(H), ac(centroids.size());
  for (int h = 0; h < H; ++h) {
    ah[h].resize(dim);
    for (int j = 0; j < dim; ++j) ah[h](j) = AD(heads[h](j), n, h * dim + j);
  }
  for (std::size_t z = 0; z < centroids.size(); ++z) {
    ac[z].resize(dim);
    for (int j = 0; j < dim; ++j) ac[z](j) = AD(centroids[z](j), Eigen::VectorXd::Zero(n));
  }
  const AD r = detail::general_risk_impl<AD>(ah, ac, sigma, d, L, lambda);
  grads.assign(H, Vec::Zero(dim));
  for (int h = 0; h < H; ++h)
    for (int j = 0; j < dim; ++j) grads[h](j) = r.derivatives()(h * dim + j);
  return r.value();
}

// ---------------------------------------------------------------------------
// Optimal temperatures
// ---------------------------------------------------------------------------

// Temperature making (+-1, +-1) the global minimizers of the manifold risk.
inline double lambda_star(double sigma, int d, int L) {
  if (L < 1 || sigma < 0) throw DomainError("need L >= 1 and sigma >= 0");
  const double l = L, s2 = sigma * sigma;
  auto c1 = [&](double n) { return 1 + n * s2; };
  auto c2 = [&](double n) { return 1 + s2 * (d + n); };
  const double c3 = 16 * s2 * c2(6) + 8 * s2 * (l - 1) * c1(6) + 4 * s2 * (l - 1) * c2(3) +
                    s2 * (l - 1) * (l - 2) * c1(6) + 4 * c2(8) + 4 * (l - 1) * c1(5) + 2 * (l - 1) * c2(4) +
                    (l - 1) * (l - 2) * c1(4) + 4 * s2 * (l - 1);
  return (2 * l * c2(4) + l * (l - 1) * c1(4)) / c3;
}

inline double lambda_star_degenerate(int L) { return (L + 1.0) / (L + 3.0); }

inline double lambda_star_infinite(double sigma) {
  const double s2 = sigma * sigma;
  return (1 + 4 * s2) / (1 + 5 * s2 + 6 * s2 * s2);
}

// ---------------------------------------------------------------------------
// Regularizers
// ---------------------------------------------------------------------------

enum class RegularizerForm { Pairwise, Product };

inline const char* to_string(RegularizerForm f) { return f == RegularizerForm::Pairwise ? "pairwise" : "product"; }

// Pairwise: sum_{i<j} <mu_i,x>^2 <mu_j,x>^2. Product: prod_i <mu_i,x>^2.
// Both reduce to <mu_0,x>^2 <mu_1,x>^2 for two heads.
inline double regularizer_linear(const std::vector<Vec>& heads, const Vec& x1,
                                 RegularizerForm form = RegularizerForm::Pairwise) {
  if (heads.size() < 2) throw ConfigError("the regularizer needs at least two heads");
  std::vector<double> s(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const double a = heads[i].dot(x1);
    s[i] = a * a;
  }
  if (form == RegularizerForm::Product) {
    double p = 1.0;
    for (double v : s) p *= v;
    return p;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) total += s[i] * s[j];
  return total;
}

// Expectation over a Dirac mixture: the average over centroids.
inline double regularizer_linear_dirac_expectation(const std::vector<Vec>& heads, const std::vector<Vec>& centroids,
                                                   RegularizerForm form = RegularizerForm::Pairwise) {
  double total = 0.0;
  for (const auto& m : centroids) total += regularizer_linear(heads, m, form);
  return total / static_cast<double>(centroids.size());
}

// Same expectation for two heads written in alignment coordinates.
inline double regularizer_linear_dirac_expectation(const ReparamCoords& c) {
  return 0.5 * (c.kappa0 * c.kappa0 * c.eta0 * c.eta0 + c.kappa1 * c.kappa1 * c.eta1 * c.eta1);
}

// Per-sample regularizer of the shaped softmax objective, including the
// deterministic <mu0,mu1> term.
inline double regularizer_softmax(const Vec& mu0, const Vec& mu1, const Vec& x1) {
  const double a = mu0.dot(x1) - 1.0, b = mu1.dot(x1) - 1.0;
  return a * a * b * b + mu0.dot(mu1);
}

// ---------------------------------------------------------------------------
// Monte-Carlo risk
// ---------------------------------------------------------------------------

// Estimates E|X_1 - T(X)_1|^2 from n_samples fresh sequences.
inline Estimate empirical_risk(const Predictor& predictor, const MixtureSpec& spec, int L, std::size_t n_samples,
                               const SeedStream& stream) {
  if (n_samples < 1) throw ArgumentError("need at least one sample");
  spec.validate();
  if (predictor.kind != PredictorKind::InContext) predictor.bank.validate();
  return mc_estimate_scalar(n_samples, stream, [&] {
    return [&, seq = TokenSequence{}](Engine& eng, double* out) mutable {
      sample_sequence_into(spec, L, eng, seq);
      const Vec t = predictor.first_row(seq.tokens);
      out[0] = (seq.tokens.row(0).transpose() - t).squaredNorm();
    };
  });
}

// ---------------------------------------------------------------------------
// Oracle predictor (heads on the true centroids)
// ---------------------------------------------------------------------------

// E[T(X)_1 | Z_1 = c] = factor * m_c
inline double oracle_mean_factor(int L, double sigma, double lambda) {
  const double l = L, s2 = sigma * sigma;
  return lambda / l * ((l + 1) + 2 * (l + 3) * s2);
}

inline double oracle_unbiasing_lambda(int L, double sigma) {
  const double l = L, s2 = sigma * sigma;
  return l / ((l + 1) + 2 * (l + 3) * s2);
}

// E[|T(X)_1|^2 | Z_1 = c]
inline double oracle_second_moment(double sigma, int d, int L, double lambda) {
  const double l = L, s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2, lam2 = lambda * lambda;
  return 4 * lam2 / (l * l) * (1 + s2 * (d + 16) + 8 * s4 * (d + 7) + 8 * s6 * (d + 4)) +
         2 * lam2 * (l - 1) / (l * l) * (3 + s2 * (d + 28) + 4 * s4 * (d + 16) + 4 * s6 * (d + 10)) +
         lam2 * (l - 1) * (l - 2) / (l * l) * (1 + 6 * s2 + 12 * s4 + 8 * s6);
}

// Trace of Cov[T(X)_1 | Z_1 = c]
inline double oracle_variance(double sigma, int d, int L, double lambda) {
  const double f = oracle_mean_factor(L, sigma, lambda);
  return oracle_second_moment(sigma, d, L, lambda) - f * f;
}

inline double oracle_risk(double sigma, int d, int L, double lambda) {
  const double l = L, s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2, lam2 = lambda * lambda;
  auto c2 = [&](double n) { return 1 + s2 * (d + n); };
  const double i0 = 4 * lambda / l * (c2(4) + 2 * s2 * c2(2));
  const double ii0 = 4 * lam2 / (l * l) * (1 + s2 * (d + 16) + 8 * s4 * (d + 7) + 8 * s6 * (d + 4));
  const double iii0 = 4 * lam2 * (l - 1) / (l * l) * (1 + 10 * s2 + 24 * s4 + 16 * s6);
  const double i1 = 2 * lambda * (l - 1) / l * (1 + 4 * s2 + 4 * s4);
  const double ii = 2 * lam2 * (l - 1) / (l * l) * (1 + s2 * (d + 8) + 4 * s4 * (d + 4) + 4 * s6 * (d + 2));
  const double iii = lam2 * (l - 1) * (l - 2) / (l * l) * (1 + 6 * s2 + 12 * s4 + 8 * s6);
  return (1 + d * s2) - i0 + ii0 + iii0 - i1 + ii + iii;
}

inline double oracle_optimal_lambda(double sigma) {
  const double s2 = sigma * sigma;
  return (1 + 4 * s2 + 4 * s2 * s2) / (1 + 6 * s2 + 12 * s2 * s2 + 8 * s2 * s2 * s2);
}

inline double oracle_degenerate_risk(int L) {
  const double l = L;
  return 1 - (l + 1) * (l + 1) / (l * (l + 3));
}

struct OracleAsymptotics {
  double risk_limit = 0;          // at the optimal temperature
  double risk_limit_at_lambda = 0;
  double variance_limit = 0;      // at the given temperature
};

inline OracleAsymptotics oracle_asymptotics(double sigma, int d, double lambda) {
  const double s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2;
  OracleAsymptotics out;
  out.risk_limit = s2 * (d - 2);
  out.risk_limit_at_lambda =
      (1 + d * s2) - lambda * (2 + 8 * s2 + 8 * s4) + lambda * lambda * (1 + 6 * s2 + 12 * s4 + 8 * s6);
  const double g = 1 + 2 * s2;
  out.variance_limit = 2 * lambda * lambda * s2 * g * g;
  return out;
}

// ---------------------------------------------------------------------------
// Parameter-free in-context layer
// ---------------------------------------------------------------------------

struct CtxStatistics {
  double mean_factor = 0;
  double unbiasing_lambda = 0;
  double asymptotic_risk = 0;             // at the given temperature
  double optimal_lambda = 0;
  double asymptotic_risk_at_optimal = 0;
  double asymptotic_variance = 0;         // at the given temperature
  double finite_risk = 0;
  double finite_second_moment = 0;
  double finite_variance = 0;
};

inline CtxStatistics ctx_statistics(double sigma, int d, int L, double lambda) {
  const double l = L, s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2, dd = d, lam2 = lambda * lambda;
  CtxStatistics s;
  const double bracket = (1 + (dd + 2) * s2) + (l - 1) * (0.5 + s2);
  s.mean_factor = 2 * lambda / l * bracket;
  s.unbiasing_lambda = (l / 2) / bracket;

  const double h = s2 + 0.5;
  const double triple = 2 * h * h * h + (dd - 2) * s6;  // E[<X1,X2><X1,X3><X2,X3>]
  const double lin = 1 + 4 * s2 + 2 * dd * s4;
  s.asymptotic_risk = (1 + s2 * dd) - 2 * lambda * lin + 4 * lam2 * triple;
  s.optimal_lambda = lin / (4 * triple);
  s.asymptotic_risk_at_optimal = s2 * (dd - 2) * (1 + 2 * s2) / (1 + 6 * s2 + 12 * s4 + 4 * dd * s6);
  s.asymptotic_variance = 2 * lam2 * s2 * lin;

  const double norm4 = 1 + 2 * (dd + 2) * s2 + dd * (dd + 2) * s4;
  const double norm6 = 1 + 3 * (dd + 4) * s2 + 3 * (dd + 2) * (dd + 4) * s4 + dd * (dd + 2) * (dd + 4) * s6;
  const double pair2 = 0.5 + 2 * s2 + dd * s4;  // E[<X1,X2>^2]
  const double pair_norm = 0.5 + (dd + 8) / 2 * s2 + 3 * (dd + 2) * s4 + dd * (dd + 2) * s6;
  s.finite_second_moment =
      4 * lam2 / (l * l) * norm6 + 12 * lam2 / (l * l) * (l - 1) * pair_norm + 4 * lam2 / (l * l) * (l - 1) * (l - 2) * triple;
  s.finite_risk = (1 + s2 * dd) - 4 * lambda / l * norm4 - 4 * lambda / l * (l - 1) * pair2 + s.finite_second_moment;
  s.finite_variance = s.finite_second_moment - s.mean_factor * s.mean_factor;
  return s;
}

// ---------------------------------------------------------------------------
// Critical points of the degenerate risk at the optimal temperature
// ---------------------------------------------------------------------------

enum class CriticalKind { LocalMax, StrictSaddle, Saddle, GlobalMin };

inline const char* to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::LocalMax: return "local-max";
    case CriticalKind::StrictSaddle: return "strict-saddle";
    case CriticalKind::Saddle: return "saddle";
    case CriticalKind::GlobalMin: return "global-min";
  }
  return "?";
}

struct CriticalFamily {
  std::string description;
  CriticalKind kind;
  std::vector<ReparamCoords> points;  // representatives, xi = 0
};

inline std::vector<CriticalFamily> critical_points_dirac(int L, int samples_per_family = 8) {
  if (L < 1) throw ArgumentError("L must be positive");
  const double pi = std::acos(-1.0);
  const double r = std::sqrt((L + 3.0) / (2.0 * (L + 1.0)));
  std::vector<CriticalFamily> out;
  out.push_back({"origin", CriticalKind::LocalMax, {ReparamCoords{}}});

  CriticalFamily s0{"kappa0^2 + eta0^2 = 1, kappa1 = eta1 = 0", CriticalKind::StrictSaddle, {}};
  CriticalFamily s1{"kappa1^2 + eta1^2 = 1, kappa0 = eta0 = 0", CriticalKind::StrictSaddle, {}};
  CriticalFamily c0{"(k0, k1, k1, k0) with k0^2 + k1^2 = (L+3)/(2(L+1))", CriticalKind::Saddle, {}};
  CriticalFamily c1{"(k0, k1, -k1, -k0) with k0^2 + k1^2 = (L+3)/(2(L+1))", CriticalKind::Saddle, {}};
  CriticalFamily gm{"kappa0^2 + eta0^2 = 1, kappa1^2 + eta1^2 = 1, kappa0 eta1 + kappa1 eta0 = 0",
                    CriticalKind::GlobalMin, {}};
  for (int i = 0; i < samples_per_family; ++i) {
    const double t = 2 * pi * i / samples_per_family;
    const double c = std::cos(t), s = std::sin(t);
    s0.points.push_back({c, 0, s, 0, 0});
    s1.points.push_back({0, c, 0, s, 0});
    c0.points.push_back({r * c, r * s, r * s, r * c, 0});
    c1.points.push_back({r * c, r * s, -r * s, -r * c, 0});
    // orthonormal heads in the centroid plane, rotated and reflected
    gm.points.push_back({c, c, s, -s, 0});
    gm.points.push_back({c, -c, s, s, 0});
  }
  out.push_back(std::move(s0));
  out.push_back(std::move(s1));
  out.push_back(std::move(c0));
  out.push_back(std::move(c1));
  out.push_back(std::move(gm));
  return out;
}

}  // namespace attnclust
