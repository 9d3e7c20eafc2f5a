#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnclust/attention.hpp"
#include "attnclust/errors.hpp"
#include "attnclust/metrics.hpp"
#include "attnclust/mixtures.hpp"
#include "attnclust/risk.hpp"
#include "attnclust/rng.hpp"

namespace attnclust {

enum class Projection { Riemannian, Euclidean };
enum class InitKind { OnManifold, UniformSphere, Explicit };

inline const char* to_string(Projection p) { return p == Projection::Riemannian ? "riemannian" : "euclidean"; }

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::OnManifold: return "manifold";
    case InitKind::UniformSphere: return "sphere";
    case InitKind::Explicit: return "explicit";
  }
  return "?";
}

inline constexpr double kDefaultStep = 0.01;
inline constexpr double kStepCap = 0.1;

struct OptimizerConfig {
  double gamma = kDefaultStep;
  long iterations = 10000;
  int batch_size = 256;
  double rho = 0.0;
  Projection projection = Projection::Riemannian;
  InitKind init = InitKind::OnManifold;
  std::vector<Vec> initial_heads;  // read when init is Explicit
  bool train_psi = true;
  bool train_lambda = true;
  double psi0 = 2.0;
  double lambda0 = 3.0;
  long record_every = 0;  // 0: every iteration up to 1000, then every 10th
  RegularizerForm regularizer = RegularizerForm::Pairwise;

  void validate() const {
    // gamma = 0 is allowed: it freezes the parameters, which is a useful check
    if (!(gamma >= 0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and nonnegative");
    if (iterations < 0) throw ConfigError("iterations must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(rho >= 0) || !std::isfinite(rho)) throw ConfigError("rho must be finite and nonnegative");
    if (record_every < 0) throw ConfigError("record_every must be nonnegative");
    if (init == InitKind::Explicit && initial_heads.empty()) throw ConfigError("explicit init needs initial heads");
  }
};

inline bool should_record(long k, long record_every, long last) {
  if (k == last) return true;
  if (record_every > 0) return k % record_every == 0;
  return k <= 1000 || k % 10 == 0;
}

struct TraceRecord {
  long iteration = 0;
  std::vector<Vec> heads;
  std::vector<double> kappa;  // <m_i, mu_i> per head
  double psi = 0;
  double lambda = 0;
  double distance = std::numeric_limits<double>::quiet_NaN();
  double signed_distance = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  bool diverged = false;
  long diverged_at = -1;

  const TraceRecord& final() const {
    if (records.empty()) throw ArgumentError("empty trace");
    return records.back();
  }
};

// ---------------------------------------------------------------------------
// Sphere steps
// ---------------------------------------------------------------------------

inline Vec riemannian_step(const Vec& mu, const Vec& grad, double gamma) {
  if (mu.size() != grad.size()) throw DimensionError("point and gradient dimensions differ");
  if (gamma == 0) return mu;
  const Vec tangent = grad - mu.dot(grad) * mu;
  // rounding leftovers of a radial gradient are not a direction
  if (tangent.squaredNorm() <= 1e-30 * std::max(1.0, grad.squaredNorm())) return mu;
  const Vec v = mu - gamma * tangent;
  const double n = v.norm();
  if (!(n > 0) || !std::isfinite(n)) throw StepError("cannot renormalize the updated head");
  return v / n;
}

inline Vec euclidean_step(const Vec& mu, const Vec& grad, double gamma) {
  if (mu.size() != grad.size()) throw DimensionError("point and gradient dimensions differ");
  if (gamma == 0 || grad.isZero(0.0)) return mu;
  const Vec v = mu - gamma * grad;
  const double n = v.norm();
  if (!(n > 0) || !std::isfinite(n)) throw StepError("cannot renormalize the updated head");
  return v / n;
}

inline Vec sphere_step(Projection p, const Vec& mu, const Vec& grad, double gamma) {
  return p == Projection::Riemannian ? riemannian_step(mu, grad, gamma) : euclidean_step(mu, grad, gamma);
}

// ---------------------------------------------------------------------------
// Per-sample losses and gradients
// ---------------------------------------------------------------------------

namespace detail {

inline Mat stack_heads(const std::vector<Vec>& heads) {
  Mat M(heads.front().size(), heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h) M.col(h) = heads[h];
  return M;
}

// Scratch buffers for the training loop; shapes settle after the first sample.
struct LinearWorkspace {
  Mat V, S;
  Vec x1, a, a2, r, Xr, Gr;
  Eigen::RowVectorXd rS;
};

// Loss |x1 - (2 lambda/L) sum_c <x1,mu_c> G mu_c|^2 + rho * reg with G = X^T X.
// Heads are the columns of M; the gradient lands in grad (d x H).
inline double linear_loss_grad(const Mat& M, double lambda, const Tokens& X, double rho, RegularizerForm form,
                               Mat* grad, LinearWorkspace& w) {
  const double L = static_cast<double>(X.rows());
  const int H = static_cast<int>(M.cols());
  w.x1 = X.row(0).transpose();
  const Vec& x1 = w.x1;
  w.V.noalias() = X * M;               // L x H, V(k,c) = <X_k, mu_c>
  w.S.noalias() = X.transpose() * w.V;  // d x H, column c is G mu_c
  w.a = w.V.row(0).transpose();        // <x1, mu_c>
  const Vec& a = w.a;
  const double scale = 2.0 * lambda / L;
  w.r = x1;
  w.r.noalias() -= scale * (w.S * a);
  const Vec& r = w.r;
  double loss = r.squaredNorm();

  w.a2 = a.array().square().matrix();
  const Vec& a2 = w.a2;
  double reg = 0.0;
  if (rho > 0) {
    if (H < 2) throw ConfigError("the regularizer needs at least two heads");
    if (form == RegularizerForm::Product) {
      reg = a2.prod();
    } else {
      const double s = a2.sum();
      reg = 0.5 * (s * s - a2.squaredNorm());
    }
    loss += rho * reg;
  }
  if (grad) {
    w.Xr.noalias() = X * r;
    w.Gr.noalias() = X.transpose() * w.Xr;
    w.rS.noalias() = r.transpose() * w.S;
    grad->resize(M.rows(), H);
    grad->noalias() = (-2.0 * scale) * (x1 * w.rS);
    grad->noalias() -= (2.0 * scale) * (w.Gr * a.transpose());
    if (rho > 0) {
      for (int c = 0; c < H; ++c) {
        double others = 0.0;
        if (form == RegularizerForm::Product) {
          others = 1.0;
          for (int j = 0; j < H; ++j)
            if (j != c) others *= a2(j);
        } else {
          others = a2.sum() - a2(c);
        }
        grad->col(c) += 2.0 * rho * a(c) * others * x1;
      }
    }
  }
  return loss;
}

inline double linear_loss_grad(const Mat& M, double lambda, const Tokens& X, double rho, RegularizerForm form,
                               Mat* grad) {
  LinearWorkspace w;
  return linear_loss_grad(M, lambda, X, rho, form, grad, w);
}

// Shaped softmax loss |x1 - H_0 - H_1 + (psi/L) sum_k X_k|^2 + rho * r0 where
// r0 = (<mu0,x1>-1)^2 (<mu1,x1>-1)^2 + <mu0,mu1>.
inline double softmax_loss_grad(const Mat& M, double psi, double lambda, const Tokens& X, double rho, Mat* grad,
                                double* dpsi, double* dlambda) {
  if (M.cols() != 2) throw ConfigError("the shaped softmax predictor has exactly two heads");
  const double L = static_cast<double>(X.rows());
  const Vec x1 = X.row(0).transpose();
  const Vec mean = X.colwise().sum().transpose() / L;
  const Mat V = X * M;
  Vec p[2];
  Vec Hc[2];
  for (int c = 0; c < 2; ++c) {
    p[c] = scaled_softmax(V(0, c), V.col(c), lambda);
    Hc[c] = X.transpose() * p[c];
  }
  const Vec r = x1 - Hc[0] - Hc[1] + psi * mean;
  const double a0 = V(0, 0) - 1.0, a1 = V(0, 1) - 1.0;
  double loss = r.squaredNorm();
  if (rho > 0) loss += rho * (a0 * a0 * a1 * a1 + M.col(0).dot(M.col(1)));
  if (grad) {
    grad->resize(M.rows(), 2);
    double dl = 0.0;
    const Vec Xr = X * r;
    for (int c = 0; c < 2; ++c) {
      // d loss / d s_k = -2 p_k <r, X_k - H_c>, with s_k = lambda <x1,mu> <X_k,mu>
      const Vec g = -2.0 * p[c].cwiseProduct(Xr - Vec::Constant(X.rows(), r.dot(Hc[c])));
      const double a = V(0, c);
      const double gv = g.dot(V.col(c));
      grad->col(c) = lambda * (gv * x1 + a * (X.transpose() * g));
      dl += a * gv;
    }
    if (rho > 0) {
      grad->col(0) += rho * (2.0 * a0 * a1 * a1 * x1 + M.col(1));
      grad->col(1) += rho * (2.0 * a1 * a0 * a0 * x1 + M.col(0));
    }
    if (dpsi) *dpsi = 2.0 * r.dot(mean);
    if (dlambda) *dlambda = dl;
  }
  return loss;
}

}  // namespace detail

struct SampleGradient {
  double loss = 0;
  std::vector<Vec> heads;
  double dpsi = 0;     // shaped softmax only
  double dlambda = 0;  // shaped softmax only
};

// Per-sample loss of a linear or shaped softmax bank on one sequence. Heads
// need not be unit norm here, so finite differences can move them freely.
inline double per_sample_loss(PredictorKind kind, const HeadBank& bank, const Tokens& X, double rho,
                              RegularizerForm form = RegularizerForm::Pairwise) {
  detail::require_tokens(X);
  const Mat M = detail::stack_heads(bank.heads);
  if (M.rows() != X.cols()) throw DimensionError("head and token dimensions differ");
  switch (kind) {
    case PredictorKind::LinearMultiHead: return detail::linear_loss_grad(M, bank.lambda, X, rho, form, nullptr);
    case PredictorKind::ShapedSoftmax:
      return detail::softmax_loss_grad(M, bank.psi, bank.lambda, X, rho, nullptr, nullptr, nullptr);
    case PredictorKind::InContext: break;
  }
  throw ConfigError("the in-context predictor has no trainable heads");
}

inline SampleGradient per_sample_gradient(PredictorKind kind, const HeadBank& bank, const Tokens& X, double rho,
                                          RegularizerForm form = RegularizerForm::Pairwise) {
  detail::require_tokens(X);
  if (bank.heads.empty()) throw ConfigError("head bank is empty");
  const Mat M = detail::stack_heads(bank.heads);
  if (M.rows() != X.cols()) throw DimensionError("head and token dimensions differ");
  SampleGradient out;
  Mat G;
  switch (kind) {
    case PredictorKind::LinearMultiHead:
      out.loss = detail::linear_loss_grad(M, bank.lambda, X, rho, form, &G);
      break;
    case PredictorKind::ShapedSoftmax:
      out.loss = detail::softmax_loss_grad(M, bank.psi, bank.lambda, X, rho, &G, &out.dpsi, &out.dlambda);
      break;
    case PredictorKind::InContext: throw ConfigError("the in-context predictor has no trainable heads");
  }
  for (int c = 0; c < G.cols(); ++c) out.heads.push_back(G.col(c));
  return out;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// OnManifold: head i is uniform on the unit sphere orthogonal to every other
// centroid and to the heads drawn before it. For two heads this gives
// mu0 _|_ m1, then mu1 _|_ {m0, mu0}.
inline std::vector<Vec> initial_heads(const std::vector<Vec>& centroids, const OptimizerConfig& cfg, Engine& eng) {
  const int K = static_cast<int>(centroids.size());
  const int d = static_cast<int>(centroids.front().size());
  std::vector<Vec> heads;
  switch (cfg.init) {
    case InitKind::Explicit:
      for (const auto& h : cfg.initial_heads) {
        if (h.size() != d) throw DimensionError("initial head has the wrong dimension");
        const double n = h.norm();
        if (!(n > 0)) throw DomainError("initial head is zero");
        heads.push_back(h / n);
      }
      if (static_cast<int>(heads.size()) != K) throw ConfigError("need one initial head per centroid");
      return heads;
    case InitKind::UniformSphere:
      for (int i = 0; i < K; ++i) heads.push_back(random_unit_vector(d, eng));
      return heads;
    case InitKind::OnManifold:
      for (int i = 0; i < K; ++i) {
        std::vector<Vec> basis;
        for (int j = 0; j < K; ++j)
          if (j != i) basis.push_back(centroids[j]);
        for (const auto& h : heads) {
          Vec v = h;
          orthogonalize_against(v, basis);
          const double n = v.norm();
          if (n > 1e-12) basis.push_back(v / n);
        }
        heads.push_back(random_unit_vector_orthogonal_to(d, basis, eng));
      }
      return heads;
  }
  throw ConfigError("unknown init");
}

namespace detail {

inline TraceRecord make_record(long k, const std::vector<Vec>& heads, const std::vector<Vec>& truth, double psi,
                               double lambda, double objective) {
  TraceRecord rec;
  rec.iteration = k;
  rec.heads = heads;
  rec.psi = psi;
  rec.lambda = lambda;
  rec.objective = objective;
  if (!truth.empty() && truth.size() == heads.size()) {
    for (std::size_t i = 0; i < heads.size(); ++i) rec.kappa.push_back(truth[i].dot(heads[i]));
    rec.distance = dist_up_to_sign_perm(heads, truth).distance;
    rec.signed_distance = dist_signed(heads, truth);
  }
  return rec;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Deterministic descent on closed-form risks
// ---------------------------------------------------------------------------

struct ClosedFormObjective {
  std::vector<Vec> centroids;  // two orthonormal centroids
  double sigma = 0;            // 0 is the Dirac mixture
  int d = 0;
  int L = 1;
  double lambda = 1;
};

// One step of the reduced map on the invariant manifold:
// kappa_i <- (kappa_i - g dR_i (1-kappa_i^2)) / sqrt(1 + g^2 dR_i^2 (1-kappa_i^2)).
inline std::array<double, 2> reduced_step(const RiskCoefficients& coef, double k0, double k1, double gamma) {
  const auto g = manifold_risk_gradient(coef, k0, k1);
  std::array<double, 2> out{};
  const double k[2] = {k0, k1};
  for (int i = 0; i < 2; ++i) {
    const double t = 1.0 - k[i] * k[i];
    out[i] = (k[i] - gamma * g[i] * t) / std::sqrt(1.0 + gamma * gamma * g[i] * g[i] * t);
  }
  return out;
}

namespace detail {

// Fixed unit directions u0 _|_ u1, both orthogonal to the centroids, used to
// lift (kappa0, kappa1) back to heads mu_i = kappa_i m_i + sqrt(1-kappa_i^2) u_i.
inline std::optional<std::array<Vec, 2>> manifold_complements(const std::vector<Vec>& cents,
                                                              const std::vector<Vec>& heads) {
  const int d = static_cast<int>(cents.front().size());
  std::array<Vec, 2> u;
  std::vector<Vec> basis = cents;
  for (int i = 0; i < 2; ++i) {
    Vec v = Vec::Zero(d);
    bool found = false;
    if (!heads.empty()) {
      v = heads[i];
      orthogonalize_against(v, basis);
      found = v.norm() > 1e-12;
    }
    for (int j = 0; j < d && !found; ++j) {
      v = basis_vector(d, j);
      orthogonalize_against(v, basis);
      found = v.norm() > 1e-6;
    }
    if (!found) return std::nullopt;
    v.normalize();
    u[i] = v;
    basis.push_back(v);
  }
  return u;
}

}  // namespace detail

// Runs the reduced two-dimensional dynamics from (kappa0, kappa1). Heads are
// lifted back to the ambient space whenever the dimension leaves room (d >= 4).
inline TrainTrace pgd_run_kappa(const ClosedFormObjective& obj, double kappa0, double kappa1,
                                const OptimizerConfig& cfg, const std::vector<Vec>& lift_from = {}) {
  cfg.validate();
  if (obj.centroids.size() != 2) throw ConfigError("the reduced dynamics has two heads");
  if (std::abs(kappa0) > 1 || std::abs(kappa1) > 1) throw DomainError("alignments must lie in [-1, 1]");
  const RiskCoefficients coef = coefficients(obj.sigma, obj.d, obj.L, obj.lambda);
  const auto u = detail::manifold_complements(obj.centroids, lift_from);
  TrainTrace trace;
  double k0 = kappa0, k1 = kappa1;
  for (long k = 0; k <= cfg.iterations; ++k) {
    if (should_record(k, cfg.record_every, cfg.iterations)) {
      TraceRecord rec;
      rec.iteration = k;
      rec.lambda = obj.lambda;
      rec.kappa = {k0, k1};
      rec.objective = manifold_risk(coef, k0, k1);
      if (u) {
        rec.heads = {k0 * obj.centroids[0] + std::sqrt(std::max(0.0, 1 - k0 * k0)) * (*u)[0],
                     k1 * obj.centroids[1] + std::sqrt(std::max(0.0, 1 - k1 * k1)) * (*u)[1]};
        rec.distance = dist_up_to_sign_perm(rec.heads, obj.centroids).distance;
        rec.signed_distance = dist_signed(rec.heads, obj.centroids);
      }
      trace.records.push_back(std::move(rec));
    }
    if (k == cfg.iterations) break;
    const auto next = reduced_step(coef, k0, k1, cfg.gamma);
    k0 = next[0];
    k1 = next[1];
  }
  return trace;
}

// Reduced dynamics with the initial heads taken from the config (OnManifold
// or Explicit; explicit heads must lie on the manifold).
inline TrainTrace pgd_run(const ClosedFormObjective& obj, const OptimizerConfig& cfg, const SeedStream& stream) {
  cfg.validate();
  if (obj.centroids.size() != 2) throw ConfigError("the reduced dynamics has two heads");
  if (cfg.init == InitKind::UniformSphere) throw ConfigError("the reduced dynamics needs a start on the manifold");
  Engine eng = stream.split(0).engine();
  const auto heads = initial_heads(obj.centroids, cfg, eng);
  const auto c = reparam(heads[0], heads[1], obj.centroids[0], obj.centroids[1]);
  if (std::abs(c.eta0) > 1e-9 || std::abs(c.eta1) > 1e-9 || std::abs(c.xi) > 1e-9)
    throw DomainError("initial heads are not on the invariant manifold");
  return pgd_run_kappa(obj, c.kappa0, c.kappa1, cfg, heads);
}

// Full-dimensional descent on the general closed form, with the exact ambient
// gradient. Works from any start and honors the projection flag.
inline TrainTrace pgd_run_ambient(const ClosedFormObjective& obj, const OptimizerConfig& cfg,
                                  const SeedStream& stream) {
  cfg.validate();
  Engine eng = stream.split(0).engine();
  std::vector<Vec> heads = initial_heads(obj.centroids, cfg, eng);
  TrainTrace trace;
  std::vector<Vec> grads;
  for (long k = 0; k <= cfg.iterations; ++k) {
    const double risk = closed_form_risk_gaussian_general_gradient(heads, obj.centroids, obj.sigma, obj.d, obj.L,
                                                                   obj.lambda, grads);
    if (should_record(k, cfg.record_every, cfg.iterations))
      trace.records.push_back(detail::make_record(k, heads, obj.centroids, 0.0, obj.lambda, risk));
    if (k == cfg.iterations) break;
    for (std::size_t h = 0; h < heads.size(); ++h) heads[h] = sphere_step(cfg.projection, heads[h], grads[h], cfg.gamma);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Mini-batch projected SGD
// ---------------------------------------------------------------------------

namespace detail {

inline void flag_divergence(TrainTrace& trace, long k, const std::vector<Vec>& heads, const std::vector<Vec>& truth,
                            double psi, double lambda) {
  trace.diverged = true;
  trace.diverged_at = k;
  TraceRecord rec = make_record(k, heads, truth, psi, lambda, std::numeric_limits<double>::quiet_NaN());
  trace.records.push_back(std::move(rec));
}

}  // namespace detail

// Linear multi-head PSGD: M fresh sequences per iteration, one head per
// centroid, loss = squared first-token error + rho * regularizer.
inline TrainTrace psgd_run(const MixtureSpec& spec, int L, double lambda, const OptimizerConfig& cfg,
                           const SeedStream& stream) {
  cfg.validate();
  spec.validate();
  if (spec.kind == MixtureKind::InContext) throw ConfigError("train heads on a fixed-centroid mixture");
  if (L < 1) throw EmptySequenceError("sequence length must be positive");
  Engine init_eng = stream.split(0).engine();
  Engine data = stream.split(1).engine();
  std::vector<Vec> heads = initial_heads(spec.centroids, cfg, init_eng);
  const int H = static_cast<int>(heads.size());
  const int d = spec.d;
  TrainTrace trace;
  TokenSequence seq;
  detail::LinearWorkspace work;
  Mat M(d, H), G(d, H), acc(d, H);
  for (long k = 0; k <= cfg.iterations; ++k) {
    for (int h = 0; h < H; ++h) M.col(h) = heads[h];
    acc.setZero();
    double loss = 0.0;
    for (int i = 0; i < cfg.batch_size; ++i) {
      fill_tokens(spec.centroids, spec.sigma, L, data, seq);
      loss += detail::linear_loss_grad(M, lambda, seq.tokens, cfg.rho, cfg.regularizer, &G, work);
      acc += G;
    }
    acc /= static_cast<double>(cfg.batch_size);
    loss /= static_cast<double>(cfg.batch_size);
    if (!std::isfinite(loss) || !acc.allFinite()) {
      detail::flag_divergence(trace, k, heads, spec.centroids, 0.0, lambda);
      return trace;
    }
    if (should_record(k, cfg.record_every, cfg.iterations))
      trace.records.push_back(detail::make_record(k, heads, spec.centroids, 0.0, lambda, loss));
    if (k == cfg.iterations) break;
    for (int h = 0; h < H; ++h) heads[h] = sphere_step(cfg.projection, heads[h], acc.col(h), cfg.gamma);
  }
  return trace;
}

// Shaped softmax PSGD: heads take sphere steps, psi and lambda plain steps.
inline TrainTrace psgd_soft_run(const MixtureSpec& spec, int L, const OptimizerConfig& cfg, const SeedStream& stream) {
  cfg.validate();
  spec.validate();
  if (spec.kind == MixtureKind::InContext) throw ConfigError("train heads on a fixed-centroid mixture");
  if (spec.count() != 2) throw ConfigError("the shaped softmax predictor has exactly two heads");
  if (L < 1) throw EmptySequenceError("sequence length must be positive");
  Engine init_eng = stream.split(0).engine();
  Engine data = stream.split(1).engine();
  std::vector<Vec> heads = initial_heads(spec.centroids, cfg, init_eng);
  double psi = cfg.psi0, lambda = cfg.lambda0;
  const int d = spec.d;
  TrainTrace trace;
  TokenSequence seq;
  Mat M(d, 2), G(d, 2), acc(d, 2);
  for (long k = 0; k <= cfg.iterations; ++k) {
    M.col(0) = heads[0];
    M.col(1) = heads[1];
    acc.setZero();
    double loss = 0.0, gpsi = 0.0, glam = 0.0;
    for (int i = 0; i < cfg.batch_size; ++i) {
      fill_tokens(spec.centroids, spec.sigma, L, data, seq);
      double dp = 0, dl = 0;
      loss += detail::softmax_loss_grad(M, psi, lambda, seq.tokens, cfg.rho, &G, &dp, &dl);
      acc += G;
      gpsi += dp;
      glam += dl;
    }
    const double inv = 1.0 / cfg.batch_size;
    acc *= inv;
    loss *= inv;
    gpsi *= inv;
    glam *= inv;
    if (!std::isfinite(loss) || !acc.allFinite() || !std::isfinite(gpsi) || !std::isfinite(glam)) {
      detail::flag_divergence(trace, k, heads, spec.centroids, psi, lambda);
      return trace;
    }
    if (should_record(k, cfg.record_every, cfg.iterations))
      trace.records.push_back(detail::make_record(k, heads, spec.centroids, psi, lambda, loss));
    if (k == cfg.iterations) break;
    for (int h = 0; h < 2; ++h) heads[h] = sphere_step(cfg.projection, heads[h], acc.col(h), cfg.gamma);
    if (cfg.train_psi) psi -= cfg.gamma * gpsi;
    if (cfg.train_lambda) lambda -= cfg.gamma * glam;
  }
  return trace;
}

}  // namespace attnclust
