#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnclust/errors.hpp"
#include "attnclust/mixtures.hpp"

namespace attnclust {

struct HeadBank {
  std::vector<Vec> heads;
  double lambda = 1.0;
  double psi = 0.0;  // shape offset, read by the shaped softmax predictor only

  int count() const { return static_cast<int>(heads.size()); }
  int dim() const { return heads.empty() ? 0 : static_cast<int>(heads.front().size()); }

  void validate(double tol = 1e-9) const {
    if (heads.empty()) throw ConfigError("head bank is empty");
    for (const auto& h : heads) {
      if (h.size() != heads.front().size()) throw DimensionError("heads have different dimensions");
      if (std::abs(h.norm() - 1.0) > tol) throw DomainError("heads must have unit norm");
    }
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw DomainError("temperature must be finite and nonnegative");
  }
};

enum class PredictorKind { LinearMultiHead, ShapedSoftmax, InContext };

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::LinearMultiHead: return "linear";
    case PredictorKind::ShapedSoftmax: return "softmax";
    case PredictorKind::InContext: return "incontext";
  }
  return "?";
}

namespace detail {
inline void require_tokens(const Tokens& X) {
  if (X.rows() == 0) throw EmptySequenceError("empty token sequence");
}
inline void require_dim(const Tokens& X, const Vec& mu) {
  if (mu.size() != X.cols()) throw DimensionError("head and token dimensions differ");
  if (std::abs(mu.norm() - 1.0) > 1e-9) throw DomainError("head must have unit norm");
}
}  // namespace detail

// Row l is (2/L) sum_k lambda <X_l,mu><X_k,mu> X_k, i.e. the rank-one matrix
// (2 lambda / L) v s^T with v = X mu and s = X^T v.
inline Tokens linear_head_forward(const Vec& mu, const Tokens& X, double lambda) {
  detail::require_tokens(X);
  detail::require_dim(X, mu);
  const double L = static_cast<double>(X.rows());
  const Vec v = X * mu;
  const Vec s = X.transpose() * v;
  return (2.0 * lambda / L) * v * s.transpose();
}

inline Tokens linear_predictor_forward(const HeadBank& bank, const Tokens& X) {
  if (bank.heads.empty()) throw ConfigError("head bank is empty");
  Tokens out = Tokens::Zero(X.rows(), X.cols());
  for (const auto& mu : bank.heads) out += linear_head_forward(mu, X, bank.lambda);
  return out;
}

// Row l is (2 lambda / L) sum_k X_l^T W X_k X_k for a d x d score matrix W.
inline Tokens bilinear_forward(const Mat& W, const Tokens& X, double lambda) {
  detail::require_tokens(X);
  if (W.rows() != X.cols() || W.cols() != X.cols()) throw DimensionError("score matrix has wrong shape");
  const double L = static_cast<double>(X.rows());
  const Mat scores = X * W * X.transpose();
  return (2.0 * lambda / L) * scores * X;
}

// Numerically stable softmax of lambda * a * v (a scalar, v a vector).
inline Vec scaled_softmax(double a, const Vec& v, double lambda) {
  Vec z = (lambda * a) * v;
  const double zmax = z.maxCoeff();
  z = (z.array() - zmax).exp().matrix();
  return z / z.sum();
}

// Row l is sum_k softmax_k(lambda <X_l,mu> v) X_k with v_k = <X_k,mu>.
inline Tokens softmax_head_forward(const Vec& mu, const Tokens& X, double lambda) {
  detail::require_tokens(X);
  detail::require_dim(X, mu);
  const Vec v = X * mu;
  Tokens out(X.rows(), X.cols());
  for (Eigen::Index l = 0; l < X.rows(); ++l) out.row(l) = scaled_softmax(v(l), v, lambda).transpose() * X;
  return out;
}

// Attention weights of a softmax head, one probability row per token.
inline Mat softmax_head_weights(const Vec& mu, const Tokens& X, double lambda) {
  detail::require_tokens(X);
  detail::require_dim(X, mu);
  const Vec v = X * mu;
  Mat P(X.rows(), X.rows());
  for (Eigen::Index l = 0; l < X.rows(); ++l) P.row(l) = scaled_softmax(v(l), v, lambda).transpose();
  return P;
}

inline Tokens shaped_softmax_predictor_forward(const HeadBank& bank, const Tokens& X) {
  if (bank.count() != 2) throw ConfigError("the shaped softmax predictor has exactly two heads");
  detail::require_tokens(X);
  const double L = static_cast<double>(X.rows());
  const Eigen::RowVectorXd mean_shift = (bank.psi / L) * X.colwise().sum();
  Tokens out = softmax_head_forward(bank.heads[0], X, bank.lambda) + softmax_head_forward(bank.heads[1], X, bank.lambda);
  out.rowwise() -= mean_shift;
  return out;
}

// Row l is (2 lambda / L) sum_k <X_l,X_k> X_k.
inline Tokens ctx_forward(const Tokens& X, double lambda) {
  detail::require_tokens(X);
  const double L = static_cast<double>(X.rows());
  const Mat gram = X.transpose() * X;  // d x d
  return (2.0 * lambda / L) * X * gram;
}

// First-row variants: the risk only looks at token 1, and these cost O(L d).

inline Vec linear_predictor_first_row(const HeadBank& bank, const Tokens& X) {
  detail::require_tokens(X);
  const double L = static_cast<double>(X.rows());
  Vec out = Vec::Zero(X.cols());
  for (const auto& mu : bank.heads) {
    const Vec v = X * mu;
    out += v(0) * (X.transpose() * v);
  }
  return (2.0 * bank.lambda / L) * out;
}

inline Vec softmax_head_first_row(const Vec& mu, const Tokens& X, double lambda) {
  const Vec v = X * mu;
  return X.transpose() * scaled_softmax(v(0), v, lambda);
}

inline Vec shaped_softmax_first_row(const HeadBank& bank, const Tokens& X) {
  if (bank.count() != 2) throw ConfigError("the shaped softmax predictor has exactly two heads");
  detail::require_tokens(X);
  const double L = static_cast<double>(X.rows());
  return softmax_head_first_row(bank.heads[0], X, bank.lambda) + softmax_head_first_row(bank.heads[1], X, bank.lambda) -
         (bank.psi / L) * X.colwise().sum().transpose();
}

inline Vec ctx_first_row(const Tokens& X, double lambda) {
  detail::require_tokens(X);
  const double L = static_cast<double>(X.rows());
  const Vec g = X * X.row(0).transpose();
  return (2.0 * lambda / L) * (X.transpose() * g);
}

struct Predictor {
  PredictorKind kind = PredictorKind::LinearMultiHead;
  HeadBank bank;  // lambda is used by every kind; heads are ignored for InContext

  Tokens forward(const Tokens& X) const {
    switch (kind) {
      case PredictorKind::LinearMultiHead: return linear_predictor_forward(bank, X);
      case PredictorKind::ShapedSoftmax: return shaped_softmax_predictor_forward(bank, X);
      case PredictorKind::InContext: return ctx_forward(X, bank.lambda);
    }
    throw ConfigError("unknown predictor kind");
  }

  Vec first_row(const Tokens& X) const {
    switch (kind) {
      case PredictorKind::LinearMultiHead: return linear_predictor_first_row(bank, X);
      case PredictorKind::ShapedSoftmax: return shaped_softmax_first_row(bank, X);
      case PredictorKind::InContext: return ctx_first_row(X, bank.lambda);
    }
    throw ConfigError("unknown predictor kind");
  }
};

}  // namespace attnclust
