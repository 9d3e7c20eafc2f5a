#pragma once

// Finite-difference check of the per-sample training gradients.

#include <algorithm>
#include <cmath>
#include <vector>

#include "attnclust/attnclust.hpp"

namespace gradient_check {

using namespace attnclust;

inline Tokens gaussian_tokens(int L, int d, Engine& eng) {
  Tokens X(L, d);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < d; ++j) X(l, j) = standard_normal(eng);
  return X;
}

// Central differences of the per-sample loss along every head coordinate and,
// for the softmax bank, psi and lambda.
struct FdGradient {
  std::vector<Vec> heads;
  double dpsi = 0, dlambda = 0;
};

// Independent oracle: the loss rebuilt from the forward pass and the
// regularizer functions rather than from the training code.
inline double reference_loss(PredictorKind kind, const HeadBank& bank, const Tokens& X, double rho, RegularizerForm form) {
  const Vec x1 = X.row(0).transpose();
  if (kind == PredictorKind::LinearMultiHead) {
    const double fit = (x1 - linear_predictor_first_row(bank, X)).squaredNorm();
    return rho > 0 ? fit + rho * regularizer_linear(bank.heads, x1, form) : fit;
  }
  const double fit = (x1 - shaped_softmax_first_row(bank, X)).squaredNorm();
  return rho > 0 ? fit + rho * regularizer_softmax(bank.heads[0], bank.heads[1], x1) : fit;
}

inline FdGradient finite_differences(PredictorKind kind, const HeadBank& bank, const Tokens& X, double rho,
                              RegularizerForm form) {
  const double h = 1e-5;
  FdGradient g;
  for (std::size_t c = 0; c < bank.heads.size(); ++c) {
    Vec col(bank.heads[c].size());
    for (int j = 0; j < col.size(); ++j) {
      HeadBank up = bank, down = bank;
      up.heads[c](j) += h;
      down.heads[c](j) -= h;
      col(j) = (reference_loss(kind, up, X, rho, form) - reference_loss(kind, down, X, rho, form)) / (2 * h);
    }
    g.heads.push_back(col);
  }
  if (kind == PredictorKind::ShapedSoftmax) {
    HeadBank up = bank, down = bank;
    up.psi += h;
    down.psi -= h;
    g.dpsi = (reference_loss(kind, up, X, rho, form) - reference_loss(kind, down, X, rho, form)) / (2 * h);
    up = bank;
    down = bank;
    up.lambda += h;
    down.lambda -= h;
    g.dlambda = (reference_loss(kind, up, X, rho, form) - reference_loss(kind, down, X, rho, form)) / (2 * h);
  }
  return g;
}

// Largest relative error over all gradient entries, measured against the
// scale of the whole gradient so near-zero entries do not dominate.
inline double worst_error(const SampleGradient& a, const FdGradient& b, bool scalars) {
  double scale = 1e-8;
  for (const auto& v : b.heads) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  if (scalars) scale = std::max({scale, std::abs(b.dpsi), std::abs(b.dlambda)});
  double worst = 0;
  for (std::size_t c = 0; c < a.heads.size(); ++c)
    worst = std::max(worst, (a.heads[c] - b.heads[c]).cwiseAbs().maxCoeff() / scale);
  if (scalars) {
    worst = std::max(worst, std::abs(a.dpsi - b.dpsi) / scale);
    worst = std::max(worst, std::abs(a.dlambda - b.dlambda) / scale);
  }
  return worst;
}

}  // namespace gradient_check
