#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnclust/errors.hpp"
#include "attnclust/rng.hpp"

namespace attnclust {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Rows are tokens.
using Tokens = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class MixtureKind { Dirac, Gaussian, InContext };

inline const char* to_string(MixtureKind k) {
  switch (k) {
    case MixtureKind::Dirac: return "dirac";
    case MixtureKind::Gaussian: return "gaussian";
    case MixtureKind::InContext: return "incontext";
  }
  return "?";
}

enum class CentroidPlacement { Canonical, Random };

inline constexpr double kUnitTol = 1e-12;

inline Vec basis_vector(int d, int i, double sign = 1.0) {
  Vec e = Vec::Zero(d);
  e(i) = sign;
  return e;
}

// Canonical banks follow the experiment layouts: two centroids sit at e_d and
// -e_1; K >= 3 centroids sit on basis vectors spread evenly across the
// coordinates (for d=6, K=3 this is e_1, e_4, e_6).
inline std::vector<Vec> canonical_centroids(int d, int K) {
  std::vector<Vec> out;
  if (K == 1) {
    out.push_back(basis_vector(d, d - 1));
  } else if (K == 2) {
    out.push_back(basis_vector(d, d - 1));
    out.push_back(basis_vector(d, 0, -1.0));
  } else {
    for (int i = 0; i < K; ++i) {
      int idx = static_cast<int>(std::ceil(static_cast<double>((d - 1) * i) / (K - 1)));
      out.push_back(basis_vector(d, idx));
    }
  }
  return out;
}

inline Vec random_unit_vector(int d, Engine& eng) {
  Vec v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v(i) = standard_normal(eng);
    double n = v.norm();
    if (n > 1e-300) return v / n;
  }
}

// Removes the components of v along the orthonormal vectors in basis. Two
// passes keep the residual inner products at rounding level.
inline void orthogonalize_against(Vec& v, const std::vector<Vec>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) v -= v.dot(b) * b;
}

// Uniform draw from the unit sphere intersected with the orthogonal
// complement of span(basis). basis must be orthonormal with fewer than d
// vectors.
inline Vec random_unit_vector_orthogonal_to(int d, const std::vector<Vec>& basis, Engine& eng) {
  if (static_cast<int>(basis.size()) >= d) throw DimensionError("no room for an orthogonal direction");
  Vec v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v(i) = standard_normal(eng);
    orthogonalize_against(v, basis);
    double n = v.norm();
    if (n > 1e-8) {
      v /= n;
      orthogonalize_against(v, basis);
      return v / v.norm();
    }
  }
}

inline std::vector<Vec> make_orthonormal_centroids(int d, int K, CentroidPlacement placement,
                                                   const SeedStream& stream = SeedStream{}) {
  if (d < 1 || K < 1) throw DimensionError("dimension and count must be positive");
  if (K > d) throw DimensionError("cannot place " + std::to_string(K) + " orthonormal centroids in dimension " +
                                  std::to_string(d));
  if (placement == CentroidPlacement::Canonical) return canonical_centroids(d, K);
  Engine eng = stream.engine();
  std::vector<Vec> out;
  for (int k = 0; k < K; ++k) out.push_back(random_unit_vector_orthogonal_to(d, out, eng));
  return out;
}

struct MixtureSpec {
  std::vector<Vec> centroids;
  double sigma = 0.0;
  MixtureKind kind = MixtureKind::Gaussian;
  int d = 0;  // only meaningful on its own for InContext, otherwise centroid dimension

  int dim() const { return d; }
  int count() const { return kind == MixtureKind::InContext ? 2 : static_cast<int>(centroids.size()); }

  void validate() const {
    if (sigma < 0 || !std::isfinite(sigma)) throw DomainError("sigma must be a finite nonnegative number");
    if (kind == MixtureKind::Dirac && sigma != 0.0) throw DomainError("a Dirac mixture has sigma = 0");
    if (kind == MixtureKind::InContext) {
      if (!centroids.empty()) throw ArgumentError("in-context mixtures draw their centroids per sequence");
      if (d < 2) throw DimensionError("in-context mixtures need d >= 2");
      return;
    }
    if (centroids.empty()) throw ArgumentError("mixture needs at least one centroid");
    for (const auto& c : centroids) {
      if (c.size() != d) throw DimensionError("centroid dimension mismatch");
      if (std::abs(c.norm() - 1.0) > kUnitTol) throw DomainError("centroids must have unit norm");
    }
  }

  static MixtureSpec dirac(std::vector<Vec> centroids) {
    MixtureSpec s;
    s.d = centroids.empty() ? 0 : static_cast<int>(centroids.front().size());
    s.centroids = std::move(centroids);
    s.kind = MixtureKind::Dirac;
    s.validate();
    return s;
  }

  static MixtureSpec gaussian(std::vector<Vec> centroids, double sigma) {
    MixtureSpec s;
    s.d = centroids.empty() ? 0 : static_cast<int>(centroids.front().size());
    s.centroids = std::move(centroids);
    s.sigma = sigma;
    s.kind = MixtureKind::Gaussian;
    s.validate();
    return s;
  }

  static MixtureSpec in_context(int d, double sigma) {
    MixtureSpec s;
    s.d = d;
    s.sigma = sigma;
    s.kind = MixtureKind::InContext;
    s.validate();
    return s;
  }
};

struct TokenSequence {
  Tokens tokens;
  std::vector<int> labels;
  std::vector<Vec> centroids_used;

  int length() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
};

// Fills seq in place; buffers are reused when the shape is unchanged, which is
// what the training loops rely on.
inline void fill_tokens(const std::vector<Vec>& centroids, double sigma, int L, Engine& eng, TokenSequence& seq) {
  const int d = static_cast<int>(centroids.front().size());
  const int K = static_cast<int>(centroids.size());
  seq.tokens.resize(L, d);
  seq.labels.resize(L);
  for (int l = 0; l < L; ++l) {
    int z = uniform_index(eng, K);
    seq.labels[l] = z;
    seq.tokens.row(l) = centroids[z].transpose();
    if (sigma > 0)
      for (int j = 0; j < d; ++j) seq.tokens(l, j) += sigma * standard_normal(eng);
  }
}

inline void sample_sequence_into(const MixtureSpec& spec, int L, Engine& eng, TokenSequence& seq) {
  if (L <= 0) throw EmptySequenceError("sequence length must be positive");
  if (spec.kind == MixtureKind::InContext) {
    const int d = spec.d;
    std::vector<Vec> pair;
    pair.push_back(random_unit_vector(d, eng));
    pair.push_back(random_unit_vector_orthogonal_to(d, pair, eng));
    fill_tokens(pair, spec.sigma, L, eng, seq);
    seq.centroids_used = std::move(pair);
    return;
  }
  fill_tokens(spec.centroids, spec.sigma, L, eng, seq);
  seq.centroids_used = spec.centroids;
}

inline TokenSequence sample_sequence(const MixtureSpec& spec, int L, const SeedStream& stream) {
  if (spec.kind == MixtureKind::InContext)
    throw ArgumentError("use sample_incontext_sequence for in-context mixtures");
  Engine eng = stream.engine();
  TokenSequence seq;
  sample_sequence_into(spec, L, eng, seq);
  return seq;
}

inline TokenSequence sample_incontext_sequence(int d, double sigma, int L, const SeedStream& stream) {
  if (d < 2) throw DimensionError("in-context sampling needs d >= 2");
  if (sigma < 0) throw DomainError("sigma must be nonnegative");
  Engine eng = stream.engine();
  TokenSequence seq;
  sample_sequence_into(MixtureSpec::in_context(d, sigma), L, eng, seq);
  return seq;
}

// Probability that a centered Gaussian of scale sigma exceeds half the
// distance between two orthonormal centroids.
inline double interference(double sigma) {
  if (sigma < 0 || std::isnan(sigma)) throw DomainError("sigma must be nonnegative");
  if (sigma == 0) return 0.0;
  return 0.5 * std::erfc(std::sqrt(2.0) / 2.0 / (sigma * std::sqrt(2.0)));
}

}  // namespace attnclust
