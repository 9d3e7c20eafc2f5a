#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "attnclust/errors.hpp"
#include "attnclust/mixtures.hpp"

namespace attnclust {

inline constexpr int kMaxExhaustiveHeads = 8;

struct SignPermMatch {
  double distance = 0.0;
  std::vector<int> permutation;  // truth index i is matched with estimate permutation[i]
  std::vector<int> signs;        // estimate permutation[i] is compared with signs[i] * truth[i]
};

namespace detail {
inline void check_banks(const std::vector<Vec>& est, const std::vector<Vec>& truth) {
  if (est.size() != truth.size()) throw ArgumentError("estimated and true banks differ in size");
  if (est.empty()) throw ArgumentError("empty bank");
  if (static_cast<int>(est.size()) > kMaxExhaustiveHeads)
    throw ArgumentError("exhaustive matching is limited to 8 vectors");
}
}  // namespace detail

// min over permutations pi and signs s of sqrt(sum_i |est[pi(i)] - s_i truth[i]|^2)
inline SignPermMatch dist_up_to_sign_perm(const std::vector<Vec>& est, const std::vector<Vec>& truth) {
  detail::check_banks(est, truth);
  const int K = static_cast<int>(est.size());
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  SignPermMatch best;
  double best_sq = std::numeric_limits<double>::infinity();
  do {
    for (unsigned mask = 0; mask < (1u << K); ++mask) {
      double sq = 0.0;
      for (int i = 0; i < K; ++i) {
        const double s = (mask >> i) & 1u ? -1.0 : 1.0;
        sq += (est[perm[i]] - s * truth[i]).squaredNorm();
      }
      if (sq < best_sq) {
        best_sq = sq;
        best.permutation = perm;
        best.signs.assign(K, 1);
        for (int i = 0; i < K; ++i)
          if ((mask >> i) & 1u) best.signs[i] = -1;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.distance = std::sqrt(best_sq);
  return best;
}

// Same minimum without sign flips.
inline double dist_signed(const std::vector<Vec>& est, const std::vector<Vec>& truth) {
  detail::check_banks(est, truth);
  const int K = static_cast<int>(est.size());
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  double best_sq = std::numeric_limits<double>::infinity();
  do {
    double sq = 0.0;
    for (int i = 0; i < K; ++i) sq += (est[perm[i]] - truth[i]).squaredNorm();
    best_sq = std::min(best_sq, sq);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best_sq);
}

inline double minimal_rmse(const std::vector<Vec>& est, const std::vector<Vec>& truth, int d) {
  if (d < 1) throw DimensionError("dimension must be positive");
  return dist_up_to_sign_perm(est, truth).distance / std::sqrt(static_cast<double>(d));
}

struct RecoveryReport {
  double distance_up_to_sign_perm = 0;
  double signed_distance = 0;
  double minimal_rmse = 0;
  std::vector<int> best_permutation;
  std::vector<int> best_signs;
};

inline RecoveryReport recovery_report(const std::vector<Vec>& est, const std::vector<Vec>& truth) {
  const auto m = dist_up_to_sign_perm(est, truth);
  RecoveryReport r;
  r.distance_up_to_sign_perm = m.distance;
  r.signed_distance = dist_signed(est, truth);
  r.minimal_rmse = m.distance / std::sqrt(static_cast<double>(truth.front().size()));
  r.best_permutation = m.permutation;
  r.best_signs = m.signs;
  return r;
}

}  // namespace attnclust
