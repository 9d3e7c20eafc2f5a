#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace attnclust;

namespace {
std::vector<Vec> truth(int d) { return canonical_centroids(d, 2); }
}  // namespace

TEST(SignPermDistance, Examples) {
  const auto t = truth(5);
  EXPECT_EQ(dist_up_to_sign_perm(t, t).distance, 0.0);
  const auto m = dist_up_to_sign_perm({-t[1], t[0]}, t);
  EXPECT_EQ(m.distance, 0.0);
  EXPECT_EQ(m.permutation, (std::vector<int>{1, 0}));
  EXPECT_EQ(m.signs, (std::vector<int>{1, -1}));
  const Vec mid = (t[0] + t[1]) / std::sqrt(2.0);
  EXPECT_NEAR(dist_up_to_sign_perm({t[0], mid}, t).distance, std::sqrt(2 - std::sqrt(2.0)), 1e-15);
}

TEST(SignPermDistance, SizeMismatchAndLimit) {
  const auto t = truth(5);
  EXPECT_THROW(dist_up_to_sign_perm({t[0]}, t), ArgumentError);
  std::vector<Vec> nine(9, Vec::Unit(9, 0));
  EXPECT_THROW(dist_up_to_sign_perm(nine, nine), ArgumentError);
}

TEST(SignPermDistance, InvariantUnderShuffleAndFlips) {
  Engine eng(1);
  const auto t = canonical_centroids(6, 3);
  std::vector<Vec> est = {random_unit_vector(6, eng), random_unit_vector(6, eng), random_unit_vector(6, eng)};
  const double base = dist_up_to_sign_perm(est, t).distance;
  EXPECT_EQ(dist_up_to_sign_perm({est[2], est[0], est[1]}, t).distance, base);
  EXPECT_EQ(dist_up_to_sign_perm({-est[0], est[1], -est[2]}, t).distance, base);
  double identity = 0;
  for (int i = 0; i < 3; ++i) identity += (est[i] - t[i]).squaredNorm();
  EXPECT_LE(base, std::sqrt(identity));
  EXPECT_LE(base, dist_signed(est, t));
}

TEST(SignedDistance, Examples) {
  const auto t = truth(5);
  EXPECT_EQ(dist_signed(t, t), 0.0);
  EXPECT_NEAR(dist_signed({-t[0], t[1]}, t), 2.0, 1e-15);
  EXPECT_EQ(dist_signed({t[1], t[0]}, t), 0.0);
}

TEST(MinimalRmse, Examples) {
  const auto t = truth(5);
  EXPECT_EQ(minimal_rmse(t, t, 5), 0.0);
  // distance 0.1 in d=100
  std::vector<Vec> t100 = {Vec::Unit(100, 0), Vec::Unit(100, 1)};
  Vec moved = t100[0];
  moved(0) = std::cos(0.1);
  moved(2) = std::sin(0.1);
  const double dist = dist_up_to_sign_perm({moved, t100[1]}, t100).distance;
  EXPECT_NEAR(minimal_rmse({moved, t100[1]}, t100, 100), dist / 10.0, 1e-15);
  EXPECT_THROW(minimal_rmse(t, t, 0), DimensionError);
}

TEST(MinimalRmse, ZeroPaddingScalesByDimension) {
  Engine eng(2);
  const auto t = truth(4);
  const std::vector<Vec> est = {random_unit_vector(4, eng), random_unit_vector(4, eng)};
  auto pad = [](const Vec& v) {
    Vec out = Vec::Zero(16);
    out.head(4) = v;
    return out;
  };
  const std::vector<Vec> est16 = {pad(est[0]), pad(est[1])}, t16 = {pad(t[0]), pad(t[1])};
  EXPECT_NEAR(dist_up_to_sign_perm(est16, t16).distance, dist_up_to_sign_perm(est, t).distance, 1e-15);
  EXPECT_NEAR(minimal_rmse(est16, t16, 16), minimal_rmse(est, t, 4) / 2.0, 1e-15);
}

TEST(RecoveryReport, Fields) {
  Engine eng(3);
  const auto t = truth(5);
  const std::vector<Vec> est = {random_unit_vector(5, eng), random_unit_vector(5, eng)};
  const auto r = recovery_report(est, t);
  EXPECT_LE(r.distance_up_to_sign_perm, r.signed_distance);
  EXPECT_DOUBLE_EQ(r.minimal_rmse, r.distance_up_to_sign_perm / std::sqrt(5.0));
  EXPECT_EQ(r.best_permutation.size(), 2u);
  EXPECT_EQ(r.best_signs.size(), 2u);
}
