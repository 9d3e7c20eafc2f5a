#pragma once

#include <array>
#include <string>
#include <vector>

#include "attnclust/moments.hpp"
#include "attnclust/mixtures.hpp"

namespace attnclust {

// A random vector configuration: general vectors a, b, c and three unit
// centroids (m1, m2 orthonormal, m3 drawn from {m1, m2}).
struct MomentConfig {
  double sigma = 0.3;
  int d = 5;
  Vec a, b, c, m1, m2, m3;
};

inline MomentConfig random_moment_config(std::uint64_t seed) {
  Engine eng = SeedStream(seed).engine();
  MomentConfig cfg;
  const double sigmas[] = {0.3, 0.5, 1.0};
  cfg.sigma = sigmas[uniform_index(eng, 3)];
  cfg.d = 3 + uniform_index(eng, 4);
  const auto cents = make_orthonormal_centroids(cfg.d, 2, CentroidPlacement::Random, SeedStream(seed).split(1));
  cfg.m1 = cents[0];
  cfg.m2 = cents[1];
  cfg.m3 = uniform_index(eng, 2) == 0 ? cents[0] : cents[1];
  auto gen = [&] {
    Vec v(cfg.d);
    for (int i = 0; i < cfg.d; ++i) v(i) = standard_normal(eng);
    return v;
  };
  cfg.a = gen();
  cfg.b = gen();
  cfg.c = gen();
  return cfg;
}

struct MomentCheck {
  std::string name;
  double closed_form;
  Estimate estimate;
};

inline constexpr int kMomentOutputs = 16;

// One MC pass over (G, X1, X2, X3) estimating the eight Gaussian identities
// (the vector identity through its inner product with c) and the p-functions.
inline std::vector<MomentCheck> moment_checks(const MomentConfig& cfg, std::size_t n_samples, const SeedStream& stream) {
  const int d = cfg.d;
  const double s = cfg.sigma;
  MomentContext ctx{s, d, cfg.a, cfg.b, cfg.c};
  std::vector<double> closed(kMomentOutputs);
  for (int id = 1; id <= 8; ++id) {
    const auto v = isserlis_identity(id, ctx);
    closed[id - 1] = v.is_vector ? v.vector.dot(cfg.c) : v.scalar;
  }
  const Vec &a = cfg.a, &b = cfg.b, &c = cfg.c, &m1 = cfg.m1, &m2 = cfg.m2, &m3 = cfg.m3;
  closed[8] = p0(a, b, m1, s, d);
  closed[9] = p1_0(a, b, m1, c, s);
  closed[10] = p1(a, b, m1, m2, s, d);
  closed[11] = p2_0(a, b, m1, s);
  closed[12] = p2_1(a, b, m1, s, d);
  closed[13] = p2(a, b, m1, m2, s, d);
  closed[14] = p3_1(a, b, m2, m3, s);
  closed[15] = p3(a, b, m1, m2, m3, s, d);

  const auto est = mc_estimate(n_samples, kMomentOutputs, stream, [&] {
    return [&, G = Vec(d), X1 = Vec(d), X2 = Vec(d), X3 = Vec(d)](Engine& eng, double* out) mutable {
      for (int i = 0; i < d; ++i) G(i) = s * standard_normal(eng);
      for (int i = 0; i < d; ++i) X2(i) = m2(i) + s * standard_normal(eng);
      for (int i = 0; i < d; ++i) X3(i) = m3(i) + s * standard_normal(eng);
      X1 = m1 + G;
      const double ga = G.dot(a), gb = G.dot(b), gc = G.dot(c), gn = G.squaredNorm();
      out[0] = gn;
      out[1] = ga;
      out[2] = ga * gc;
      out[3] = ga * gb;
      out[4] = ga * ga * gb * gb;
      out[5] = ga * gb * gb * gc;
      out[6] = ga * gb * gn;
      out[7] = ga * ga * gb * gb * gn;
      const double x1a = X1.dot(a), x1b = X1.dot(b), x1n = X1.squaredNorm();
      const double x2a = X2.dot(a), x2b = X2.dot(b), x3b = X3.dot(b);
      out[8] = x1a * x1a * x1b * x1b * x1n;
      out[9] = x1a * x1a * x1b * X1.dot(c);
      out[10] = x1a * x1a * x1b * x2b * X1.dot(X2);
      out[11] = x1a * x1b;
      out[12] = x1a * x1b * x1n;
      out[13] = x1a * x2a * x1b * x2b * X2.squaredNorm();
      out[14] = x2a * x3b * X2.dot(X3);
      out[15] = x1a * x2a * x1b * x3b * X2.dot(X3);
    };
  });
  static const char* names[kMomentOutputs] = {"isserlis_1", "isserlis_2", "isserlis_3", "isserlis_4", "isserlis_5",
                                              "isserlis_6", "isserlis_7", "isserlis_8", "p0", "p1_0", "p1", "p2_0",
                                              "p2_1", "p2", "p3_1", "p3"};
  std::vector<MomentCheck> out;
  for (int j = 0; j < kMomentOutputs; ++j) out.push_back({names[j], closed[j], est[j]});
  return out;
}

}  // namespace attnclust
