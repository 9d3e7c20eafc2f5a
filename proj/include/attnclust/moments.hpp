#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnclust/errors.hpp"
#include "attnclust/parallel.hpp"
#include "attnclust/rng.hpp"

namespace attnclust {

template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Closed-form Gaussian moments. Throughout, X = m + G with G ~ N(0, sigma^2 I_d)
// and m a unit vector (the "star" arguments).
// ---------------------------------------------------------------------------

struct MomentContext {
  double sigma = 0.0;
  int d = 0;
  std::optional<Eigen::VectorXd> a, b, c;
};

// Items 1..8 over G ~ N(0, sigma^2 I_d):
//   1 E|G|^2                      2 E<a,G>
//   3 E[<a,G> G]   (vector)       4 E[<a,G><b,G>]
//   5 E[<a,G>^2 <b,G>^2]          6 E[<a,G><b,G>^2<c,G>]
//   7 E[<a,G><b,G>|G|^2]          8 E[<a,G>^2<b,G>^2|G|^2]
struct IsserlisValue {
  double scalar = 0.0;
  Eigen::VectorXd vector;  // only set for item 3
  bool is_vector = false;
};

inline IsserlisValue isserlis_identity(int id, const MomentContext& ctx) {
  auto need = [&](const std::optional<Eigen::VectorXd>& v, const char* name) -> const Eigen::VectorXd& {
    if (!v) throw ArgumentError(std::string("identity ") + std::to_string(id) + " needs vector " + name);
    if (v->size() != ctx.d) throw DimensionError("vector dimension does not match d");
    return *v;
  };
  const double s2 = ctx.sigma * ctx.sigma, s4 = s2 * s2, s6 = s4 * s2;
  const double d = ctx.d;
  IsserlisValue out;
  switch (id) {
    case 1:
      out.scalar = s2 * d;
      break;
    case 2:
      need(ctx.a, "a");
      out.scalar = 0.0;
      break;
    case 3:
      out.vector = s2 * need(ctx.a, "a");
      out.is_vector = true;
      break;
    case 4:
      out.scalar = s2 * need(ctx.a, "a").dot(need(ctx.b, "b"));
      break;
    case 5: {
      const auto& a = need(ctx.a, "a");
      const auto& b = need(ctx.b, "b");
      const double ab = a.dot(b);
      out.scalar = s4 * (a.squaredNorm() * b.squaredNorm() + 2 * ab * ab);
      break;
    }
    case 6: {
      const auto& a = need(ctx.a, "a");
      const auto& b = need(ctx.b, "b");
      const auto& c = need(ctx.c, "c");
      out.scalar = s4 * (b.squaredNorm() * a.dot(c) + 2 * a.dot(b) * b.dot(c));
      break;
    }
    case 7:
      out.scalar = s4 * (d + 2) * need(ctx.a, "a").dot(need(ctx.b, "b"));
      break;
    case 8: {
      const auto& a = need(ctx.a, "a");
      const auto& b = need(ctx.b, "b");
      const double ab = a.dot(b);
      out.scalar = s6 * (d + 4) * (a.squaredNorm() * b.squaredNorm() + 2 * ab * ab);
      break;
    }
    default:
      throw ArgumentError("identity id must be in 1..8");
  }
  return out;
}

namespace detail {

template <class T>
T p0_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m, double sigma, int dim) {
  const double s2 = sigma * sigma, s4 = s2 * s2, s6 = s4 * s2, d = dim;
  const T al = m.dot(a), be = m.dot(b), ab = a.dot(b);
  const T na = a.squaredNorm(), nb = b.squaredNorm();
  const T quad = na * nb + 2.0 * ab * ab;
  return al * al * be * be * (1.0 + s2 * (d + 8)) + s2 * (be * be * na + 4.0 * al * be * ab + al * al * nb) +
         s4 * (quad + (d + 6) * (na * be * be + nb * al * al)) + 4.0 * s4 * (d + 6) * al * be * ab +
         s6 * (d + 4) * quad;
}

template <class T>
T p1_0_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m, const VecT<T>& c, double sigma) {
  const double s2 = sigma * sigma, s4 = s2 * s2;
  const T al = m.dot(a), be = m.dot(b), ga = m.dot(c);
  const T ab = a.dot(b), ac = a.dot(c), bc = b.dot(c), na = a.squaredNorm();
  return al * al * be * ga + s2 * (na * be * ga + 2.0 * al * (ga * ab + be * ac)) + s2 * al * al * bc +
         s4 * (na * bc + 2.0 * ab * ac);
}

template <class T>
T p1_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m1, const VecT<T>& m2, double sigma) {
  return m2.dot(b) * p1_0_impl<T>(a, b, m1, m2, sigma) + sigma * sigma * p1_0_impl<T>(a, b, m1, b, sigma);
}

template <class T>
T p2_0_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m, double sigma) {
  return m.dot(a) * m.dot(b) + sigma * sigma * a.dot(b);
}

template <class T>
T p2_1_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m, double sigma, int dim) {
  const double s2 = sigma * sigma, s4 = s2 * s2, d = dim;
  const T proj = m.dot(a) * m.dot(b), ab = a.dot(b);
  return proj + s2 * ((d + 4) * proj + ab) + s4 * (d + 2) * ab;
}

template <class T>
T p2_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m1, const VecT<T>& m2, double sigma, int d) {
  return p2_0_impl<T>(a, b, m1, sigma) * p2_1_impl<T>(a, b, m2, sigma, d);
}

template <class T>
T p3_1_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m2, const VecT<T>& m3, double sigma) {
  const double s2 = sigma * sigma;
  return m2.dot(a) * m3.dot(b) * m2.dot(m3) + s2 * (m2.dot(a) * m2.dot(b) + m3.dot(a) * m3.dot(b)) +
         s2 * s2 * a.dot(b);
}

template <class T>
T p3_impl(const VecT<T>& a, const VecT<T>& b, const VecT<T>& m1, const VecT<T>& m2, const VecT<T>& m3,
          double sigma) {
  return p2_0_impl<T>(a, b, m1, sigma) * p3_1_impl<T>(a, b, m2, m3, sigma);
}

// E[<X,a>^2 |X|^2]
template <class T>
T square_norm_moment_impl(const VecT<T>& a, const VecT<T>& m, double sigma, int dim) {
  const double s2 = sigma * sigma, d = dim;
  const T al = m.dot(a);
  return al * al * (1.0 + s2 * (d + 4)) + s2 * a.squaredNorm() * (1.0 + s2 * (d + 2));
}

inline void require_unit(const Eigen::VectorXd& m, const char* what) {
  if (std::abs(m.norm() - 1.0) > 1e-12) throw DomainError(std::string(what) + " must have unit norm");
}

inline void require_same_dim(std::initializer_list<const Eigen::VectorXd*> vs) {
  const auto n = (*vs.begin())->size();
  for (auto* v : vs)
    if (v->size() != n) throw DimensionError("vector dimensions differ");
}

}  // namespace detail

// E[<X,a>^2 <X,b>^2 |X|^2] for X ~ N(m, sigma^2 I_d).
inline double p0(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m, double sigma,
                 int d) {
  detail::require_same_dim({&a, &b, &m});
  detail::require_unit(m, "centroid");
  return detail::p0_impl<double>(a, b, m, sigma, d);
}

// E[<X,a>^2 <X,b> <X,c>] for X ~ N(m, sigma^2 I_d); c is arbitrary.
inline double p1_0(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m,
                   const Eigen::VectorXd& c, double sigma) {
  detail::require_same_dim({&a, &b, &m, &c});
  detail::require_unit(m, "centroid");
  return detail::p1_0_impl<double>(a, b, m, c, sigma);
}

// E[<X1,a>^2 <X1,b> <X2,b> <X1,X2>] with X1 ~ N(m1, .), X2 ~ N(m2, .) independent.
inline double p1(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m1,
                 const Eigen::VectorXd& m2, double sigma, int /*d*/) {
  detail::require_same_dim({&a, &b, &m1, &m2});
  detail::require_unit(m1, "centroid");
  detail::require_unit(m2, "centroid");
  return detail::p1_impl<double>(a, b, m1, m2, sigma);
}

// E[<X,a><X,b>]
inline double p2_0(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m, double sigma) {
  detail::require_same_dim({&a, &b, &m});
  detail::require_unit(m, "centroid");
  return detail::p2_0_impl<double>(a, b, m, sigma);
}

// E[<X,a><X,b>|X|^2]
inline double p2_1(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m, double sigma,
                   int d) {
  detail::require_same_dim({&a, &b, &m});
  detail::require_unit(m, "centroid");
  return detail::p2_1_impl<double>(a, b, m, sigma, d);
}

// E[<X1,a><X2,a><X1,b><X2,b>|X2|^2]
inline double p2(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m1,
                 const Eigen::VectorXd& m2, double sigma, int d) {
  detail::require_same_dim({&a, &b, &m1, &m2});
  detail::require_unit(m1, "centroid");
  detail::require_unit(m2, "centroid");
  return detail::p2_impl<double>(a, b, m1, m2, sigma, d);
}

inline double p3_0(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m, double sigma) {
  return p2_0(a, b, m, sigma);
}

// E[<X2,a><X3,b><X2,X3>]
inline double p3_1(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m2,
                   const Eigen::VectorXd& m3, double sigma) {
  detail::require_same_dim({&a, &b, &m2, &m3});
  detail::require_unit(m2, "centroid");
  detail::require_unit(m3, "centroid");
  return detail::p3_1_impl<double>(a, b, m2, m3, sigma);
}

// E[<X1,a><X2,a><X1,b><X3,b><X2,X3>]
inline double p3(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m1,
                 const Eigen::VectorXd& m2, const Eigen::VectorXd& m3, double sigma, int /*d*/) {
  detail::require_same_dim({&a, &b, &m1, &m2, &m3});
  detail::require_unit(m1, "centroid");
  detail::require_unit(m2, "centroid");
  detail::require_unit(m3, "centroid");
  return detail::p3_impl<double>(a, b, m1, m2, m3, sigma);
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation
// ---------------------------------------------------------------------------

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  double sd = 0.0;  // sample standard deviation
  std::size_t n = 0;

  // |mean - target| <= k * se, with a tiny absolute floor for zero-variance cases
  bool agrees_with(double target, double k = 4.0) const {
    return std::abs(mean - target) <= k * se + 1e-12 * (1.0 + std::abs(target));
  }
};

struct RunningMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double delta = o.mean - mean;
    const double tot = na + nb;
    mean += delta * nb / tot;
    m2 += o.m2 + delta * delta * na * nb / tot;
    n += o.n;
  }

  Estimate estimate() const {
    Estimate e;
    e.n = n;
    e.mean = mean;
    e.sd = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
    e.se = n > 0 ? e.sd / std::sqrt(static_cast<double>(n)) : 0.0;
    return e;
  }
};

// Estimates the means of n_outputs quantities from n_samples independent draws.
// make_sampler() is called once per chunk and must return a callable
// sampler(Engine&, double* out) writing one draw of every quantity. Chunks use
// disjoint streams split from `stream` and are reduced in chunk order, so the
// result does not depend on the worker count.
template <class SamplerFactory>
std::vector<Estimate> mc_estimate(std::size_t n_samples, int n_outputs, const SeedStream& stream,
                                  SamplerFactory&& make_sampler, std::size_t n_chunks = 64) {
  if (n_samples == 0) throw ArgumentError("need at least one sample");
  n_chunks = std::max<std::size_t>(1, std::min(n_chunks, n_samples));
  std::vector<std::vector<RunningMoments>> parts(n_chunks, std::vector<RunningMoments>(n_outputs));
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = n_samples * c / n_chunks, end = n_samples * (c + 1) / n_chunks;
    Engine eng = stream.split(c).engine();
    auto sampler = make_sampler();
    std::vector<double> buf(n_outputs);
    auto& acc = parts[c];
    for (std::size_t i = begin; i < end; ++i) {
      sampler(eng, buf.data());
      for (int j = 0; j < n_outputs; ++j) acc[j].push(buf[j]);
    }
  });
  std::vector<Estimate> out(n_outputs);
  for (int j = 0; j < n_outputs; ++j) {
    RunningMoments total;
    for (const auto& p : parts) total.merge(p[j]);
    out[j] = total.estimate();
  }
  return out;
}

// Single-quantity convenience wrapper.
template <class SamplerFactory>
Estimate mc_estimate_scalar(std::size_t n_samples, const SeedStream& stream, SamplerFactory&& make_sampler,
                            std::size_t n_chunks = 64) {
  return mc_estimate(n_samples, 1, stream, std::forward<SamplerFactory>(make_sampler), n_chunks).front();
}

}  // namespace attnclust
