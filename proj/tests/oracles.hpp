#pragma once

// Reference computations written directly from the formulas, sharing no code
// with the library beyond the Array container.

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "uniex/ndiff.hpp"
#include "uniex/schema.hpp"
#include "uniex/scoring.hpp"

namespace oracle {

using uniex::nd::Array;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// out = gelu(x W1 + b1) W2 + b2, row by row.
inline Array ffn(const uniex::SpanFfn& f, const Array& x) {
  const auto& w1 = f.in_weight.value();
  const auto& b1 = f.in_bias.value();
  const auto& w2 = f.out_weight.value();
  const auto& b2 = f.out_bias.value();
  const std::size_t n = x.dim(0), d = x.dim(1), h = w1.dim(1), o = w2.dim(1);
  Array out({n, o});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> hid(h);
    for (std::size_t j = 0; j < h; ++j) {
      double z = b1[j];
      for (std::size_t k = 0; k < d; ++k) z += x.at(i, k) * w1.at(k, j);
      hid[j] = gelu(z);
    }
    for (std::size_t j = 0; j < o; ++j) {
      double z = b2[j];
      for (std::size_t k = 0; k < h; ++k) z += hid[k] * w2.at(k, j);
      out.at(i, j) = z;
    }
  }
  return out;
}

// S[r,p,q] = sigmoid(sum_abc W[a,b,c] Hs[r,a] Hxs[p,b] Hxe[q,c]).
inline Array triaffine(const Array& hs, const Array& hx, const uniex::TriaffineParams& params) {
  const auto hxs = ffn(params.start, hx);
  const auto hxe = ffn(params.end, hx);
  const auto& w = params.weight.value();
  const std::size_t ns = hs.dim(0), nx = hx.dim(0), d = hs.dim(1);
  Array s({ns, nx, nx});
  for (std::size_t r = 0; r < ns; ++r)
    for (std::size_t p = 0; p < nx; ++p)
      for (std::size_t q = 0; q < nx; ++q) {
        double acc = 0.0;
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b)
            for (std::size_t c = 0; c < d; ++c)
              acc += w.at(a, b, c) * hs.at(r, a) * hxs.at(p, b) * hxe.at(q, c);
        s.at(r, p, q) = sigmoid(acc);
      }
  return s;
}

inline uniex::SpanFfn random_ffn(std::size_t d, std::mt19937_64& rng) {
  using uniex::nd::parameter;
  return {parameter(support::random_array({d, d}, rng)), parameter(support::random_array({d}, rng)),
          parameter(support::random_array({d, d}, rng)), parameter(support::random_array({d}, rng))};
}

struct TriaffineInstance {
  Array hs, hx;
  uniex::TriaffineParams params;
};

// d <= 8, N_x <= 6, N_s <= 4.
inline TriaffineInstance random_triaffine(std::mt19937_64& rng) {
  const std::size_t d = 1 + rng() % 8, nx = 1 + rng() % 6, ns = 1 + rng() % 4;
  TriaffineInstance t;
  t.hs = support::random_array({ns, d}, rng);
  t.hx = support::random_array({nx, d}, rng);
  t.params.weight = uniex::nd::parameter(support::random_array({d, d, d}, rng));
  t.params.start = random_ffn(d, rng);
  t.params.end = random_ffn(d, rng);
  return t;
}

// Score tensor whose cells clear 0.5 with probability p_above, drawn so that
// no cell sits exactly on the threshold.
inline Array random_scores(std::size_t ns, std::size_t nx, double p_above, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Array s({ns, nx, nx});
  for (auto& v : s.raw()) {
    const double level = 0.01 + 0.48 * u(rng);
    v = u(rng) < p_above ? 1.0 - level : level;
  }
  return s;
}

}  // namespace oracle
