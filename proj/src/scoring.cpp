#include "uniex/scoring.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace uniex {

namespace {

void add_ffn(ParamStore& store, const std::string& name, std::size_t d,
             const std::function<nd::Array(nd::Shape)>& random) {
  store.add(name + ".in.weight", random({d, d}));
  store.add(name + ".in.bias", nd::Array({d}, 0.0));
  store.add(name + ".out.weight", random({d, d}));
  store.add(name + ".out.bias", nd::Array({d}, 0.0));
}

SpanFfn get_ffn(const ParamStore& store, const std::string& name) {
  return {store.get(name + ".in.weight"), store.get(name + ".in.bias"),
          store.get(name + ".out.weight"), store.get(name + ".out.bias")};
}

void require_encodings(const Encodings& enc, std::size_t d) {
  if (enc.schema.value().rank() != 2 || enc.text.value().rank() != 2 ||
      enc.schema.shape()[1] != d || enc.text.shape()[1] != d) {
    throw nd::ShapeError("scoring: encodings " + nd::shape_str(enc.schema.shape()) + " and " +
                         nd::shape_str(enc.text.shape()) + " do not match hidden size " +
                         std::to_string(d));
  }
}

// Plain-loop FFN used only by the reference scorer.
nd::Array naive_ffn(const SpanFfn& f, const nd::Array& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto& w1 = f.in_weight.value();
  const auto& b1 = f.in_bias.value();
  const auto& w2 = f.out_weight.value();
  const auto& b2 = f.out_bias.value();
  const std::size_t h = w1.dim(1), out_d = w2.dim(1);
  nd::Array out({n, out_d});
  std::vector<double> hidden(h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      double z = b1[j];
      for (std::size_t t = 0; t < d; ++t) z += x.at(i, t) * w1.at(t, j);
      hidden[j] = 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2));
    }
    for (std::size_t j = 0; j < out_d; ++j) {
      double z = b2[j];
      for (std::size_t t = 0; t < h; ++t) z += hidden[t] * w2.at(t, j);
      out.at(i, j) = z;
    }
  }
  return out;
}

}  // namespace

const char* to_string(HeadKind head) {
  return head == HeadKind::triaffine ? "triaffine" : "multihead_selection";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "triaffine") return HeadKind::triaffine;
  if (s == "multihead_selection") return HeadKind::multihead_selection;
  throw std::invalid_argument("unknown scoring head '" + s + "'");
}

void init_head_params(HeadKind head, std::size_t d, std::uint64_t seed, double init_std,
                      ParamStore& store) {
  // Offset the stream so head weights never replay the encoder's draws.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, init_std);
  auto random = [&](nd::Shape shape) {
    nd::Array a(std::move(shape));
    for (auto& v : a.raw()) v = normal(rng);
    return a;
  };
  if (head == HeadKind::triaffine) {
    store.add("head.triaffine", random({d, d, d}));
  } else {
    store.add("head.select.start_map", random({d, d}));
    store.add("head.select.end_map", random({d, d}));
  }
  add_ffn(store, "head.ffn_start", d, random);
  add_ffn(store, "head.ffn_end", d, random);
}

TriaffineParams triaffine_params(const ParamStore& store) {
  return {store.get("head.triaffine"), get_ffn(store, "head.ffn_start"),
          get_ffn(store, "head.ffn_end")};
}

MultiHeadSelectionParams multihead_params(const ParamStore& store) {
  return {store.get("head.select.start_map"), store.get("head.select.end_map"),
          get_ffn(store, "head.ffn_start"), get_ffn(store, "head.ffn_end")};
}

nd::Var span_ffn(const SpanFfn& f, const nd::Var& x) {
  const auto hidden = nd::gelu(nd::add_row(nd::matmul(x, f.in_weight), f.in_bias));
  return nd::add_row(nd::matmul(hidden, f.out_weight), f.out_bias);
}

nd::Var triaffine_table_logits(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                               const nd::Var& weight) {
  const auto& ws = weight.shape();
  if (ws.size() != 3 || ws[0] != ws[1] || ws[1] != ws[2]) {
    throw nd::ShapeError("triaffine: weight must be cubic, got " + nd::shape_str(ws));
  }
  const std::size_t d = ws[0];
  for (const auto* v : {&schema, &start, &end}) {
    if (v->value().rank() != 2 || v->shape()[1] != d) {
      throw nd::ShapeError("triaffine: incompatible shapes " + nd::shape_str(v->shape()) +
                           " and " + nd::shape_str(ws));
    }
  }
  if (start.shape()[0] != end.shape()[0]) {
    throw nd::ShapeError("triaffine: incompatible shapes " + nd::shape_str(start.shape()) +
                         " and " + nd::shape_str(end.shape()));
  }
  const std::size_t ns = schema.shape()[0], nx = start.shape()[0];

  // T[r, b, c] = sum_a Hs[r, a] W[a, b, c]
  const auto folded = nd::matmul(schema, nd::reshape(weight, {d, d * d}));
  // -> (b, r, c) so the start contraction is one matmul.
  const std::size_t brc[] = {1, 0, 2};
  const auto by_start = nd::reshape(nd::permute(nd::reshape(folded, {ns, d, d}), brc), {d, ns * d});
  // Z[p, r, c] = sum_b Hxs[p, b] T[r, b, c]
  const auto z = nd::reshape(nd::matmul(start, by_start), {nx * ns, d});
  // L[p, r, q] = sum_c Z[p, r, c] Hxe[q, c]
  const auto logits = nd::reshape(nd::matmul(z, nd::transpose(end)), {nx, ns, nx});
  const std::size_t rpq[] = {1, 0, 2};
  return nd::permute(logits, rpq);
}

nd::Var triaffine_table(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                        const nd::Var& weight) {
  return nd::sigmoid(triaffine_table_logits(schema, start, end, weight));
}

nd::Var triaffine_logits(const Encodings& enc, const TriaffineParams& params) {
  require_encodings(enc, params.weight.shape().at(0));
  return triaffine_table_logits(enc.schema, span_ffn(params.start, enc.text),
                                span_ffn(params.end, enc.text), params.weight);
}

nd::Var triaffine_score(const Encodings& enc, const TriaffineParams& params) {
  return nd::sigmoid(triaffine_logits(enc, params));
}

nd::Array triaffine_table_naive(const nd::Array& schema, const nd::Array& start,
                                const nd::Array& end, const nd::Array& w) {
  if (w.rank() != 3 || schema.rank() != 2 || start.rank() != 2 || end.rank() != 2 ||
      schema.dim(1) != w.dim(0) || start.dim(1) != w.dim(1) || end.dim(1) != w.dim(2) ||
      start.dim(0) != end.dim(0)) {
    throw nd::ShapeError("triaffine_naive: incompatible shapes " + nd::shape_str(schema.shape()) +
                         " and " + nd::shape_str(w.shape()));
  }
  const std::size_t ns = schema.dim(0), nx = start.dim(0), d = w.dim(0);
  nd::Array out({ns, nx, nx});
  for (std::size_t r = 0; r < ns; ++r) {
    for (std::size_t p = 0; p < nx; ++p) {
      for (std::size_t q = 0; q < nx; ++q) {
        double z = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          for (std::size_t b = 0; b < d; ++b) {
            for (std::size_t c = 0; c < d; ++c) {
              z += w.at(a, b, c) * schema.at(r, a) * start.at(p, b) * end.at(q, c);
            }
          }
        }
        out.at(r, p, q) = 1.0 / (1.0 + std::exp(-z));
      }
    }
  }
  return out;
}

nd::Array triaffine_score_naive(const nd::Array& schema, const nd::Array& text,
                                const TriaffineParams& params) {
  if (text.rank() != 2 || text.dim(1) != params.weight.shape().at(0)) {
    throw nd::ShapeError("triaffine_naive: incompatible shapes " + nd::shape_str(text.shape()) +
                         " and " + nd::shape_str(params.weight.shape()));
  }
  return triaffine_table_naive(schema, naive_ffn(params.start, text), naive_ffn(params.end, text),
                               params.weight.value());
}

nd::Var selection_table_logits(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                               const nd::Var& start_map, const nd::Var& end_map) {
  const auto& us = start_map.shape();
  if (us.size() != 2 || us[0] != us[1] || end_map.shape() != us) {
    throw nd::ShapeError("multihead_selection: maps must be square, got " + nd::shape_str(us) +
                         " and " + nd::shape_str(end_map.shape()));
  }
  // Row form of U h: (Hs U^T)[r, a] = sum_b U[a, b] Hs[r, b].
  const auto ushs = nd::matmul(schema, nd::transpose(start_map));
  const auto vhs = nd::matmul(schema, nd::transpose(end_map));
  const auto f = nd::matmul(ushs, nd::transpose(start));  // (ns, nx) over p
  const auto g = nd::matmul(vhs, nd::transpose(end));     // (ns, nx) over q
  return nd::outer_add(f, g);
}

nd::Var selection_table(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                        const nd::Var& start_map, const nd::Var& end_map) {
  return nd::sigmoid(selection_table_logits(schema, start, end, start_map, end_map));
}

nd::Var multihead_selection_logits(const Encodings& enc, const MultiHeadSelectionParams& params) {
  require_encodings(enc, params.start_map.shape().at(0));
  return selection_table_logits(enc.schema, span_ffn(params.start, enc.text),
                                span_ffn(params.end, enc.text), params.start_map, params.end_map);
}

nd::Var multihead_selection_score(const Encodings& enc, const MultiHeadSelectionParams& params) {
  return nd::sigmoid(multihead_selection_logits(enc, params));
}

}  // namespace uniex
