#pragma once

#include <cstdint>
#include <string>

#include "uniex/encoder.hpp"
#include "uniex/ndiff.hpp"
#include "uniex/params.hpp"

namespace uniex {

enum class HeadKind { triaffine, multihead_selection };

const char* to_string(HeadKind head);
HeadKind head_kind_from_string(const std::string& s);

// Single-hidden-layer transform d -> d -> d with GELU.
struct SpanFfn {
  nd::Var in_weight, in_bias, out_weight, out_bias;
};

struct TriaffineParams {
  nd::Var weight;  // (d, d, d), axes = (schema, start, end)
  SpanFfn start, end;
};

struct MultiHeadSelectionParams {
  nd::Var start_map;  // U, (d, d)
  nd::Var end_map;    // V, (d, d)
  SpanFfn start, end;
};

// Creates "head.*" parameters for the chosen head in `store`.
void init_head_params(HeadKind head, std::size_t hidden, std::uint64_t seed, double init_std,
                      ParamStore& store);
TriaffineParams triaffine_params(const ParamStore& store);
MultiHeadSelectionParams multihead_params(const ParamStore& store);

nd::Var span_ffn(const SpanFfn& ffn, const nd::Var& x);

// S[r,p,q] = sigmoid(sum_abc W[a,b,c] Hs[r,a] Hxs[p,b] Hxe[q,c]) with
// Hxs = FFN_s(Hx), Hxe = FFN_e(Hx). Contracts the schema axis first.
nd::Var triaffine_score(const Encodings& enc, const TriaffineParams& params);
// The same tensor before the sigmoid.
nd::Var triaffine_logits(const Encodings& enc, const TriaffineParams& params);

// The trilinear form on already-transformed start/end representations.
nd::Var triaffine_table(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                        const nd::Var& weight);
nd::Var triaffine_table_logits(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                               const nd::Var& weight);
nd::Array triaffine_table_naive(const nd::Array& schema, const nd::Array& start,
                                const nd::Array& end, const nd::Array& weight);

// Reference: the same tensor from an explicit quadruple loop over plain
// arrays, with its own FFN evaluation.
nd::Array triaffine_score_naive(const nd::Array& schema, const nd::Array& text,
                                const TriaffineParams& params);

// S[r,p,q] = sigmoid(<U Hs[r], Hxs[p]> + <V Hs[r], Hxe[q]>).
nd::Var multihead_selection_score(const Encodings& enc, const MultiHeadSelectionParams& params);
nd::Var multihead_selection_logits(const Encodings& enc, const MultiHeadSelectionParams& params);
nd::Var selection_table(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                        const nd::Var& start_map, const nd::Var& end_map);
nd::Var selection_table_logits(const nd::Var& schema, const nd::Var& start, const nd::Var& end,
                               const nd::Var& start_map, const nd::Var& end_map);

}  // namespace uniex
