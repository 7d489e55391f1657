#pragma once

#include <cstddef>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "uniex/ndiff.hpp"
#include "uniex/params.hpp"
#include "uniex/schema.hpp"

namespace uniex {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 256;
  std::size_t vocab_size = 0;
  std::size_t max_position = 160;
  std::uint64_t seed = 13;
  double init_std = 0.02;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// Trainable scalars created by init_encoder_params:
//   token + position embeddings: (vocab_size + max_position) * d
//   per layer: attention 4 * d*d + 3d (no key bias), two layer norms 2 * 2d,
//              feed-forward d*f + f + f*d + d
//   final layer norm: 2d
std::size_t encoder_param_count(const EncoderConfig& config);

// Weights ~ N(0, init_std), layer-norm gains 1, biases 0. Deterministic in
// config.seed.
void init_encoder_params(const EncoderConfig& config, ParamStore& store);

struct Encodings {
  nd::Var schema;  // (N_s, d), read at the identifier token of each schema
  nd::Var text;    // (N_x, d)
};

// Pre-norm transformer stack with learned token and position embeddings.
// Attention logits receive kMaskedLogit at every cell the input mask
// forbids.
Encodings encode(const UnifiedInput& input, const ParamStore& params, const EncoderConfig& config);

// The sublayer output of layer 0's self-attention, exposed for mask probes.
nd::Var first_attention_output(const UnifiedInput& input, const ParamStore& params,
                               const EncoderConfig& config);

}  // namespace uniex
