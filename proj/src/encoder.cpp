#include "uniex/encoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace uniex {

namespace {

std::string layer_prefix(std::size_t l) { return "encoder.layer" + std::to_string(l) + "."; }

nd::Var linear(const nd::Var& x, const ParamStore& p, const std::string& name) {
  return nd::add_row(nd::matmul(x, p.get(name + ".weight")), p.get(name + ".bias"));
}

nd::Var norm(const nd::Var& x, const ParamStore& p, const std::string& name) {
  return nd::layer_norm(x, p.get(name + ".gain"), p.get(name + ".bias"));
}

nd::Array additive_mask(const nd::Array& visibility) {
  nd::Array out(visibility.shape(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (visibility[i] == 0.0) out[i] = nd::kMaskedLogit;
  }
  return out;
}

nd::Var self_attention(const nd::Var& x, const nd::Array& mask, const ParamStore& p,
                       const std::string& prefix, const EncoderConfig& cfg) {
  const auto q = linear(x, p, prefix + "attn.query");
  // Keys carry no bias: it would shift every logit of a row equally.
  const auto k = nd::matmul(x, p.get(prefix + "attn.key.weight"));
  const auto v = linear(x, p, prefix + "attn.value");
  const std::size_t head_dim = cfg.hidden / cfg.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<nd::Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const auto qh = nd::slice_cols(q, h * head_dim, head_dim);
    const auto kh = nd::slice_cols(k, h * head_dim, head_dim);
    const auto vh = nd::slice_cols(v, h * head_dim, head_dim);
    const auto logits = nd::scale(nd::matmul(qh, nd::transpose(kh)), inv_sqrt);
    heads.push_back(nd::matmul(nd::softmax_rows(logits, mask), vh));
  }
  return linear(nd::concat_cols(heads), p, prefix + "attn.output");
}

nd::Var embed(const UnifiedInput& input, const ParamStore& p, const EncoderConfig& cfg) {
  for (std::size_t i = 0; i < input.tokens.size(); ++i) {
    if (input.tokens[i] >= cfg.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(input.tokens[i]) + " at " +
                              std::to_string(i) + " exceeds vocabulary size " +
                              std::to_string(cfg.vocab_size));
    }
    if (input.positions[i] >= cfg.max_position) {
      throw std::out_of_range("position id " + std::to_string(input.positions[i]) + " at " +
                              std::to_string(i) + " exceeds max_position " +
                              std::to_string(cfg.max_position));
    }
  }
  return nd::add(nd::gather_rows(p.get("encoder.embed.token"), input.tokens),
                 nd::gather_rows(p.get("encoder.embed.position"), input.positions));
}

void check_finite(const nd::Var& x, const std::string& where) {
  if (!x.value().all_finite()) throw std::runtime_error("non-finite activation in " + where);
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || ffn_hidden == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (hidden % heads != 0) {
    throw std::invalid_argument("hidden size " + std::to_string(hidden) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (vocab_size == 0) throw std::invalid_argument("encoder needs a vocabulary size");
  if (max_position == 0) throw std::invalid_argument("encoder needs max_position > 0");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"layers", layers},         {"hidden", hidden},
          {"heads", heads},           {"ffn_hidden", ffn_hidden},
          {"vocab_size", vocab_size}, {"max_position", max_position},
          {"seed", seed},             {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_position = j.at("max_position").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_std = j.value("init_std", 0.02);
  return c;
}

std::size_t encoder_param_count(const EncoderConfig& c) {
  const std::size_t d = c.hidden, f = c.ffn_hidden;
  const std::size_t per_layer = 4 * d * d + 3 * d + 2 * (2 * d) + (d * f + f + f * d + d);
  return (c.vocab_size + c.max_position) * d + c.layers * per_layer + 2 * d;
}

void init_encoder_params(const EncoderConfig& cfg, ParamStore& store) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  auto random = [&](nd::Shape shape) {
    nd::Array a(std::move(shape));
    for (auto& v : a.raw()) v = normal(rng);
    return a;
  };
  const std::size_t d = cfg.hidden, f = cfg.ffn_hidden;
  auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    store.add(name + ".weight", random({in, out}));
    store.add(name + ".bias", nd::Array({out}, 0.0));
  };
  auto add_norm = [&](const std::string& name) {
    store.add(name + ".gain", nd::Array({d}, 1.0));
    store.add(name + ".bias", nd::Array({d}, 0.0));
  };

  store.add("encoder.embed.token", random({cfg.vocab_size, d}));
  store.add("encoder.embed.position", random({cfg.max_position, d}));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto pre = layer_prefix(l);
    add_norm(pre + "ln_attn");
    add_linear(pre + "attn.query", d, d);
    store.add(pre + "attn.key.weight", random({d, d}));
    add_linear(pre + "attn.value", d, d);
    add_linear(pre + "attn.output", d, d);
    add_norm(pre + "ln_ffn");
    add_linear(pre + "ffn.in", d, f);
    add_linear(pre + "ffn.out", f, d);
  }
  add_norm("encoder.final_ln");
}

Encodings encode(const UnifiedInput& input, const ParamStore& p, const EncoderConfig& cfg) {
  const auto mask = additive_mask(input.mask);
  auto x = embed(input, p, cfg);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto pre = layer_prefix(l);
    x = nd::add(x, self_attention(norm(x, p, pre + "ln_attn"), mask, p, pre, cfg));
    const auto hidden = nd::gelu(linear(norm(x, p, pre + "ln_ffn"), p, pre + "ffn.in"));
    x = nd::add(x, linear(hidden, p, pre + "ffn.out"));
    check_finite(x, "encoder layer " + std::to_string(l));
  }
  x = norm(x, p, "encoder.final_ln");
  return {nd::gather_rows(x, input.schema_anchor), nd::gather_rows(x, input.text_range)};
}

nd::Var first_attention_output(const UnifiedInput& input, const ParamStore& p,
                               const EncoderConfig& cfg) {
  const auto x = embed(input, p, cfg);
  const auto pre = layer_prefix(0);
  return self_attention(norm(x, p, pre + "ln_attn"), additive_mask(input.mask), p, pre, cfg);
}

}  // namespace uniex
