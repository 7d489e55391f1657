#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "uniex/encoder.hpp"
#include "uniex/params.hpp"
#include "uniex/schema.hpp"

using namespace uniex;

namespace {

struct Setup {
  SchemaSet schemas;
  Vocabulary vocab;
  EncoderConfig config;
  ParamStore params;
};

Setup make_setup(std::size_t d = 16, std::uint64_t seed = 3) {
  Setup s;
  s.schemas = support::small_relation_schema();
  std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta",
                                 "iota", "kappa"};
  for (std::size_t r = 0; r < s.schemas.size(); ++r) {
    for (const auto& w : split_words(s.schemas.name(r))) words.push_back(w);
  }
  s.vocab = Vocabulary::from_words(words);
  s.config.hidden = d;
  s.config.heads = 4;
  s.config.ffn_hidden = 2 * d;
  s.config.layers = 2;
  s.config.vocab_size = s.vocab.size();
  s.config.max_position = 80;
  s.config.seed = seed;
  s.config.init_std = 0.3;
  init_encoder_params(s.config, s.params);
  return s;
}

const std::vector<std::string> kText{"alpha", "beta", "gamma", "delta", "eps",
                                     "zeta",  "eta",  "theta", "iota",  "kappa"};

}  // namespace

TEST_CASE("encodings have one row per schema and per text token") {
  auto s = make_setup();
  const auto in = build_prompt(s.schemas, s.vocab, kText);
  const auto enc = encode(in, s.params, s.config);
  CHECK(s.schemas.size() == 6);
  CHECK(enc.schema.shape() == nd::Shape{6, 16});
  CHECK(enc.text.shape() == nd::Shape{10, 16});
  CHECK(enc.schema.value().all_finite());
  CHECK(enc.text.value().all_finite());
}

TEST_CASE("parameter count matches the closed form") {
  auto s = make_setup();
  const std::size_t d = 16, f = 32, L = 2, V = s.vocab.size(), P = 80;
  const std::size_t per_layer = (4 * d * d + 3 * d) + 2 * (2 * d) + (d * f + f + f * d + d);
  const std::size_t expected = (V + P) * d + L * per_layer + 2 * d;
  CHECK(s.params.scalar_count() == expected);
  CHECK(encoder_param_count(s.config) == expected);
}

TEST_CASE("initialization is deterministic in the seed") {
  auto a = make_setup(16, 5);
  auto b = make_setup(16, 5);
  auto c = make_setup(16, 6);
  CHECK(a.params.values_equal(b.params));
  CHECK_FALSE(a.params.values_equal(c.params));
}

TEST_CASE("encode is deterministic") {
  auto s = make_setup();
  const auto in = build_prompt(s.schemas, s.vocab, kText);
  const auto a = encode(in, s.params, s.config);
  const auto b = encode(in, s.params, s.config);
  CHECK(a.schema.value() == b.schema.value());
  CHECK(a.text.value() == b.text.value());
}

TEST_CASE("out-of-range ids are rejected") {
  auto s = make_setup();
  auto in = build_prompt(s.schemas, s.vocab, kText);
  auto bad = in;
  bad.tokens[in.text_range[0]] = s.config.vocab_size;
  CHECK_THROWS_AS(encode(bad, s.params, s.config), std::out_of_range);
  bad = in;
  bad.positions[in.text_range[0]] = s.config.max_position;
  CHECK_THROWS_AS(encode(bad, s.params, s.config), std::out_of_range);
}

TEST_CASE("forbidden keys do not reach the first attention output") {
  auto s = make_setup();
  const auto in = build_prompt(s.schemas, s.vocab, kText);
  const auto base = first_attention_output(in, s.params, s.config).value();
  const std::size_t d = s.config.hidden;
  std::size_t probes = 0;
  for (std::size_t k = 0; k < in.length(); ++k) {
    auto changed = in;
    changed.tokens[k] = changed.tokens[k] == s.vocab.id("kappa") ? s.vocab.id("iota") : s.vocab.id("kappa");
    const auto out = first_attention_output(changed, s.params, s.config).value();
    for (std::size_t q = 0; q < in.length(); ++q) {
      if (q == k) continue;
      double diff = 0.0;
      for (std::size_t c = 0; c < d; ++c) diff = std::max(diff, std::abs(out.at(q, c) - base.at(q, c)));
      if (in.mask.at(q, k) == 0.0) {
        ++probes;
        CHECK(diff <= 1e-10);
      } else {
        CHECK(diff > 1e-10);
      }
    }
  }
  CHECK(probes > 0);
}

TEST_CASE("swapping two label blocks swaps schema rows and keeps text rows") {
  auto s = make_setup();
  const std::size_t nc = s.schemas.classification.size(), na = s.schemas.association.size();
  std::vector<std::size_t> co(nc), ao(na);
  for (std::size_t i = 0; i < nc; ++i) co[i] = i;
  for (std::size_t i = 0; i < na; ++i) ao[i] = i;
  std::swap(co[0], co[2]);
  std::swap(ao[0], ao[1]);
  const auto p = s.schemas.permuted(co, ao);
  const auto a = encode(build_prompt(s.schemas, s.vocab, kText), s.params, s.config);
  const auto b = encode(build_prompt(p, s.vocab, kText), s.params, s.config);
  CHECK(support::max_abs_diff(a.text.value(), b.text.value()) <= 1e-10);
  const std::size_t d = s.config.hidden;
  for (std::size_t rb = 0; rb < p.size(); ++rb) {
    const auto ra = *s.schemas.index_of(p.name(rb));
    for (std::size_t c = 0; c < d; ++c) {
      CHECK(std::abs(b.schema.value().at(rb, c) - a.schema.value().at(ra, c)) <= 1e-10);
    }
  }
}

TEST_CASE("with all-ones mask and shared positions, permuting text permutes rows") {
  auto s = make_setup();
  PromptOptions o;
  o.sam_enabled = false;
  auto in = build_prompt(s.schemas, s.vocab, kText, o);
  std::fill(in.positions.begin(), in.positions.end(), 0);
  std::vector<std::size_t> perm(kText.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto shuffled = in;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.tokens[in.text_range[i]] = in.tokens[in.text_range[perm[i]]];
  }
  const auto a = encode(in, s.params, s.config).text.value();
  const auto b = encode(shuffled, s.params, s.config).text.value();
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t c = 0; c < s.config.hidden; ++c) {
      CHECK(std::abs(b.at(i, c) - a.at(perm[i], c)) <= 1e-10);
    }
  }
}

TEST_CASE("config validation") {
  EncoderConfig c;
  c.vocab_size = 10;
  c.hidden = 10;
  c.heads = 4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.heads = 5;
  CHECK_NOTHROW(c.validate());
  CHECK(EncoderConfig::from_json(c.to_json()).to_json() == c.to_json());
}
