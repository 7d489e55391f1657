#include "uniex/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>

namespace uniex {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spread(const std::map<std::size_t, double>& groups) {
  if (groups.size() < 2) return 0.0;
  double lo = groups.begin()->second, hi = lo;
  for (const auto& [k, v] : groups) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return lo > 0.0 ? hi / lo - 1.0 : 0.0;
}

}  // namespace

double BenchReport::total_spread() const { return spread(total_by_targets); }
double BenchReport::decode_spread() const { return spread(decode_by_targets); }

std::string BenchReport::to_key_values() const {
  std::ostringstream os;
  os.precision(6);
  os << "sentences=" << sentences.size() << '\n'
     << "batch=" << batch << '\n'
     << "sentences_per_second=" << sentences_per_second << '\n';
  for (const auto& [k, v] : total_by_targets) os << "total_seconds.targets_" << k << '=' << v << '\n';
  for (const auto& [k, v] : decode_by_targets) os << "decode_seconds.targets_" << k << '=' << v << '\n';
  os << "total_spread=" << total_spread() << '\n' << "decode_spread=" << decode_spread() << '\n';
  return os.str();
}

BenchReport run_bench(const Model& model, const std::vector<ExDocument>& docs,
                      const BenchOptions& options) {
  if (docs.empty()) throw std::invalid_argument("bench: empty dataset");
  if (options.batch == 0 || options.repeats == 0) {
    throw std::invalid_argument("bench: batch and repeats must be positive");
  }
  const double tau = model.config().threshold;
  std::vector<nd::Array> gold_scores;
  if (options.decode_gold) {
    for (const auto& d : docs) {
      const auto n = model.prompt(d.tokens).text_length();
      gold_scores.push_back(
          cast_target_to_scores(build_target_tensor(clip_record(d.gold, n), model.schemas(), n)));
    }
  }

  std::vector<std::vector<double>> total(docs.size()), dec(docs.size());
  double timed = 0.0;
  for (std::size_t pass = 0; pass < options.warmup + options.repeats; ++pass) {
    const bool record = pass >= options.warmup;
    for (std::size_t b = 0; b < docs.size(); b += options.batch) {
      const std::size_t e = std::min(docs.size(), b + options.batch);
      const auto batch_start = Clock::now();
      for (std::size_t i = b; i < e; ++i) {
        const auto t0 = Clock::now();
        const auto scores = model.forward(model.prompt(docs[i].tokens)).value();
        const auto t1 = Clock::now();
        const auto rec = decode(options.decode_gold ? gold_scores[i] : scores, model.schemas(), tau);
        const double d = seconds_since(t1);
        const double t = seconds_since(t0);
        if (record) {
          total[i].push_back(t);
          dec[i].push_back(d);
        }
        (void)rec;
      }
      if (record) timed += seconds_since(batch_start);
    }
  }

  BenchReport report;
  report.batch = options.batch;
  report.sentences_per_second =
      timed > 0.0 ? static_cast<double>(docs.size() * options.repeats) / timed : 0.0;
  std::map<std::size_t, std::vector<double>> by_total, by_decode;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    SentenceTiming s;
    s.id = docs[i].id;
    s.targets = docs[i].gold.target_count();
    s.text_length = docs[i].tokens.size();
    s.total_seconds = median(total[i]);
    s.decode_seconds = median(dec[i]);
    by_total[s.targets].push_back(s.total_seconds);
    by_decode[s.targets].push_back(s.decode_seconds);
    report.sentences.push_back(std::move(s));
  }
  for (auto& [k, v] : by_total) report.total_by_targets[k] = median(v);
  for (auto& [k, v] : by_decode) report.decode_by_targets[k] = median(v);
  return report;
}

std::vector<ExDocument> make_density_documents(const std::vector<std::size_t>& target_counts,
                                               std::size_t text_length, std::uint64_t seed) {
  static const char* kTypes[] = {"Person", "Location", "Organization"};
  std::mt19937_64 rng(seed);
  const auto schemas = fixture_schema(FixtureKind::relation);
  std::vector<ExDocument> docs;
  for (std::size_t k : target_counts) {
    if (3 * k > text_length) {
      throw std::invalid_argument(std::to_string(k) + " targets do not fit in " +
                                  std::to_string(text_length) + " tokens");
    }
    ExDocument d;
    d.id = "density-" + std::to_string(docs.size()) + "-t" + std::to_string(k);
    d.task = schemas.task_name;
    for (std::size_t i = 0; i < text_length; ++i) {
      d.tokens.push_back("w" + std::to_string(rng() % 50));
    }
    for (std::size_t i = 0; i < k; ++i) {
      d.gold.entities.push_back({{3 * i, 3 * i + 1}, kTypes[(i + rng() % 3) % 3]});
    }
    d.gold.normalize();
    d.text.clear();
    for (std::size_t i = 0; i < d.tokens.size(); ++i) d.text += (i ? " " : "") + d.tokens[i];
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace uniex
