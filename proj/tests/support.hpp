#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "uniex/ndiff.hpp"
#include "uniex/schema.hpp"

namespace support {

inline uniex::nd::Array random_array(uniex::nd::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  uniex::nd::Array a(std::move(shape));
  for (auto& v : a.raw()) v = u(rng);
  return a;
}

inline double max_abs_diff(const uniex::nd::Array& a, const uniex::nd::Array& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Two entity types, one relation bound to both, plus an unbound type.
inline uniex::SchemaSet small_relation_schema() {
  using uniex::LabelKind;
  uniex::SchemaSet s;
  s.task_name = "Relation Extraction";
  s.classification = {{"Person", LabelKind::entity},
                      {"Location", LabelKind::entity},
                      {"Organization", LabelKind::entity}};
  s.association = {{"live in", LabelKind::relation}, {"work for", LabelKind::relation}};
  s.bindings = {{"live in", "Person"},
                {"live in", "Location"},
                {"work for", "Person"},
                {"work for", "Organization"}};
  return s;
}

}  // namespace support
