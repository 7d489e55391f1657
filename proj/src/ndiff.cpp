#include "uniex/ndiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace uniex::nd {

namespace {

testing::Fault g_fault = testing::Fault::none;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

void require_rank(const char* op, const Var& v, std::size_t rank) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(v.shape()));
  }
}

Var make_result(Array value, std::vector<std::shared_ptr<Node>> parents,
                std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  node->requires_grad = needs;
  if (needs) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

// out(n,m) += a(n,k) * b(k,m)
void gemm_nn(const double* a, const double* b, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      if (av == 0.0) continue;
      const double* brow = b + t * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
    }
  }
}

// out(n,k) += g(n,m) * b(k,m)^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = g + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double* brow = b + t * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
      out[i * k + t] += acc;
    }
  }
}

// out(k,m) += a(n,k)^T * g(n,m)
void gemm_tn(const double* a, const double* g, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = g + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      if (av == 0.0) continue;
      double* orow = out + t * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
    }
  }
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Saturated values are pulled to the nearest doubles inside (0, 1).
double stable_sigmoid(double x) {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  if (x >= 0) return std::min(kHigh, 1.0 / (1.0 + std::exp(-x)));
  const double e = std::exp(x);
  return std::max(kLow, e / (1.0 + e));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("Array: shape " + shape_str(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " values");
  }
}

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array& Node::ensure_grad() {
  if (grad.shape() != value.shape()) grad = Array(value.shape(), 0.0);
  return grad;
}

Var constant(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) shape_fail("matmul", a.shape(), b.shape());
  Array out({n, m}, 0.0);
  gemm_nn(a.value().raw().data(), b.value().raw().data(), out.raw().data(), n, k, m);
  auto pa = a.ptr(), pb = b.ptr();
  return make_result(std::move(out), {pa, pb}, [pa, pb, n, k, m](Node& self) {
    const double* g = self.grad.raw().data();
    std::vector<double> scratch;
    if (testing::fault() == testing::Fault::matmul_backward) {
      scratch.assign(self.grad.raw().begin(), self.grad.raw().end());
      for (auto& v : scratch) v *= 1.01;
      g = scratch.data();
    }
    if (pa->requires_grad) {
      gemm_nt(g, pb->value.raw().data(), pa->ensure_grad().raw().data(), n, k, m);
    }
    if (pb->requires_grad) {
      gemm_tn(pa->value.raw().data(), g, pb->ensure_grad().raw().data(), n, k, m);
    }
  });
}

namespace {

template <typename Fwd, typename Bwd>
Var binary_elementwise(const char* op, const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
  Array out(a.shape());
  const auto& av = a.value().raw();
  const auto& bv = b.value().raw();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  auto pa = a.ptr(), pb = b.ptr();
  return make_result(std::move(out), {pa, pb}, [pa, pb, bwd](Node& self) {
    const auto& g = self.grad.raw();
    const auto& av = pa->value.raw();
    const auto& bv = pb->value.raw();
    if (pa->requires_grad) {
      auto& ga = pa->ensure_grad().raw();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(av[i], bv[i], 0);
    }
    if (pb->requires_grad) {
      auto& gb = pb->ensure_grad().raw();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * bwd(av[i], bv[i], 1);
    }
  });
}

template <typename Fwd, typename Bwd>
Var unary_elementwise(const Var& a, Fwd fwd, Bwd bwd_from_in_out) {
  Array out(a.shape());
  const auto& av = a.value().raw();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  auto pa = a.ptr();
  return make_result(std::move(out), {pa}, [pa, bwd_from_in_out](Node& self) {
    const auto& g = self.grad.raw();
    const auto& x = pa->value.raw();
    const auto& y = self.value.raw();
    auto& ga = pa->ensure_grad().raw();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd_from_in_out(x[i], y[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, int) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, int which) { return which == 0 ? 1.0 : -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, int which) { return which == 0 ? y : x; });
}

Var scale(const Var& a, double c) {
  return unary_elementwise(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_row(const Var& a, const Var& bias) {
  require_rank("add_row", a, 2);
  require_rank("add_row", bias, 1);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  if (bias.shape()[0] != m) shape_fail("add_row", a.shape(), bias.shape());
  Array out = a.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) += bias.value()[j];
  }
  auto pa = a.ptr(), pb = bias.ptr();
  return make_result(std::move(out), {pa, pb}, [pa, pb, n, m](Node& self) {
    const auto& g = self.grad;
    if (pa->requires_grad) {
      auto& ga = pa->ensure_grad().raw();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (pb->requires_grad) {
      auto& gb = pb->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gb[j] += g.at(i, j);
      }
    }
  });
}

Var sigmoid(const Var& a) {
  return unary_elementwise(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var gelu(const Var& a) {
  return unary_elementwise(a, gelu_value, [](double x, double) {
    const double d = gelu_derivative(x);
    return testing::fault() == testing::Fault::gelu_backward ? 1.05 * d : d;
  });
}

Var softmax_rows(const Var& a, const Array& additive_mask) {
  require_rank("softmax_rows", a, 2);
  if (additive_mask.shape() != a.shape()) shape_fail("softmax_rows", a.shape(), additive_mask.shape());
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  Array out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      mx = std::max(mx, a.value().at(i, j) + additive_mask.at(i, j));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = std::exp(a.value().at(i, j) + additive_mask.at(i, j) - mx);
      out.at(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) /= total;
  }
  auto pa = a.ptr();
  return make_result(std::move(out), {pa}, [pa, n, m](Node& self) {
    auto& ga = pa->ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < m; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  require_rank("layer_norm", a, 2);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  if (gain.shape() != Shape{m}) shape_fail("layer_norm", a.shape(), gain.shape());
  if (bias.shape() != Shape{m}) shape_fail("layer_norm", a.shape(), bias.shape());
  Array normed({n, m});
  std::vector<double> inv_std(n);
  Array out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += a.value().at(i, j);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double c = a.value().at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      normed.at(i, j) = (a.value().at(i, j) - mean) * inv_std[i];
      out.at(i, j) = normed.at(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  auto pa = a.ptr(), pg = gain.ptr(), pb = bias.ptr();
  return make_result(
      std::move(out), {pa, pg, pb},
      [pa, pg, pb, n, m, normed = std::move(normed), inv_std = std::move(inv_std)](Node& self) {
        const auto& g = self.grad;
        if (pg->requires_grad) {
          auto& gg = pg->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) gg[j] += g.at(i, j) * normed.at(i, j);
          }
        }
        if (pb->requires_grad) {
          auto& gb = pb->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) gb[j] += g.at(i, j);
          }
        }
        if (pa->requires_grad) {
          auto& ga = pa->ensure_grad();
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t i = 0; i < n; ++i) {
            double sum_dx = 0.0, sum_dx_x = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
              const double dx = g.at(i, j) * pg->value[j];
              sum_dx += dx;
              sum_dx_x += dx * normed.at(i, j);
            }
            for (std::size_t j = 0; j < m; ++j) {
              const double dx = g.at(i, j) * pg->value[j];
              ga.at(i, j) +=
                  inv_std[i] * (dx - inv_m * sum_dx - normed.at(i, j) * inv_m * sum_dx_x);
            }
          }
        }
      });
}

Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
  require_rank("gather_rows", table, 2);
  const std::size_t rows = table.shape()[0], m = table.shape()[1];
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  Array out({idx.size(), m});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(idx[i]) +
                              " out of range for " + shape_str(table.shape()));
    }
    std::copy_n(table.value().raw().begin() + static_cast<std::ptrdiff_t>(idx[i] * m), m,
                out.raw().begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  auto pt = table.ptr();
  return make_result(std::move(out), {pt}, [pt, idx = std::move(idx), m](Node& self) {
    auto& gt = pt->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) gt.at(idx[i], j) += self.grad.at(i, j);
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a.value().size()) shape_fail("reshape", a.shape(), shape);
  Array out(std::move(shape), a.value().raw());
  auto pa = a.ptr();
  return make_result(std::move(out), {pa}, [pa](Node& self) {
    auto& ga = pa->ensure_grad().raw();
    const auto& g = self.grad.raw();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const std::size_t axes[] = {1, 0};
  return permute(a, axes);
}

Var permute(const Var& a, std::span<const std::size_t> axes) {
  const std::size_t rank = a.value().rank();
  if (axes.size() != rank) {
    throw ShapeError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                     shape_str(a.shape()));
  }
  Shape out_shape(rank);
  std::vector<bool> seen(rank, false);
  for (std::size_t i = 0; i < rank; ++i) {
    if (axes[i] >= rank || seen[axes[i]]) {
      throw ShapeError("permute: invalid axis list for shape " + shape_str(a.shape()));
    }
    seen[axes[i]] = true;
    out_shape[i] = a.shape()[axes[i]];
  }
  // Source stride of each output axis.
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.shape()[i];
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t i = 0; i < rank; ++i) src_stride[i] = in_strides[axes[i]];

  // map[out_flat] = in_flat
  const std::size_t total = a.value().size();
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += counter[i] * src_stride[i];
    map[flat] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out_shape[i]) break;
      counter[i] = 0;
    }
  }
  Array out(out_shape);
  for (std::size_t i = 0; i < total; ++i) out[i] = a.value()[map[i]];
  auto pa = a.ptr();
  return make_result(std::move(out), {pa}, [pa, map = std::move(map)](Node& self) {
    auto& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < map.size(); ++i) ga[map[i]] += self.grad[i];
  });
}

Var reduce_sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().raw()) total += v;
  auto pa = a.ptr();
  return make_result(Array::scalar(total), {pa}, [pa](Node& self) {
    auto& ga = pa->ensure_grad().raw();
    const double g = self.grad[0];
    for (auto& v : ga) v += g;
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  require_rank("slice_cols", a, 2);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  if (begin + count > m) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_str(a.shape()));
  }
  Array out({n, count});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = a.value().at(i, begin + j);
  }
  auto pa = a.ptr();
  return make_result(std::move(out), {pa}, [pa, n, begin, count](Node& self) {
    auto& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < count; ++j) ga.at(i, begin + j) += self.grad.at(i, j);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].shape().at(0);
  std::size_t total = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.shape()[0] != n) shape_fail("concat_cols", parts[0].shape(), p.shape());
    total += p.shape()[1];
    parents.push_back(p.ptr());
  }
  Array out({n, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[1];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) out.at(i, offset + j) = p.value().at(i, j);
    }
    offset += w;
  }
  auto captured = parents;
  return make_result(std::move(out), std::move(parents), [captured, n](Node& self) {
    std::size_t offset = 0;
    for (const auto& p : captured) {
      const std::size_t w = p->value.shape()[1];
      if (p->requires_grad) {
        auto& gp = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < w; ++j) gp.at(i, j) += self.grad.at(i, offset + j);
        }
      }
      offset += w;
    }
  });
}

Var outer_add(const Var& f, const Var& g) {
  require_rank("outer_add", f, 2);
  require_rank("outer_add", g, 2);
  if (f.shape()[0] != g.shape()[0]) shape_fail("outer_add", f.shape(), g.shape());
  const std::size_t r = f.shape()[0], p = f.shape()[1], q = g.shape()[1];
  Array out({r, p, q});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < q; ++k) out.at(i, j, k) = f.value().at(i, j) + g.value().at(i, k);
    }
  }
  auto pf = f.ptr(), pg = g.ptr();
  return make_result(std::move(out), {pf, pg}, [pf, pg, r, p, q](Node& self) {
    if (pf->requires_grad) {
      auto& gf = pf->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
          for (std::size_t k = 0; k < q; ++k) gf.at(i, j) += self.grad.at(i, j, k);
        }
      }
    }
    if (pg->requires_grad) {
      auto& gg = pg->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
          for (std::size_t k = 0; k < q; ++k) gg.at(i, k) += self.grad.at(i, j, k);
        }
      }
    }
  });
}

double bce(double y, double y_hat) {
  const double s = std::clamp(y_hat, kBceEps, 1.0 - kBceEps);
  return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

Var masked_bce(const Var& scores, const Array& target, const Array& valid) {
  if (target.shape() != scores.shape()) shape_fail("masked_bce", scores.shape(), target.shape());
  if (valid.shape() != scores.shape()) shape_fail("masked_bce", scores.shape(), valid.shape());
  double total = 0.0;
  const auto& s = scores.value().raw();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (valid[i] != 0.0) total += bce(target[i], s[i]);
  }
  auto ps = scores.ptr();
  return make_result(Array::scalar(total), {ps}, [ps, target, valid](Node& self) {
    auto& gs = ps->ensure_grad().raw();
    const auto& s = ps->value.raw();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (valid[i] == 0.0) continue;
      // The clamped loss is flat outside [eps, 1 - eps].
      const double c = s[i];
      if (c < kBceEps || c > 1.0 - kBceEps) continue;
      gs[i] += g * (-(target[i] / c) + (1.0 - target[i]) / (1.0 - c));
    }
  });
}

Var masked_bce_logits(const Var& logits, const Array& target, const Array& valid) {
  if (target.shape() != logits.shape()) shape_fail("masked_bce_logits", logits.shape(), target.shape());
  if (valid.shape() != logits.shape()) shape_fail("masked_bce_logits", logits.shape(), valid.shape());
  static const double bound = std::log((1.0 - kBceEps) / kBceEps);
  auto softplus = [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); };
  double total = 0.0;
  const auto& z = logits.value().raw();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (valid[i] == 0.0) continue;
    const double zc = std::clamp(z[i], -bound, bound);
    total += target[i] * softplus(-zc) + (1.0 - target[i]) * softplus(zc);
  }
  auto pl = logits.ptr();
  return make_result(Array::scalar(total), {pl}, [pl, target, valid](Node& self) {
    auto& gz = pl->ensure_grad().raw();
    const auto& z = pl->value.raw();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (valid[i] == 0.0 || std::abs(z[i]) > bound) continue;
      gz[i] += g * (stable_sigmoid(z[i]) - target[i]);
    }
  });
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Intermediate gradients are not needed after the sweep.
  for (Node* node : order) {
    if (node->backward_fn) node->grad = Array();
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Var()>& build_loss,
                           std::span<const Var> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  for (auto p : params) p.zero_grad();
  Var loss = build_loss();
  if (!loss.value().all_finite()) throw std::runtime_error("grad_check: loss is not finite");
  backward(loss);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Var p = params[pi];
    Array analytic = p.grad().empty() ? Array(p.shape(), 0.0) : p.grad();
    auto& values = p.mutable_value().raw();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = build_loss().value()[0];
      values[i] = saved - h;
      const double down = build_loss().value()[0];
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("grad_check: loss is not finite under perturbation");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++result.checked;
      if (err > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

namespace testing {
void set_fault(Fault fault) { g_fault = fault; }
Fault fault() { return g_fault; }
}  // namespace testing

}  // namespace uniex::nd
