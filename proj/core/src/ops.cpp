#include "stepamc/numerics/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stepamc/errors.hpp"

namespace stepamc::num {
namespace {

std::string dims(Var v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + dims(a) + " and " + dims(b) +
                         " differ");
  }
}

void require_finite(const char* op, Var x) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw ContractError(std::string(op) + ": non-finite input");
  }
}

template <class Fn>
Var unary(Var a, Fn&& fn, Tape::Backprop bp) {
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  std::array<Var, 1> inputs{a};
  return a.tape().record(a.rows(), a.cols(), std::move(out), inputs, std::move(bp));
}

// Adjoint of y = f(x) where dy/dx is a function of (x, y).
template <class Deriv>
Tape::Backprop pointwise_backprop(std::uint32_t in_id, Deriv deriv) {
  return [in_id, deriv](Tape& t, std::uint32_t out) {
    auto gin = t.grad_accumulator(in_id);
    if (gin.empty()) return;
    auto g = t.grad(out);
    auto x = t.value(in_id);
    auto y = t.value(out);
    for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i] * deriv(x[i], y[i]);
  };
}

constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  std::array<Var, 2> in{a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.rows(), a.cols(), std::move(out), in, [ia, ib](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    for (auto id : {ia, ib}) {
      auto gi = t.grad_accumulator(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  std::array<Var, 2> in{a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.rows(), a.cols(), std::move(out), in, [ia, ib](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  std::array<Var, 2> in{a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.rows(), a.cols(), std::move(out), in, [ia, ib](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto x = t.value(ia);
    auto y = t.value(ib);
    auto ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
    auto gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * x[i];
  });
}

namespace {

Var select_pointwise(const char* op, Var a, Var b, bool take_min) {
  require_same_shape(op, a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = take_min ? (av[i] <= bv[i] ? av[i] : bv[i]) : (av[i] >= bv[i] ? av[i] : bv[i]);
  }
  std::array<Var, 2> in{a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.rows(), a.cols(), std::move(out), in,
                         [ia, ib, take_min](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto x = t.value(ia);
    auto y = t.value(ib);
    auto ga = t.grad_accumulator(ia);
    auto gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool pick_a = take_min ? x[i] <= y[i] : x[i] >= y[i];
      if (pick_a) {
        if (!ga.empty()) ga[i] += g[i];
      } else if (!gb.empty()) {
        gb[i] += g[i];
      }
    }
  });
}

}  // namespace

Var minimum(Var a, Var b) { return select_pointwise("minimum", a, b, true); }
Var maximum(Var a, Var b) { return select_pointwise("maximum", a, b, false); }

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: cannot add " + dims(row) + " to rows of " + dims(a));
  }
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.values(), rv = row.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + rv[j];
  }
  std::array<Var, 2> in{a, row};
  const auto ia = a.id(), ir = row.id();
  return a.tape().record(m, n, std::move(out), in, [ia, ir, m, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gr = t.grad_accumulator(ir);
    if (gr.empty()) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; },
               pointwise_backprop(a.id(), [s](double, double) { return s; }));
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; },
               pointwise_backprop(a.id(), [](double, double) { return 1.0; }));
}

Var mul_scalar(Var a, Var s) {
  if (s.size() != 1) throw DimensionError("mul_scalar: factor is " + dims(s) + ", expected 1x1");
  const double k = s.item();
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * av[i];
  std::array<Var, 2> in{a, s};
  const auto ia = a.id(), is = s.id();
  return a.tape().record(a.rows(), a.cols(), std::move(out), in, [ia, is](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto x = t.value(ia);
    const double k = t.value(is)[0];
    auto ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * k;
    auto gs = t.grad_accumulator(is);
    if (gs.empty()) return;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
    gs[0] += acc;
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions of " + dims(a) + " and " + dims(b) +
                         " disagree");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto av = a.values(), bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += x * brow[j];
    }
  }
  std::array<Var, 2> in{a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(m, n, std::move(out), in, [ia, ib, m, k, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto x = t.value(ia);
    auto y = t.value(ib);
    auto ga = t.grad_accumulator(ia);
    if (!ga.empty()) {
      // ga += g * y^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* yrow = y.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * yrow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    auto gb = t.grad_accumulator(ib);
    if (!gb.empty()) {
      // gb += x^T * g
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          if (xv == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += xv * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  std::array<Var, 1> in{a};
  const auto ia = a.id();
  return a.tape().record(n, m, std::move(out), in, [ia, m, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    }
  });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); },
               pointwise_backprop(a.id(), [](double, double y) { return y; }));
}

Var log(Var a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw ContractError("log: input must be positive");
  }
  return unary(a, [](double x) { return std::log(x); },
               pointwise_backprop(a.id(), [](double x, double) { return 1.0 / x; }));
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; },
               pointwise_backprop(a.id(), [](double x, double) { return 2.0 * x; }));
}

Var sigmoid(Var a) {
  return unary(a, [](double x) { return sigmoid(x); },
               pointwise_backprop(a.id(), [](double, double y) { return y * (1.0 - y); }));
}

Var log_sigmoid(Var a) {
  return unary(a, [](double x) { return log_sigmoid(x); },
               pointwise_backprop(a.id(), [](double x, double) { return sigmoid(-x); }));
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               pointwise_backprop(a.id(), [](double, double y) { return 1.0 - y * y; }));
}

Var gelu(Var a) {
  const double k = kGeluK;
  return unary(
      a,
      [k](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + kGeluC * x * x * x))); },
      pointwise_backprop(a.id(), [k](double x, double) {
        const double th = std::tanh(k * (x + kGeluC * x * x * x));
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * k * (1.0 + 3.0 * kGeluC * x * x);
      }));
}

Var clamp(Var x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               pointwise_backprop(x.id(), [lo, hi](double v, double) {
                 return (v >= lo && v <= hi) ? 1.0 : 0.0;
               }));
}

Var clamp(Var x, std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != x.size() || hi.size() != x.size()) {
    throw DimensionError("clamp: bounds of length " + std::to_string(lo.size()) + "/" +
                         std::to_string(hi.size()) + " for " + dims(x));
  }
  std::vector<double> los(lo.begin(), lo.end()), his(hi.begin(), hi.end());
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (los[i] > his[i]) throw ContractError("clamp: lo > hi at element " + std::to_string(i));
    out[i] = std::clamp(xv[i], los[i], his[i]);
  }
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(x.rows(), x.cols(), std::move(out), in,
                         [ix, los = std::move(los), his = std::move(his)](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto v = t.value(ix);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (v[i] >= los[i] && v[i] <= his[i]) gx[i] += g[i];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  std::array<Var, 1> in{a};
  const auto ia = a.id();
  return a.tape().record(1, 1, {s}, in, [ia](Tape& t, std::uint32_t o) {
    const double g = t.grad(o)[0];
    for (double& gi : t.grad_accumulator(ia)) gi += g;
  });
}

Var mean(Var a) {
  if (a.size() == 0) throw ContractError("mean of an empty value");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var softmax_rows(Var x, bool causal) {
  require_finite("softmax_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (causal && m > n) throw DimensionError("softmax_rows: causal mask needs rows <= cols");
  auto xv = x.values();
  std::vector<double> out(xv.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t width = causal ? i + 1 : n;
    const double* row = xv.data() + i * n;
    double* dst = out.data() + i * n;
    const double mx = *std::max_element(row, row + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += (dst[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < width; ++j) dst[j] /= z;
  }
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(m, n, std::move(out), in, [ix, m, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto s = t.value(o);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * s[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += s[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var log_softmax_rows(Var x) {
  require_finite("log_softmax_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(m, n, std::move(out), in, [ix, m, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto y = t.value(o);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < m; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        gx[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gsum;
      }
    }
  });
}

Var gather_rows(Var x, std::span<const int> index) {
  const std::size_t m = x.rows(), n = x.cols();
  if (index.size() != m) {
    throw DimensionError("gather_rows: " + std::to_string(index.size()) + " indices for " +
                         dims(x));
  }
  std::vector<int> idx(index.begin(), index.end());
  std::vector<double> out(m);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of " +
                           std::to_string(n) + " columns");
    }
    out[i] = xv[i * n + static_cast<std::size_t>(idx[i])];
  }
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(m, 1, std::move(out), in, [ix, n, idx = std::move(idx)](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * n + static_cast<std::size_t>(idx[i])] += g[i];
  });
}

Var element(Var x, std::size_t r, std::size_t c) {
  if (r >= x.rows() || c >= x.cols()) {
    throw DimensionError("element (" + std::to_string(r) + "," + std::to_string(c) +
                         ") outside " + dims(x));
  }
  const std::size_t n = x.cols();
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(1, 1, {x.at(r, c)}, in, [ix, r, c, n](Tape& t, std::uint32_t o) {
    auto gx = t.grad_accumulator(ix);
    gx[r * n + c] += t.grad(o)[0];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + dims(x));
  }
  const std::size_t n = x.cols();
  auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * n));
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(end - begin, n, std::move(out), in, [ix, begin, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + dims(x));
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  auto xv = x.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(xv.data() + i * n + begin, w, out.data() + i * w);
  }
  std::array<Var, 1> in{x};
  const auto ix = x.id();
  return x.tape().record(m, w, std::move(out), in, [ix, m, n, w, begin](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += g[i * w + j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<double> out;
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) {
    if (p.cols() != n) throw DimensionError("concat_rows: " + dims(p) + " vs width " + std::to_string(n));
    m += p.rows();
    auto v = p.values();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id());
  }
  return parts[0].tape().record(m, n, std::move(out), parts, [ids = std::move(ids)](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t len = t.value(id).size();
      auto gi = t.grad_accumulator(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offset + i];
      offset += len;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    if (p.rows() != m) throw DimensionError("concat_cols: " + dims(p) + " vs height " + std::to_string(m));
    n += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (const Var& p : parts) {
    auto v = p.values();
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(v.data() + i * w, w, out.data() + i * n + col);
    col += w;
  }
  return parts[0].tape().record(m, n, std::move(out), parts,
                                [ids = std::move(ids), widths = std::move(widths), m, n](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    std::size_t col = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      auto gi = t.grad_accumulator(ids[k]);
      if (!gi.empty()) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < w; ++j) gi[i * w + j] += g[i * n + col + j];
        }
      }
      col += w;
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  auto tv = table.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw DimensionError("embedding: id " + std::to_string(idx[i]) + " outside table of " +
                           std::to_string(v) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idx[i]) * d, d, out.data() + i * d);
  }
  std::array<Var, 1> in{table};
  const auto it = table.id();
  const std::size_t rows = idx.size();
  return table.tape().record(rows, d, std::move(out), in, [it, d, idx = std::move(idx)](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto gt = t.grad_accumulator(it);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = gt.data() + static_cast<std::size_t>(idx[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw DimensionError("layer_norm: gain " + dims(gamma) + " / bias " + dims(beta) +
                         " for rows of width " + std::to_string(n));
  }
  auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  std::array<Var, 3> in{x, gamma, beta};
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(m, n, std::move(out), in,
                         [ix, ig, ib, m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, std::uint32_t o) {
    auto g = t.grad(o);
    auto gv = t.value(ig);
    auto gg = t.grad_accumulator(ig);
    auto gb = t.grad_accumulator(ib);
    auto gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < m; ++i) {
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double gij = g[i * n + j];
        if (!gg.empty()) gg[j] += gij * xhat[i * n + j];
        if (!gb.empty()) gb[j] += gij;
        const double d = gij * gv[j];
        mean_d += d;
        mean_dx += d * xhat[i * n + j];
      }
      if (gx.empty()) continue;
      mean_d /= static_cast<double>(n);
      mean_dx /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double d = g[i * n + j] * gv[j];
        gx[i * n + j] += rstd[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
      }
    }
  });
}

}  // namespace stepamc::num
