#pragma once

// Independent reference evaluations used by unit and acceptance tests.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stepamc/eval.hpp"

namespace oracle {

// A_t = sum_k (gamma lambda)^k delta_{t+k}, evaluated as a double sum.
inline std::vector<double> gae(std::span<const double> r, std::span<const double> v, double gamma,
                               double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) delta[t] = r[t] + gamma * (t + 1 < n ? v[t + 1] : 0.0) - v[t];
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; t + k < n; ++k) adv[t] += std::pow(gamma * lambda, double(k)) * delta[t + k];
  }
  return adv;
}

inline std::vector<double> returns(std::span<const double> r, double gamma) {
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    for (std::size_t u = t; u < r.size(); ++u) out[t] += std::pow(gamma, double(u - t)) * r[u];
  }
  return out;
}

struct Tally {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, invalid = 0;
};

// Invalid responses count against their gold class.
inline Tally tally(std::span<const stepamc::eval::Prediction> pred, std::span<const stepamc::text::Label> gold) {
  using stepamc::eval::Prediction;
  using stepamc::text::Label;
  Tally t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pos = gold[i] == Label::correct;
    if (pred[i] == Prediction::invalid) {
      ++t.invalid;
      if (pos) ++t.fn; else ++t.fp;
    } else if (pred[i] == Prediction::correct) {
      if (pos) ++t.tp; else ++t.fp;
    } else {
      if (pos) ++t.fn; else ++t.tn;
    }
  }
  return t;
}

struct Metrics {
  double f1, acc, acc_pos, acc_neg;
};

inline Metrics metrics(const Tally& t) {
  auto div = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  const double p = div(t.tp, t.tp + t.fp), r = div(t.tp, t.tp + t.fn);
  return {div(2 * p * r, p + r), div(t.tp + t.tn, t.tp + t.tn + t.fp + t.fn), r, div(t.tn, t.tn + t.fp)};
}

}  // namespace oracle
