#include "stepamc/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace stepamc::num {
namespace {

double evaluate(const LossFn& loss) {
  Tape tape;
  return loss(tape).item();
}

}  // namespace

GradCheckReport finite_diff_check(const LossFn& loss, std::span<Tensor* const> params,
                                  double h, double tol, double abs_floor) {
  for (Tensor* p : params) p->clear_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) {
    if (p->has_grad()) {
      analytic.emplace_back(p->grad().begin(), p->grad().end());
    } else {
      analytic.emplace_back(p->size(), 0.0);
    }
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k]->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate(loss);
      values[i] = saved - h;
      const double down = evaluate(loss);
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max(std::abs(a), std::abs(numeric));
      const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
      ++report.coordinates;
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      // Relative error is meaningless when both sides are round-off.
      if (abs_err > abs_floor && rel_err > report.max_rel_err) {
        report.max_rel_err = rel_err;
        report.worst = std::to_string(k) + "[" + std::to_string(i) + "]";
      }
      if (rel_err > tol && abs_err > abs_floor) ++report.failures;
    }
  }
  report.pass = report.failures == 0;
  return report;
}

}  // namespace stepamc::num
