#pragma once

#include <cmath>
#include <map>
#include <string>

#include "susd/mat.hpp"

namespace susd::testutil {

// allclose-style gradient comparison: relative error with an absolute floor
// so exactly-zero gradients compare cleanly.
inline bool close(double a, double b, double rtol, double atol) {
  return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

// Central finite differences of `loss` (a nullary callable returning double
// that reads the parameters through the pointers in `params`).
template <typename S, typename F>
std::map<std::string, Mat<double>> finite_diff_grads(
    const std::map<std::string, Mat<S>*>& params, F loss, double h = 1e-5) {
  std::map<std::string, Mat<double>> out;
  for (const auto& [name, p] : params) {
    Mat<double> g(p->rows, p->cols);
    for (size_t i = 0; i < p->v.size(); ++i) {
      const S saved = p->v[i];
      p->v[i] = static_cast<S>(static_cast<double>(saved) + h);
      const double fp = loss();
      p->v[i] = static_cast<S>(static_cast<double>(saved) - h);
      const double fm = loss();
      p->v[i] = saved;
      g.v[i] = (fp - fm) / (2.0 * h);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

// Max elementwise mismatch between an AD gradient map and an FD gradient map,
// measured as |a-b| / max(|a|,|b|,floor).
template <typename S>
double max_grad_mismatch(const std::map<std::string, Mat<S>>& ad,
                         const std::map<std::string, Mat<double>>& fd,
                         double floor = 1e-3) {
  double worst = 0.0;
  for (const auto& [name, g] : ad) {
    const auto& f = fd.at(name);
    for (size_t i = 0; i < g.v.size(); ++i) {
      const double a = static_cast<double>(g.v[i]);
      const double b = f.v[i];
      const double err = std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace susd::testutil
