#include "bdtf/pchip.hpp"

#include <cassert>
#include <cmath>

#include "bdtf/error.hpp"

namespace bdtf {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Endpoint tangent via the non-centered three-point formula, clamped to keep shape.
double edge_tangent(double h0, double h1, double del0, double del1) {
  double d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
  if (sign(d) != sign(del0))
    d = 0.0;
  else if (sign(del0) != sign(del1) && std::abs(d) > 3.0 * std::abs(del0))
    d = 3.0 * del0;
  return d;
}

}  // namespace

Pchip::Pchip(const std::vector<double>& x, const std::vector<double>& y) : x_(x), y_(y) {
  const size_t n = x.size();
  if (n < 2) throw Error("CannotSmooth", "PCHIP needs at least two anchor points");
  for (size_t i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1])) throw Error("CannotSmooth", "PCHIP knots must be strictly increasing");

  std::vector<double> h(n - 1), del(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    del[i] = (y[i + 1] - y[i]) / h[i];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = del[0];
    return;
  }
  for (size_t i = 1; i + 1 < n; ++i) {
    if (del[i - 1] == 0.0 || del[i] == 0.0 || sign(del[i - 1]) != sign(del[i])) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
    }
  }
  d_[0] = edge_tangent(h[0], h[1], del[0], del[1]);
  d_[n - 1] = edge_tangent(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

double Pchip::operator()(double x) const {
  const size_t n = x_.size();
  size_t i = 0;
  if (x <= x_[0]) {
    i = 0;
  } else if (x >= x_[n - 1]) {
    i = n - 2;
  } else {
    size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      const size_t mid = (lo + hi) / 2;
      if (x_[mid] <= x)
        lo = mid;
      else
        hi = mid;
    }
    i = lo;
  }
  const double hseg = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / hseg;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * y_[i] + h10 * hseg * d_[i] + h01 * y_[i + 1] + h11 * hseg * d_[i + 1];
}

}  // namespace bdtf
