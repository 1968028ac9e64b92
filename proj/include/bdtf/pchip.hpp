#pragma once

#include <vector>

namespace bdtf {

// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson tangents, standard
// three-point endpoint rule with clamping). Knots must be strictly increasing.
class Pchip {
 public:
  Pchip(const std::vector<double>& x, const std::vector<double>& y);
  double operator()(double x) const;

 private:
  std::vector<double> x_, y_, d_;  // knots, values, tangents
};

}  // namespace bdtf
