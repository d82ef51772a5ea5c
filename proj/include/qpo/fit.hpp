#pragma once

// Ordinary least-squares line fits for log-log scaling measurements.

#include <cmath>
#include <limits>
#include <vector>

#include "qpo/error.hpp"

namespace qpo {

struct LineFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_se = std::numeric_limits<double>::quiet_NaN();  // standard error of the slope
  std::size_t n = 0;
  bool valid() const { return std::isfinite(slope); }
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("fit_line: size mismatch");
  LineFit f;
  f.n = x.size();
  if (f.n < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(f.n);
  my /= double(f.n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (f.n > 2) {
    double ss = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      ss += r * r;
    }
    f.slope_se = std::sqrt(ss / double(f.n - 2) / sxx);
  } else {
    f.slope_se = 0.0;
  }
  return f;
}

// Fit log(y) against log(x); points with y <= 0 are dropped.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  return fit_line(lx, ly);
}

}  // namespace qpo
