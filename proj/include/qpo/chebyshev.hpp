#pragma once

// Chebyshev series on an interval [a, b]: fit from values at Chebyshev-Lobatto
// points, Clenshaw evaluation, term-wise antiderivative.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace qpo::cheb {

// Lobatto points x_j = mid + half*cos(pi j / n), j = 0..n (descending).
inline std::vector<double> lobatto_points(double a, double b, std::size_t n) {
  std::vector<double> x(n + 1);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t j = 0; j <= n; ++j) x[j] = mid + half * std::cos(std::numbers::pi * double(j) / double(n));
  x[0] = b;
  x[n] = a;
  return x;
}

// Coefficients of f = sum_k c_k T_k from values at lobatto_points (DCT-I).
inline std::vector<double> fit_lobatto(const std::vector<double>& f) {
  const std::size_t n = f.size() - 1;
  std::vector<double> c(n + 1, 0.0);
  for (std::size_t k = 0; k <= n; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      const double w = (j == 0 || j == n) ? 0.5 : 1.0;
      s += w * f[j] * std::cos(std::numbers::pi * double(j * k % (2 * n)) / double(n));
    }
    c[k] = s * ((k == 0 || k == n) ? 1.0 / double(n) : 2.0 / double(n));
  }
  return c;
}

// Clenshaw sum of c[0..m) at reduced coordinate u in [-1, 1].
inline double clenshaw(const double* c, std::size_t m, double u) {
  double b1 = 0.0, b2 = 0.0;
  const double u2 = 2.0 * u;
  for (std::size_t k = m; k-- > 1;) {
    const double b0 = c[k] + u2 * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c[0] + u * b1 - b2;
}

// Coefficients of the antiderivative vanishing at u = -1, for an interval
// of half-width `half`. Result has one more coefficient than the input.
inline std::vector<double> integrate(const std::vector<double>& c, double half) {
  const std::size_t n = c.size();
  std::vector<double> ext(c);
  ext.resize(n + 2, 0.0);
  std::vector<double> C(n + 1, 0.0);
  C[1] = ext[0] - 0.5 * ext[2];
  for (std::size_t k = 2; k <= n; ++k) C[k] = (ext[k - 1] - ext[k + 1]) / (2.0 * double(k));
  double at_minus1 = 0.0;
  for (std::size_t k = 1; k <= n; ++k) at_minus1 += (k % 2 ? -1.0 : 1.0) * C[k];
  C[0] = -at_minus1;
  for (double& v : C) v *= half;
  return C;
}

}  // namespace qpo::cheb
