#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "proxdiv/errors.hpp"
#include "proxdiv/param.hpp"

namespace proxdiv {

struct NelderMeadConfig {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  /// Stop when the simplex diameter (max-norm distance to the best vertex)
  /// drops below x_tol, or the spread of vertex values below f_tol.
  double x_tol = 1e-8;
  double f_tol = 1e-10;
  std::size_t max_iter = 2000;
  /// Initial simplex step per coordinate: max(min_step, rel_step |x_i|).
  double min_step = 0.1;
  double rel_step = 0.1;

  void validate() const {
    if (!(reflection > 0.0) || !(expansion > 1.0) || !(expansion > reflection) ||
        !(contraction > 0.0 && contraction < 1.0) || !(shrink > 0.0 && shrink < 1.0)) {
      throw InvalidArgument("Nelder-Mead coefficients out of range");
    }
    if (!(x_tol > 0.0) || !(f_tol > 0.0)) throw InvalidArgument("Nelder-Mead tolerances must be > 0");
    if (max_iter == 0) throw InvalidArgument("Nelder-Mead max_iter must be >= 1");
  }
};

struct MinimizeResult {
  std::vector<double> argmin;
  double f_min = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Nelder-Mead simplex minimization. Every proposal is projected onto the
/// box before f is evaluated, so the returned point always lies inside it.
/// Non-finite values at trial points are treated as +inf; the start must
/// evaluate to a finite value.
template <class F>
MinimizeResult minimize(F&& f, std::span<const double> start, const Box& box,
                        const NelderMeadConfig& config = {}) {
  config.validate();
  const std::size_t n = start.size();
  if (box.size() != n) throw InvalidArgument("box dimension does not match the start point");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  MinimizeResult result;
  auto eval = [&](std::vector<double>& x) {
    box.project(x);
    ++result.evaluations;
    const double v = f(std::span<const double>(x));
    return std::isfinite(v) ? v : kInf;
  };

  std::vector<std::vector<double>> xs(n + 1, std::vector<double>(start.begin(), start.end()));
  std::vector<double> fs(n + 1);
  fs[0] = eval(xs[0]);
  if (!std::isfinite(fs[0])) throw OptimizerError("objective is not finite at the start point");
  for (std::size_t i = 0; i < n; ++i) {
    auto& x = xs[i + 1];
    const double step = std::max(config.min_step, config.rel_step * std::abs(x[i]));
    // Step inward when the upper side of the box is too close.
    x[i] = x[i] + step <= box.upper[i] ? x[i] + step : x[i] - step;
    fs[i + 1] = eval(x);
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<std::vector<double>> xs2(n + 1);
    std::vector<double> fs2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      xs2[i] = std::move(xs[order[i]]);
      fs2[i] = fs[order[i]];
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };
  auto converged = [&] {
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(xs[i][j] - xs[0][j]));
    }
    return diameter < config.x_tol || (std::isfinite(fs[n]) && fs[n] - fs[0] < config.f_tol);
  };

  sort_simplex();
  while (!(result.converged = converged()) && result.iterations < config.max_iter) {
    ++result.iterations;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j] / static_cast<double>(n);
    }
    const auto& worst = xs[n];
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + config.reflection * (centroid[j] - worst[j]);
    const double fr = eval(xr);

    if (fr < fs[0]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + config.expansion * (xr[j] - centroid[j]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const bool outside = fr < fs[n];
      const auto& base = outside ? xr : worst;
      for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + config.contraction * (base[j] - centroid[j]);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) xs[i][j] = xs[0][j] + config.shrink * (xs[i][j] - xs[0][j]);
          fs[i] = eval(xs[i]);
        }
      }
    }
    sort_simplex();
  }
  result.argmin = xs[0];
  result.f_min = fs[0];
  return result;
}

/// Convenience overload for mixture parameters.
template <class F>
MinimizeResult minimize(F&& f, const ParamVector& start, const Box& box, const NelderMeadConfig& config = {}) {
  return minimize(
      [&](std::span<const double> x) { return f(ParamVector(x)); }, start.values(), box, config);
}

}  // namespace proxdiv
