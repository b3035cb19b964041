#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace proxdiv {

/// A two-component mixture parameter (lambda, theta1, theta2). lambda is
/// the weight of the first component; theta holds the per-component unknowns
/// (means for the Gaussian mixture, shapes for the Weibull mixture).
class ParamVector {
 public:
  static constexpr std::size_t kSize = 3;

  constexpr ParamVector() = default;
  constexpr ParamVector(double lambda, double theta1, double theta2)
      : v_{lambda, theta1, theta2} {}
  explicit ParamVector(std::span<const double> values) {
    std::copy_n(values.begin(), kSize, v_.begin());
  }

  constexpr double lambda() const noexcept { return v_[0]; }
  constexpr double theta(std::size_t component) const noexcept { return v_[1 + component]; }
  constexpr double& operator[](std::size_t i) noexcept { return v_[i]; }
  constexpr double operator[](std::size_t i) const noexcept { return v_[i]; }

  std::span<const double> values() const noexcept { return v_; }
  std::span<double> values() noexcept { return v_; }
  const std::array<double, kSize>& array() const noexcept { return v_; }

  friend constexpr bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::array<double, kSize> v_{0.5, 0.0, 0.0};
};

/// Euclidean distance on (lambda, theta) without rescaling.
inline double distance(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < ParamVector::kSize; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double max_abs_difference(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < ParamVector::kSize; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Axis-aligned box used to project optimizer proposals.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }

  void project(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    }
    return true;
  }

  /// An unbounded box of the given dimension.
  static Box unbounded(std::size_t dim) {
    return Box{std::vector<double>(dim, -HUGE_VAL), std::vector<double>(dim, HUGE_VAL)};
  }
};

/// Where the observations came from.
enum class Provenance { Model, Contaminated, External };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Model: return "model";
    case Provenance::Contaminated: return "contaminated";
    case Provenance::External: return "external";
  }
  return "unknown";
}

/// Ordered univariate observations.
struct Sample {
  std::vector<double> values;
  Provenance provenance = Provenance::External;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  double operator[](std::size_t i) const noexcept { return values[i]; }
};

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

/// Type-7 (linear interpolation) quantile of unsorted data.
inline double quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace proxdiv
