#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "proxdiv/errors.hpp"
#include "proxdiv/models.hpp"
#include "proxdiv/param.hpp"

namespace proxdiv {

/// Silverman's rule of thumb 0.9 min(sd, IQR/1.34) n^(-1/5). When the IQR
/// is zero but the sample still has spread, the standard deviation is used.
inline double silverman_bandwidth(const Sample& s) {
  if (s.size() < 2) throw InvalidArgument("Silverman bandwidth needs at least 2 observations");
  const double sd = stddev(s.values);
  if (!(sd > 0.0)) throw InvalidArgument("Silverman bandwidth: sample has zero spread");
  const double iqr = quantile(s.values, 0.75) - quantile(s.values, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
}

/// Window condition gamma (w^2 - 1) > -1 under which the kernel dual
/// estimator with a Gaussian kernel stays finite for Cressie-Read gamma.
inline bool check_window_condition(double gamma, double w) { return gamma * (w * w - 1.0) > -1.0; }

/// Gaussian-kernel Rosenblatt-Parzen density estimate.
class KernelDensity {
 public:
  /// Bandwidth defaults to Silverman's rule.
  explicit KernelDensity(Sample sample, std::optional<double> bandwidth = std::nullopt)
      : sample_(std::move(sample)) {
    if (sample_.empty()) throw InvalidArgument("kernel density needs a non-empty sample");
    w_ = bandwidth ? *bandwidth : silverman_bandwidth(sample_);
    if (!(w_ > 0.0) || !std::isfinite(w_)) throw InvalidArgument("bandwidth must be positive");
    sorted_ = sample_.values;
    std::sort(sorted_.begin(), sorted_.end());
    log_norm_ = -std::log(static_cast<double>(sorted_.size()) * w_) - kLogSqrt2Pi;
  }

  double bandwidth() const noexcept { return w_; }
  const Sample& sample() const noexcept { return sample_; }
  double support_lo() const noexcept { return sorted_.front(); }
  double support_hi() const noexcept { return sorted_.back(); }

  /// log K(y), computed as a log-sum-exp so that far tails stay finite.
  double log_eval(double y) const {
    // The nearest observation gives the largest exponent.
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), y);
    double nearest = it == sorted_.end() ? sorted_.back() : *it;
    if (it != sorted_.begin() && std::abs(y - *std::prev(it)) < std::abs(y - nearest)) nearest = *std::prev(it);
    const double m = -0.5 * sq((y - nearest) / w_);
    double s = 0.0;
    for (double x : sorted_) s += std::exp(-0.5 * sq((y - x) / w_) - m);
    return log_norm_ + m + std::log(s);
  }

  double operator()(double y) const { return std::exp(log_eval(y)); }

 private:
  static double sq(double x) { return x * x; }
  static constexpr double kLogSqrt2Pi = 0.91893853320467274178;

  Sample sample_;
  std::vector<double> sorted_;
  double w_ = 0.0;
  double log_norm_ = 0.0;
};

inline double kde_eval(const KernelDensity& kd, double y) { return kd(y); }

}  // namespace proxdiv
