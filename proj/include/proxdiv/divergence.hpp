#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <string_view>

#include "proxdiv/errors.hpp"

namespace proxdiv {

/// Smallest generator argument accepted; anything below raises a DomainError
/// instead of producing an infinity.
inline constexpr double kMinGeneratorArg = 1e-300;

namespace detail {

inline void check_generator_arg(double t) {
  if (!(t >= kMinGeneratorArg) || !std::isfinite(t)) {
    throw DomainError("divergence generator evaluated at t=" + std::to_string(t) +
                      " (must be finite and >= 1e-300)");
  }
}

inline void check_gamma(double gamma) {
  if (gamma == 0.0 || gamma == 1.0 || !std::isfinite(gamma)) {
    throw DomainError("Cressie-Read index gamma must be finite and not in {0, 1}; "
                      "use the named 'mkl' or 'kl' generators instead");
  }
}

}  // namespace detail

/// Cressie-Read generator (t^g - g t + g - 1) / (g (g - 1)).
inline double cressie_read(double gamma, double t) {
  detail::check_gamma(gamma);
  detail::check_generator_arg(t);
  return (std::pow(t, gamma) - gamma * t + gamma - 1.0) / (gamma * (gamma - 1.0));
}

/// Hellinger proximal generator 0.5 (sqrt(t) - 1)^2.
inline double psi_hellinger(double t) {
  detail::check_generator_arg(t);
  const double r = std::sqrt(t) - 1.0;
  return 0.5 * r * r;
}

inline double psi_hellinger_derivative(double t) {
  detail::check_generator_arg(t);
  return 0.5 * (1.0 - 1.0 / std::sqrt(t));
}

/// A convex generator phi with phi(1) = phi'(1) = 0, together with phi' and
/// the conjugate-type transform phi#(t) = t phi'(t) - phi(t).
class DivergenceSpec {
 public:
  enum class Kind { CressieRead, ModifiedKL, KL, Hellinger };

  static DivergenceSpec cressie_read(double gamma) {
    detail::check_gamma(gamma);
    return DivergenceSpec(Kind::CressieRead, gamma);
  }
  static DivergenceSpec modified_kl() { return DivergenceSpec(Kind::ModifiedKL, 0.0); }
  static DivergenceSpec kl() { return DivergenceSpec(Kind::KL, 1.0); }
  static DivergenceSpec hellinger() { return DivergenceSpec(Kind::Hellinger, 0.5); }

  /// Accepts "kl", "mkl", "hellinger" and "cressie-read:<gamma>".
  static DivergenceSpec parse(std::string_view name) {
    if (name == "kl") return kl();
    if (name == "mkl" || name == "modified-kl") return modified_kl();
    if (name == "hellinger") return hellinger();
    constexpr std::string_view prefix = "cressie-read:";
    if (name.substr(0, prefix.size()) == prefix) {
      const std::string rest(name.substr(prefix.size()));
      std::size_t used = 0;
      double gamma = 0.0;
      try {
        gamma = std::stod(rest, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != rest.size()) {
        throw InvalidArgument("cannot parse Cressie-Read index in '" + std::string(name) + "'");
      }
      return cressie_read(gamma);
    }
    throw InvalidArgument("unknown divergence '" + std::string(name) + "'");
  }

  Kind kind() const noexcept { return kind_; }

  /// Cressie-Read index of the family member; 0 for MKL, 1 for KL and 0.5
  /// for the Hellinger generator (which is the gamma=0.5 member scaled by 1/4).
  double gamma() const noexcept { return gamma_; }

  std::string name() const {
    switch (kind_) {
      case Kind::ModifiedKL: return "mkl";
      case Kind::KL: return "kl";
      case Kind::Hellinger: return "hellinger";
      case Kind::CressieRead: break;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "cressie-read:%g", gamma_);
    return buf;
  }

  double phi(double t) const {
    detail::check_generator_arg(t);
    switch (kind_) {
      case Kind::CressieRead:
        return (std::pow(t, gamma_) - gamma_ * t + gamma_ - 1.0) / (gamma_ * (gamma_ - 1.0));
      case Kind::ModifiedKL: return -std::log(t) + t - 1.0;
      case Kind::KL: return t * std::log(t) - t + 1.0;
      case Kind::Hellinger: {
        const double r = std::sqrt(t) - 1.0;
        return 0.5 * r * r;
      }
    }
    return 0.0;
  }

  double derivative(double t) const {
    detail::check_generator_arg(t);
    switch (kind_) {
      case Kind::CressieRead: return (std::pow(t, gamma_ - 1.0) - 1.0) / (gamma_ - 1.0);
      case Kind::ModifiedKL: return 1.0 - 1.0 / t;
      case Kind::KL: return std::log(t);
      case Kind::Hellinger: return 0.5 * (1.0 - 1.0 / std::sqrt(t));
    }
    return 0.0;
  }

  /// t phi'(t) - phi(t), in closed form per generator.
  double phi_sharp(double t) const {
    detail::check_generator_arg(t);
    switch (kind_) {
      case Kind::CressieRead: return (std::pow(t, gamma_) - 1.0) / gamma_;
      case Kind::ModifiedKL: return std::log(t);
      case Kind::KL: return t - 1.0;
      case Kind::Hellinger: return 0.5 * (std::sqrt(t) - 1.0);
    }
    return 0.0;
  }

  /// lim_{t->0+} phi(t); +inf when the generator blows up at zero.
  double limit_at_zero() const noexcept {
    switch (kind_) {
      case Kind::CressieRead:
        return gamma_ > 0.0 ? 1.0 / gamma_ : std::numeric_limits<double>::infinity();
      case Kind::ModifiedKL: return std::numeric_limits<double>::infinity();
      case Kind::KL: return 1.0;
      case Kind::Hellinger: return 0.5;
    }
    return 0.0;
  }

  /// lim_{t->inf} phi(t)/t, the weight of mass where the reference density
  /// vanishes; +inf when phi grows faster than linearly.
  double slope_at_infinity() const noexcept {
    switch (kind_) {
      case Kind::CressieRead:
        return gamma_ < 1.0 ? 1.0 / (1.0 - gamma_) : std::numeric_limits<double>::infinity();
      case Kind::ModifiedKL: return 1.0;
      case Kind::KL: return std::numeric_limits<double>::infinity();
      case Kind::Hellinger: return 0.5;
    }
    return 0.0;
  }

  /// Divergence between mutually singular laws: phi(0) + lim phi(t)/t.
  double singular_limit() const noexcept { return limit_at_zero() + slope_at_infinity(); }

  friend bool operator==(const DivergenceSpec&, const DivergenceSpec&) = default;

 private:
  DivergenceSpec(Kind kind, double gamma) : kind_(kind), gamma_(gamma) {}

  Kind kind_;
  double gamma_;
};

/// phi#(t) for any spec.
inline double phi_sharp(const DivergenceSpec& spec, double t) { return spec.phi_sharp(t); }

/// The psi function of the proximal penalty. Only psi >= 0, psi(t) = 0 iff
/// t = 1 and psi'(1) = 0 are required; convexity is not.
class ProximalGenerator {
 public:
  using Fn = std::function<double(double)>;

  /// Hellinger 0.5 (sqrt(t) - 1)^2.
  ProximalGenerator() : ProximalGenerator(DivergenceSpec::hellinger()) {}

  explicit ProximalGenerator(const DivergenceSpec& spec)
      : name_(spec.name()),
        value_([spec](double t) { return spec.phi(t); }),
        derivative_([spec](double t) { return spec.derivative(t); }) {}

  ProximalGenerator(std::string name, Fn value, Fn derivative)
      : name_(std::move(name)), value_(std::move(value)), derivative_(std::move(derivative)) {}

  static ProximalGenerator parse(std::string_view name) {
    return ProximalGenerator(DivergenceSpec::parse(name));
  }

  double operator()(double t) const { return value_(t); }
  double derivative(double t) const { return derivative_(t); }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  Fn value_;
  Fn derivative_;
};

}  // namespace proxdiv
