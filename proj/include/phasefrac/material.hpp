#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "phasefrac/errors.hpp"

namespace phasefrac {

/// Stiffness degradation b(s): C^1, convex, non-decreasing, b >= eta > 0.
class DegradationLaw {
 public:
  using Fn = std::function<double(double)>;

  /// b(s) = max(s, 0)^2 + eta
  static DegradationLaw prototype(double eta) {
    check_floor(eta);
    DegradationLaw law;
    law.name_ = "prototype";
    law.eta_ = eta;
    law.prototype_ = true;
    return law;
  }

  /// b(s) = max(s, 0)^p + eta, p > 1
  static DegradationLaw power(double p, double eta) {
    check_floor(eta);
    if (!(p > 1.0)) throw ConfigError("power degradation needs exponent p > 1");
    return custom(
        "power", [p, eta](double s) { return std::pow(std::max(s, 0.0), p) + eta; },
        [p](double s) { return s > 0.0 ? p * std::pow(s, p - 1.0) : 0.0; },
        [p](double s) { return s > 0.0 ? p * (p - 1.0) * std::pow(s, p - 2.0) : 0.0; }, eta);
  }

  /// b(s) = exp(beta (s - 1)) + eta, beta > 0
  static DegradationLaw exponential(double beta, double eta) {
    check_floor(eta);
    if (!(beta > 0.0)) throw ConfigError("exponential degradation needs beta > 0");
    return custom(
        "exponential", [beta, eta](double s) { return std::exp(beta * (s - 1.0)) + eta; },
        [beta](double s) { return beta * std::exp(beta * (s - 1.0)); },
        [beta](double s) { return beta * beta * std::exp(beta * (s - 1.0)); }, eta);
  }

  /// User law. Convexity, monotonicity and the floor are checked on 10^3
  /// random sample pairs in [-2, 1]; a violation throws ConfigError. If
  /// `d2b` is empty the Newton curvature falls back to differencing `db`.
  static DegradationLaw custom(std::string name, Fn b, Fn db, Fn d2b, double eta) {
    check_floor(eta);
    if (!b || !db) throw ConfigError("custom degradation needs b and b'");
    DegradationLaw law;
    law.name_ = std::move(name);
    law.eta_ = eta;
    law.b_ = std::move(b);
    law.db_ = std::move(db);
    law.d2b_ = std::move(d2b);
    law.check_by_sampling();
    return law;
  }

  const std::string& name() const { return name_; }
  double eta() const { return eta_; }
  bool is_prototype() const { return prototype_; }

  double value(double s) const {
    if (prototype_) {
      double p = std::max(s, 0.0);
      return p * p + eta_;
    }
    return b_(s);
  }

  double derivative(double s) const { return prototype_ ? 2.0 * std::max(s, 0.0) : db_(s); }

  /// One-sided second derivative (b'' = 2 * 1{s > 0} for the prototype).
  double curvature(double s) const {
    if (prototype_) return s > 0.0 ? 2.0 : 0.0;
    if (d2b_) return d2b_(s);
    const double h = 1e-6;
    return (db_(s + h) - db_(s)) / h;
  }

 private:
  DegradationLaw() = default;

  static void check_floor(double eta) {
    if (!(eta > 0.0)) throw ConfigError("degradation floor eta must be positive");
  }

  void check_by_sampling() const {
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> s_dist(-2.0, 1.0);
    std::uniform_real_distribution<double> t_dist(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      double a = s_dist(rng);
      double c = s_dist(rng);
      double theta = t_dist(rng);
      double ba = value(a);
      double bc = value(c);
      double scale = 1e-10 * (1.0 + std::abs(ba) + std::abs(bc));
      if (ba < eta_ - 1e-14 || bc < eta_ - 1e-14)
        throw ConfigError("degradation law '" + name_ + "' falls below its floor eta");
      if ((a < c && ba > bc + scale) || (c < a && bc > ba + scale))
        throw ConfigError("degradation law '" + name_ + "' is not non-decreasing");
      if (value(theta * a + (1.0 - theta) * c) > theta * ba + (1.0 - theta) * bc + scale)
        throw ConfigError("degradation law '" + name_ + "' is not convex");
      if (derivative(a) < -1e-14)
        throw ConfigError("degradation law '" + name_ + "' has a negative derivative");
    }
  }

  std::string name_;
  double eta_ = 0.0;
  bool prototype_ = false;
  Fn b_, db_, d2b_;
};

/// Homogeneous isotropic elastic tensor C xi = 2 mu xi + lambda tr(xi) I (1D:
/// modulus 2 mu + lambda), degradation law, Ambrosio-Tortorelli length and the
/// rate-dependent dissipation weights.
struct MaterialModel {
  int dim = 1;
  double mu = 0.5;
  double lambda = 0.0;
  DegradationLaw degradation = DegradationLaw::prototype(1e-3);
  double epsilon = 0.1;
  int k = 0;
  std::vector<double> alphas{1.0};
  bool rate_dissipation = true;
  /// Optional per-element multiplier on C (empty means homogeneous).
  std::vector<double> stiffness_scale;

  /// Energy balance is only certified when the dissipation controls H^k with k > d/2.
  bool balance_certified() const { return rate_dissipation && 2 * k > dim; }

  double element_scale(int e) const {
    return stiffness_scale.empty() ? 1.0 : stiffness_scale[static_cast<std::size_t>(e)];
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw ConfigError("material dimension must be 1 or 2");
    if (!(mu > 0.0)) throw ConfigError("shear modulus mu must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("Lame parameter lambda must be non-negative");
    if (!(epsilon > 0.0)) throw ConfigError("regularization length epsilon must be positive");
    for (double s : stiffness_scale)
      if (!(s > 0.0)) throw ConfigError("stiffness scale factors must be positive");
    if (!rate_dissipation) return;
    if (k < 0 || k > 2) throw ConfigError("dissipation order k must be 0, 1 or 2");
    if (static_cast<int>(alphas.size()) != k + 1)
      throw ConfigError("dissipation needs exactly k+1 weights alpha_0..alpha_k");
    for (double a : alphas)
      if (!(a >= 0.0)) throw ConfigError("dissipation weights must be non-negative");
    if (!(alphas.front() > 0.0) || !(alphas.back() > 0.0))
      throw ConfigError("dissipation weights alpha_0 and alpha_k must be positive");
  }
};

}  // namespace phasefrac
