#pragma once

// Robust loss functions for M-estimation of the kernel mean element.
//
// Every loss is evaluated on a nonnegative distance t and exposes
//   rho(t)    the loss,
//   psi(t)    its derivative (influence function),
//   weight(t) psi(t) / t, the IRWLS weight, with the continuous limit at 0.

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace robkmr {

enum class LossKind {
  LeastSquares,
  LeastAbsolute,
  Huber,
  Hampel,
  Tukey,
  Cauchy,
  Welsch,
  GemanMcClure,
};

enum class TuningPolicy {
  Fixed,     ///< constants used as given
  Quantile,  ///< constants taken from empirical quantiles of the distances
};

struct RobustLoss {
  LossKind kind = LossKind::LeastSquares;
  /// Tuning constant for Huber, Tukey, Cauchy and Welsch.
  double c = 1.0;
  /// (c1, c2, c3) for Hampel.
  std::array<double, 3> hampel{1.0, 2.0, 3.0};
  /// Distance scale used to floor the LeastAbsolute weight at 1e-8 * scale.
  double scale = 1.0;
  TuningPolicy policy = TuningPolicy::Fixed;
  /// Quantile levels; single-constant kinds use only the first entry.
  std::array<double, 3> quantiles{0.5, 0.75, 0.85};

  static RobustLoss least_squares();
  static RobustLoss least_absolute(double scale = 1.0);
  static RobustLoss huber(double c);
  static RobustLoss hampel_loss(double c1, double c2, double c3);
  static RobustLoss tukey(double c);
  static RobustLoss cauchy(double c);
  static RobustLoss welsch(double c);
  static RobustLoss geman_mcclure();

  /// Quantile-tuned loss with the default levels: median for single-constant
  /// kinds, (0.50, 0.75, 0.85) for Hampel.
  static RobustLoss tuned(LossKind kind);

  /// Throws Error(InvalidArgument) when the constants violate the kind's rules.
  void validate() const;
};

/// True for kinds whose shape depends on c (Huber, Tukey, Cauchy, Welsch).
bool uses_single_constant(LossKind kind);

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

double rho(const RobustLoss& loss, double t);
double psi(const RobustLoss& loss, double t);
double weight(const RobustLoss& loss, double t);

/// Lower empirical quantile: the ceil(q * n)-th smallest value.
double lower_quantile(std::span<const double> values, double q);

/// Returns a copy with constants set from quantiles of `distances`.
/// Requires the Quantile policy. Hampel constants are pushed apart upward
/// by ulps when quantiles tie.
RobustLoss tune_constants(const RobustLoss& loss, std::span<const double> distances);

}  // namespace robkmr
