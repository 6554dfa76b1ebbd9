#include "robkmr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

constexpr double kAbsoluteFloor = 1e-8;

void require_nonnegative(double t) {
  if (!(t >= 0.0)) {
    throw Error(ErrorCode::Domain, "loss evaluated at negative or NaN distance " + std::to_string(t));
  }
}

}  // namespace

RobustLoss RobustLoss::least_squares() { return RobustLoss{}; }

RobustLoss RobustLoss::least_absolute(double scale) {
  RobustLoss l;
  l.kind = LossKind::LeastAbsolute;
  l.scale = scale;
  return l;
}

RobustLoss RobustLoss::huber(double c) {
  RobustLoss l;
  l.kind = LossKind::Huber;
  l.c = c;
  return l;
}

RobustLoss RobustLoss::hampel_loss(double c1, double c2, double c3) {
  RobustLoss l;
  l.kind = LossKind::Hampel;
  l.hampel = {c1, c2, c3};
  return l;
}

RobustLoss RobustLoss::tukey(double c) {
  RobustLoss l;
  l.kind = LossKind::Tukey;
  l.c = c;
  return l;
}

RobustLoss RobustLoss::cauchy(double c) {
  RobustLoss l;
  l.kind = LossKind::Cauchy;
  l.c = c;
  return l;
}

RobustLoss RobustLoss::welsch(double c) {
  RobustLoss l;
  l.kind = LossKind::Welsch;
  l.c = c;
  return l;
}

RobustLoss RobustLoss::geman_mcclure() {
  RobustLoss l;
  l.kind = LossKind::GemanMcClure;
  return l;
}

RobustLoss RobustLoss::tuned(LossKind kind) {
  RobustLoss l;
  l.kind = kind;
  l.policy = TuningPolicy::Quantile;
  l.quantiles = kind == LossKind::Hampel ? std::array<double, 3>{0.50, 0.75, 0.85}
                                         : std::array<double, 3>{0.5, 0.5, 0.5};
  return l;
}

void RobustLoss::validate() const {
  if (uses_single_constant(kind) && !(c > 0.0 && std::isfinite(c))) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(to_string(kind)) + " loss requires c > 0");
  }
  if (kind == LossKind::Hampel) {
    const auto [c1, c2, c3] = hampel;
    if (!(c1 > 0.0 && c1 < c2 && c2 < c3 && std::isfinite(c3))) {
      throw Error(ErrorCode::InvalidArgument, "hampel loss requires 0 < c1 < c2 < c3");
    }
  }
  if (kind == LossKind::LeastAbsolute && !(scale > 0.0 && std::isfinite(scale))) {
    throw Error(ErrorCode::InvalidArgument, "least-absolute loss requires scale > 0");
  }
  if (policy == TuningPolicy::Quantile) {
    const std::size_t used = kind == LossKind::Hampel ? 3 : 1;
    for (std::size_t i = 0; i < used; ++i) {
      if (!(quantiles[i] > 0.0 && quantiles[i] <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "quantile levels must lie in (0, 1]");
      }
    }
    if (kind == LossKind::Hampel &&
        !(quantiles[0] <= quantiles[1] && quantiles[1] <= quantiles[2])) {
      throw Error(ErrorCode::InvalidArgument, "hampel quantile levels must be non-decreasing");
    }
  }
}

bool uses_single_constant(LossKind kind) {
  return kind == LossKind::Huber || kind == LossKind::Tukey || kind == LossKind::Cauchy ||
         kind == LossKind::Welsch;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::LeastSquares: return "least_squares";
    case LossKind::LeastAbsolute: return "least_absolute";
    case LossKind::Huber: return "huber";
    case LossKind::Hampel: return "hampel";
    case LossKind::Tukey: return "tukey";
    case LossKind::Cauchy: return "cauchy";
    case LossKind::Welsch: return "welsch";
    case LossKind::GemanMcClure: return "geman_mcclure";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : {LossKind::LeastSquares, LossKind::LeastAbsolute, LossKind::Huber,
                    LossKind::Hampel, LossKind::Tukey, LossKind::Cauchy, LossKind::Welsch,
                    LossKind::GemanMcClure}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::Parse, "unknown loss kind '" + std::string(name) + "'");
}

double rho(const RobustLoss& loss, double t) {
  require_nonnegative(t);
  const double c = loss.c;
  switch (loss.kind) {
    case LossKind::LeastSquares:
      return 0.5 * t * t;
    case LossKind::LeastAbsolute:
      return t;
    case LossKind::Huber:
      return t <= c ? 0.5 * t * t : c * t - 0.5 * c * c;
    case LossKind::Hampel: {
      const auto [c1, c2, c3] = loss.hampel;
      const double plateau = 0.5 * c1 * (c2 + c3 - c1);
      if (t <= c1) return 0.5 * t * t;
      if (t < c2) return c1 * t - 0.5 * c1 * c1;
      if (t < c3) {
        const double d = t - c3;
        return -c1 / (2.0 * (c3 - c2)) * d * d + plateau;
      }
      return plateau;
    }
    case LossKind::Tukey: {
      if (t >= c) return c * c / 6.0;
      const double u = 1.0 - (t / c) * (t / c);
      return c * c / 6.0 * (1.0 - u * u * u);
    }
    case LossKind::Cauchy: {
      const double r = t / c;
      return 0.5 * c * c * std::log1p(r * r);
    }
    case LossKind::Welsch: {
      const double r = t / c;
      return 0.5 * c * c * -std::expm1(-r * r);
    }
    case LossKind::GemanMcClure:
      // (t^2 / 2) / (1 + t^2), scale-free
      return 0.5 * t * t / (1.0 + t * t);
  }
  return 0.0;
}

double psi(const RobustLoss& loss, double t) {
  require_nonnegative(t);
  const double c = loss.c;
  switch (loss.kind) {
    case LossKind::LeastSquares:
      return t;
    case LossKind::LeastAbsolute:
      return t > 0.0 ? 1.0 : 0.0;
    case LossKind::Huber:
      return t <= c ? t : c;
    case LossKind::Hampel: {
      const auto [c1, c2, c3] = loss.hampel;
      if (t <= c1) return t;
      if (t < c2) return c1;
      if (t < c3) return c1 * (c3 - t) / (c3 - c2);
      return 0.0;
    }
    case LossKind::Tukey: {
      if (t >= c) return 0.0;
      const double u = 1.0 - (t / c) * (t / c);
      return t * u * u;
    }
    case LossKind::Cauchy: {
      const double r = t / c;
      return t / (1.0 + r * r);
    }
    case LossKind::Welsch: {
      const double r = t / c;
      return t * std::exp(-r * r);
    }
    case LossKind::GemanMcClure: {
      const double d = 1.0 + t * t;
      return t / (d * d);
    }
  }
  return 0.0;
}

double weight(const RobustLoss& loss, double t) {
  require_nonnegative(t);
  const double c = loss.c;
  switch (loss.kind) {
    case LossKind::LeastSquares:
      return 1.0;
    case LossKind::LeastAbsolute:
      return 1.0 / std::max(t, kAbsoluteFloor * loss.scale);
    case LossKind::Huber:
      return t <= c ? 1.0 : c / t;
    case LossKind::Hampel: {
      const auto [c1, c2, c3] = loss.hampel;
      if (t <= c1) return 1.0;
      if (t < c2) return c1 / t;
      if (t < c3) return c1 * (c3 - t) / ((c3 - c2) * t);
      return 0.0;
    }
    case LossKind::Tukey: {
      if (t >= c) return 0.0;
      const double u = 1.0 - (t / c) * (t / c);
      return u * u;
    }
    case LossKind::Cauchy: {
      const double r = t / c;
      return 1.0 / (1.0 + r * r);
    }
    case LossKind::Welsch: {
      const double r = t / c;
      return std::exp(-r * r);
    }
    case LossKind::GemanMcClure: {
      const double d = 1.0 + t * t;
      return 1.0 / (d * d);
    }
  }
  return 1.0;
}

double lower_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

RobustLoss tune_constants(const RobustLoss& loss, std::span<const double> distances) {
  if (loss.policy != TuningPolicy::Quantile) {
    throw Error(ErrorCode::InvalidArgument, "tune_constants requires the quantile policy");
  }
  if (distances.empty()) {
    throw Error(ErrorCode::InvalidArgument, "tune_constants needs at least one distance");
  }
  double smallest_positive = std::numeric_limits<double>::infinity();
  for (double d : distances) {
    require_nonnegative(d);
    if (d > 0.0) smallest_positive = std::min(smallest_positive, d);
  }
  if (!std::isfinite(smallest_positive)) {
    throw Error(ErrorCode::DegenerateScale, "all distances are zero; cannot tune loss constants");
  }
  // A zero quantile would make c = 0; fall back to the smallest positive distance.
  auto positive_quantile = [&](double q) {
    const double v = lower_quantile(distances, q);
    return v > 0.0 ? v : smallest_positive;
  };

  RobustLoss out = loss;
  switch (loss.kind) {
    case LossKind::LeastSquares:
    case LossKind::GemanMcClure:
      break;
    case LossKind::LeastAbsolute:
      out.scale = positive_quantile(0.5);
      break;
    case LossKind::Huber:
    case LossKind::Tukey:
    case LossKind::Cauchy:
    case LossKind::Welsch:
      out.c = positive_quantile(loss.quantiles[0]);
      break;
    case LossKind::Hampel: {
      double c1 = positive_quantile(loss.quantiles[0]);
      double c2 = positive_quantile(loss.quantiles[1]);
      double c3 = positive_quantile(loss.quantiles[2]);
      // Quantiles are non-decreasing, so ties are the only ordering failure.
      const double inf = std::numeric_limits<double>::infinity();
      if (c2 <= c1) c2 = std::nextafter(c1, inf);
      if (c3 <= c2) c3 = std::nextafter(c2, inf);
      out.hampel = {c1, c2, c3};
      break;
    }
  }
  out.validate();
  return out;
}

}  // namespace robkmr
