#pragma once

// View kernels -> robust centering -> the seven variance components.
// Each view's kernel is centered on its own robust mean first; the
// interaction kernels are Hadamard products of the centered kernels.

#include <array>

#include "robkmr/kernels.hpp"
#include "robkmr/loss.hpp"
#include "robkmr/mixed_model.hpp"
#include "robkmr/robust_center.hpp"

namespace robkmr {

struct ViewKernelSpec {
  KernelKind kernel = KernelKind::Gaussian;
  double bandwidth = 0.0;  ///< <= 0 selects the median heuristic
};

struct CenteredComponents {
  ComponentSet components;
  std::array<RobustCentering, 3> centering;
};

CenteredComponents centered_components(const std::array<const DataView*, 3>& views,
                                       const std::array<ViewKernelSpec, 3>& specs, const RobustLoss& loss,
                                       const KirwlsOptions& kirwls);

}  // namespace robkmr
