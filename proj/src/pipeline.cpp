#include "robkmr/pipeline.hpp"

namespace robkmr {

CenteredComponents centered_components(const std::array<const DataView*, 3>& views,
                                       const std::array<ViewKernelSpec, 3>& specs, const RobustLoss& loss,
                                       const KirwlsOptions& kirwls) {
  CenteredComponents out;
  for (std::size_t v = 0; v < 3; ++v) {
    const GramMatrix k = build_gram(*views[v], specs[v].kernel, specs[v].bandwidth);
    out.centering[v] = kirwls_weights(k, loss, kirwls);
  }
  out.components = assemble_components(out.centering[0].centered, out.centering[1].centered,
                                       out.centering[2].centered);
  return out;
}

}  // namespace robkmr
