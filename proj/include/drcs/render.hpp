#pragma once

#include <string>

#include "drcs/report_io.hpp"

namespace drcs {

/// Projected true paths, planned mean with 2-sigma ellipses, and the region outlines.
/// Faces that involve coordinates outside the projection are not drawn.
/// Throws std::invalid_argument for an empty fan or out-of-range projection indices.
std::string render_fan_svg(const RunReport& r);

/// Per-step empirical W2 with 2-SE bars against the configured radius.
std::string render_w2_svg(const RunReport& r);

}  // namespace drcs
