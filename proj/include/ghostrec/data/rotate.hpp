#pragma once

#include "ghostrec/sim/imaging.hpp"

namespace ghostrec::data {

// Counter-clockwise rotation (as displayed, row 0 at the top) about
// ((h-1)/2, (w-1)/2). Bilinear sampling, zero outside the source, result
// clamped to [0, 1]. Multiples of 90 degrees use exact cos/sin, and 0 degrees
// returns the input unchanged.
sim::TargetImage rotate_target(const sim::TargetImage& img, double degrees);

}  // namespace ghostrec::data
