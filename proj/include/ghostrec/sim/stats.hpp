#pragma once

#include <span>

namespace ghostrec::sim {

// Pearson correlation over flattened values. Throws DimensionError on
// length mismatch and DegenerateError when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace ghostrec::sim
