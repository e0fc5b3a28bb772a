#include "ghostrec/sim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ghostrec/common/error.hpp"

namespace ghostrec::sim {

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("pearson: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.empty()) throw DegenerateError("pearson: empty input");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw DegenerateError("pearson: zero variance input");
    const double r = sab / std::sqrt(saa * sbb);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace ghostrec::sim
