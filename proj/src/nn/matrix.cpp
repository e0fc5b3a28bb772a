#include "ghostrec/nn/matrix.hpp"

#include <string>

#include "ghostrec/common/error.hpp"

namespace ghostrec::nn {

template <class T>
void ensure_finite(const Matrix<T>& m, std::string_view where) {
    if (!m.allFinite()) throw NumericError("non-finite value produced by " + std::string(where));
}

void check_shape(std::ptrdiff_t got_rows, std::ptrdiff_t got_cols, std::ptrdiff_t want_rows,
                 std::ptrdiff_t want_cols, std::string_view where) {
    if (got_rows != want_rows || got_cols != want_cols)
        throw DimensionError(std::string(where) + ": expected " + std::to_string(want_rows) + "x" +
                             std::to_string(want_cols) + ", got " + std::to_string(got_rows) + "x" +
                             std::to_string(got_cols));
}

template void ensure_finite(const Matrix<float>&, std::string_view);
template void ensure_finite(const Matrix<double>&, std::string_view);
template void ensure_finite(const Matrix<long double>&, std::string_view);

}  // namespace ghostrec::nn
