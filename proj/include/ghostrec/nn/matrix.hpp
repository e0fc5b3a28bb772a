#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string_view>

namespace ghostrec::nn {

// Row-major dense matrix; one sample per row for activations.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Throws NumericError when any entry is NaN or infinite.
template <class T>
void ensure_finite(const Matrix<T>& m, std::string_view where);

void check_shape(std::ptrdiff_t got_rows, std::ptrdiff_t got_cols, std::ptrdiff_t want_rows,
                 std::ptrdiff_t want_cols, std::string_view where);

}  // namespace ghostrec::nn
