#pragma once

#include "skewlab/common.hpp"

namespace skewlab {

// Operator 2-norm.
double op_norm(const Mat& m);

// Minimal norm m(T) = inf_{|v|=1} |T v|; zero when T has more columns than rows.
double min_norm(const Mat& m);

// Singular values, descending.
Vec singular_values(const Mat& m);

// Orthonormal basis of the column span (thin QR, columns assumed independent).
Mat orthonormalize(const Mat& m);

// Determinant of a small integer matrix by fraction-free elimination.
long long int_determinant(const IntMat& m);

// Exact inverse of a unimodular integer matrix.
IntMat int_inverse_unimodular(const IntMat& m);

Mat to_real(const IntMat& m);

// Product of integer matrix with a real vector, no reduction.
Vec int_apply(const IntMat& m, const Vec& v);

}  // namespace skewlab
