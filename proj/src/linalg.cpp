#include "skewlab/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace skewlab {

Vec singular_values(const Mat& m) {
    if (m.size() == 0) return Vec();
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues();
}

double op_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    return singular_values(m)[0];
}

double min_norm(const Mat& m) {
    if (m.cols() == 0) return 0.0;
    if (m.rows() < m.cols()) return 0.0;
    Vec s = singular_values(m);
    return s[s.size() - 1];
}

Mat orthonormalize(const Mat& m) {
    Eigen::HouseholderQR<Mat> qr(m);
    Mat q = qr.householderQ() * Mat::Identity(m.rows(), m.cols());
    return q;
}

long long int_determinant(const IntMat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("determinant of a non-square matrix");
    const Eigen::Index n = m.rows();
    if (n == 0) return 1;
    // Bareiss elimination keeps every intermediate an exact integer.
    Eigen::Matrix<__int128, Eigen::Dynamic, Eigen::Dynamic> a = m.cast<__int128>();
    __int128 prev = 1;
    int sign = 1;
    for (Eigen::Index k = 0; k < n - 1; ++k) {
        if (a(k, k) == 0) {
            Eigen::Index p = k + 1;
            while (p < n && a(p, k) == 0) ++p;
            if (p == n) return 0;
            a.row(k).swap(a.row(p));
            sign = -sign;
        }
        for (Eigen::Index i = k + 1; i < n; ++i) {
            for (Eigen::Index j = k + 1; j < n; ++j) {
                a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
            }
        }
        prev = a(k, k);
    }
    return static_cast<long long>(a(n - 1, n - 1)) * sign;
}

IntMat int_inverse_unimodular(const IntMat& m) {
    const long long det = int_determinant(m);
    if (det != 1 && det != -1) throw std::invalid_argument("matrix is not unimodular");
    Mat inv = to_real(m).inverse();
    IntMat out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = std::llround(inv(i, j));
    if ((m * out - IntMat::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() != 0)
        throw std::runtime_error("integer inverse failed (entries too large for double rounding)");
    return out;
}

Mat to_real(const IntMat& m) { return m.cast<double>(); }

Vec int_apply(const IntMat& m, const Vec& v) {
    Vec out = Vec::Zero(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (m(i, j) != 0) s += static_cast<double>(m(i, j)) * v[j];
        }
        out[i] = s;
    }
    return out;
}

}  // namespace skewlab
