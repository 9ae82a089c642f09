#include "klab/linalg.hpp"

#include <cmath>

namespace klab {

Mat Mat::identity(int n_) {
    Mat I(n_);
    for (int i = 0; i < n_; ++i) I(i, i) = 1.0;
    return I;
}

Vec operator+(const Vec& x, const Vec& y) {
    Vec z(x);
    for (size_t i = 0; i < z.size(); ++i) z[i] += y[i];
    return z;
}

Vec operator-(const Vec& x, const Vec& y) {
    Vec z(x);
    for (size_t i = 0; i < z.size(); ++i) z[i] -= y[i];
    return z;
}

Vec operator*(double s, const Vec& x) {
    Vec z(x);
    for (double& v : z) v *= s;
    return z;
}

Mat operator+(const Mat& A, const Mat& B) {
    Mat C(A);
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
    return C;
}

Mat operator*(double s, const Mat& A) {
    Mat C(A);
    for (double& v : C.a) v *= s;
    return C;
}

double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const Vec& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

void axpy(double a, const Vec& x, Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec matvec(const Mat& A, const Vec& x) {
    Vec y(static_cast<size_t>(A.n), 0.0);
    for (int i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (int j = 0; j < A.n; ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Mat matmul(const Mat& A, const Mat& B) {
    Mat C(A.n);
    for (int i = 0; i < A.n; ++i)
        for (int l = 0; l < A.n; ++l) {
            const double ail = A(i, l);
            if (ail == 0.0) continue;
            for (int j = 0; j < A.n; ++j) C(i, j) += ail * B(l, j);
        }
    return C;
}

double frobenius(const Mat& A) {
    double s = 0.0;
    for (double v : A.a) s += v * v;
    return std::sqrt(s);
}

namespace {

// LU decomposition with partial pivoting, in place. Returns the permutation
// sign, or 0 if a pivot collapses.
int lu_factor(Mat& A, std::vector<int>& piv) {
    const int n = A.n;
    piv.resize(n);
    int sign = 1;
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int col = 0; col < n; ++col) {
        int best = col;
        double bv = std::fabs(A(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(A(r, col));
            if (v > bv) { bv = v; best = r; }
        }
        if (bv < 1e-300) return 0;
        if (best != col) {
            for (int j = 0; j < n; ++j) std::swap(A.a[best * n + j], A.a[col * n + j]);
            std::swap(piv[best], piv[col]);
            sign = -sign;
        }
        const double p = A(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = A(r, col) / p;
            A(r, col) = f;
            for (int j = col + 1; j < n; ++j) A(r, j) -= f * A(col, j);
        }
    }
    return sign;
}

} // namespace

double det(const Mat& A) {
    if (A.n == 1) return A(0, 0);
    if (A.n == 2) return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    if (A.n == 3)
        return A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1))
             - A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0))
             + A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
    Mat LU(A);
    std::vector<int> piv;
    const int sign = lu_factor(LU, piv);
    if (sign == 0) return 0.0;
    double d = sign;
    for (int i = 0; i < A.n; ++i) d *= LU(i, i);
    return d;
}

Mat inverse(const Mat& A) {
    const int n = A.n;
    Mat LU(A);
    std::vector<int> piv;
    const int sign = lu_factor(LU, piv);
    if (sign == 0) throw std::runtime_error("inverse: singular matrix");
    Mat X(n);
    std::vector<double> col(n), y(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) col[i] = (piv[i] == c) ? 1.0 : 0.0;
        // forward substitution (unit lower triangle)
        for (int i = 0; i < n; ++i) {
            double s = col[i];
            for (int j = 0; j < i; ++j) s -= LU(i, j) * y[j];
            y[i] = s;
        }
        // back substitution
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int j = i + 1; j < n; ++j) s -= LU(i, j) * X(j, c);
            X(i, c) = s / LU(i, i);
        }
    }
    return X;
}

double minor_det(const Mat& A, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int k = static_cast<int>(rows.size());
    if (k == 0) return 1.0;
    auto e = [&](int i, int j) { return A(rows[i], cols[j]); };
    switch (k) {
    case 1: return e(0, 0);
    case 2: return e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
    case 3:
        return e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
             - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
             + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
    case 4: {
        double d = 0.0;
        std::vector<int> r3(3), c3 = {cols[1], cols[2], cols[3]};
        double sgn = 1.0;
        for (int i = 0; i < 4; ++i) {
            int m = 0;
            for (int r = 0; r < 4; ++r)
                if (r != i) r3[m++] = rows[r];
            d += sgn * e(i, 0) * minor_det(A, r3, c3);
            sgn = -sgn;
        }
        return d;
    }
    default: {
        Mat S(k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) S(i, j) = e(i, j);
        return det(S);
    }
    }
}

bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Mat& A) {
    for (double v : A.a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace klab
