// Small dense vectors and square matrices for low-dimensional state (n <= ~6).
// Everything is dynamically sized but tuned for tiny n; no external algebra
// library is pulled in for 4x4 work.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace klab {

using Vec = std::vector<double>;

// Row-major square matrix.
struct Mat {
    int n = 0;
    std::vector<double> a; // n*n entries

    Mat() = default;
    explicit Mat(int n_) : n(n_), a(static_cast<size_t>(n_) * n_, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }

    static Mat identity(int n_);
};

Vec operator+(const Vec& x, const Vec& y);
Vec operator-(const Vec& x, const Vec& y);
Vec operator*(double s, const Vec& x);
Mat operator+(const Mat& A, const Mat& B);
Mat operator*(double s, const Mat& A);

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);           // Euclidean length
double norm_inf(const Vec& x);
void axpy(double a, const Vec& x, Vec& y); // y += a*x

Vec matvec(const Mat& A, const Vec& x);
Mat matmul(const Mat& A, const Mat& B);
double frobenius(const Mat& A);

// LU with partial pivoting underneath; throws std::runtime_error on a
// numerically singular matrix (pivot below 1e-300).
double det(const Mat& A);
Mat inverse(const Mat& A);

// Determinant of the k x k submatrix A[rows, cols]; rows/cols hold 0-based
// indices, k <= 4 expanded directly, larger k goes through LU.
double minor_det(const Mat& A, const std::vector<int>& rows, const std::vector<int>& cols);

bool all_finite(const Vec& x);
bool all_finite(const Mat& A);

} // namespace klab
