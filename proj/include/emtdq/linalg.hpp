#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace emtdq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Solves A x = b by partial-pivot LU. Throws on (near-)singular A.
Vec lu_solve(const Mat& a, const Vec& b);
Mat lu_solve(const Mat& a, const Mat& b);

// Least-squares / minimum-residual solve via column-pivoted QR; tolerates
// rank deficiency (free directions get zero update).
Vec lstsq_solve(const Mat& a, const Vec& b);

// Numeric rank from a column-pivoted factorization with relative
// threshold tol (diag entries below tol * max diag count as zero).
int numeric_rank(const Mat& a, double tol = 1e-10);

// Exact 1-norm condition number via explicit inverse; returns +inf when
// the factorization finds the matrix singular. Intended for desk-scale
// probes, not production solves.
double cond1(const Mat& a);

// Eigenvalues of a real dense matrix, sorted by (real, imag).
std::vector<std::complex<double>> eigenvalues_sorted(const Mat& a);

} // namespace emtdq
