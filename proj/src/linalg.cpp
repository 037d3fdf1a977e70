#include "emtdq/linalg.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace emtdq {

Vec lu_solve(const Mat& a, const Vec& b) {
    Eigen::PartialPivLU<Mat> lu(a);
    Vec x = lu.solve(b);
    if (!x.allFinite())
        throw std::runtime_error("lu_solve: singular or non-finite system");
    return x;
}

Mat lu_solve(const Mat& a, const Mat& b) {
    Eigen::PartialPivLU<Mat> lu(a);
    Mat x = lu.solve(b);
    if (!x.allFinite())
        throw std::runtime_error("lu_solve: singular or non-finite system");
    return x;
}

Vec lstsq_solve(const Mat& a, const Vec& b) {
    Eigen::ColPivHouseholderQR<Mat> qr(a);
    qr.setThreshold(1e-12);
    return qr.solve(b);
}

int numeric_rank(const Mat& a, double tol) {
    if (a.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Mat> qr(a);
    const auto& r = qr.matrixQR();
    int n = static_cast<int>(std::min(a.rows(), a.cols()));
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(r(i, i)));
    if (dmax == 0.0) return 0;
    int rank = 0;
    for (int i = 0; i < n; ++i)
        if (std::abs(r(i, i)) > tol * dmax) ++rank;
    return rank;
}

double cond1(const Mat& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("cond1: square matrix required");
    Eigen::PartialPivLU<Mat> lu(a);
    Mat inv = lu.solve(Mat::Identity(a.rows(), a.cols()));
    if (!inv.allFinite())
        return std::numeric_limits<double>::infinity();
    double na = a.cwiseAbs().colwise().sum().maxCoeff();
    double ni = inv.cwiseAbs().colwise().sum().maxCoeff();
    return na * ni;
}

std::vector<std::complex<double>> eigenvalues_sorted(const Mat& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("eigenvalues: square matrix required");
    if (!a.allFinite())
        throw std::invalid_argument("eigenvalues: non-finite entries");
    Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigenvalues: QR iteration did not converge");
    std::vector<std::complex<double>> out(a.rows());
    for (int i = 0; i < a.rows(); ++i) out[i] = es.eigenvalues()[i];
    std::sort(out.begin(), out.end(), [](auto x, auto y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return out;
}

} // namespace emtdq
