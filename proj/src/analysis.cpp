#include "emtdq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace emtdq {

Mat state_matrix(const SemiExplicitDae& sys, double t, std::span<const double> x,
                 std::span<const double> z) {
    const_cast<SemiExplicitDae&>(sys).prepare_derivatives();
    auto ws = sys.make_workspace();
    Mat J = sys.jacobian(t, x, z, ws);
    const int nd = sys.n_diff(), na = sys.n_alg();
    if (na == 0) return J;
    GzSingularity gz = sys.gz_singularity(t, x, z);
    if (gz.singular)
        throw std::runtime_error("state matrix: g_z is singular with nullity " +
                                 std::to_string(gz.nullity) +
                                 "; use the reduced formulation");
    Mat fx = J.topLeftCorner(nd, nd);
    Mat fz = J.topRightCorner(nd, na);
    Mat gx = J.bottomLeftCorner(na, nd);
    Mat gzm = J.bottomRightCorner(na, na);
    return fx - fz * lu_solve(gzm, gx);
}

double eigen_diff(std::vector<std::complex<double>> a,
                  std::vector<std::complex<double>> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("eigen diff: spectra of different size");
    std::vector<char> used(b.size(), 0);
    double worst = 0.0;
    for (const auto& la : a) {
        int best = -1;
        double bd = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            double d = std::abs(la - b[j]);
            if (best < 0 || d < bd) { best = static_cast<int>(j); bd = d; }
        }
        used[best] = 1;
        worst = std::max(worst, bd);
    }
    return worst;
}

TrajTable sample_trajectory(const Trajectory& tr, double dt) {
    TrajTable t;
    t.names = tr.names;
    const double t0 = tr.t_begin(), t1 = tr.t_end();
    long npts = static_cast<long>(std::floor((t1 - t0) / dt + 0.5)) + 1;
    t.t.resize(npts);
    t.vals.resize(npts, static_cast<int>(t.names.size()));
    for (long k = 0; k < npts; ++k) {
        double tk = std::min(t0 + k * dt, t1);
        t.t[k] = tk;
        Vec y = tr.at(tk);
        for (int j = 0; j < y.size(); ++j) t.vals(k, j) = y[j];
    }
    return t;
}

std::string trajectory_csv(const TrajTable& t) {
    std::ostringstream os;
    os.precision(17);
    os << "t";
    for (const auto& n : t.names) os << "," << n;
    os << "\n";
    for (std::size_t k = 0; k < t.t.size(); ++k) {
        os << t.t[k];
        for (int j = 0; j < t.vals.cols(); ++j) os << "," << t.vals(k, j);
        os << "\n";
    }
    return os.str();
}

TrajTable parse_trajectory_csv(const std::string& text) {
    TrajTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trajectory csv: empty file");
    {
        std::istringstream hs(line);
        std::string cell;
        bool first = true;
        while (std::getline(hs, cell, ',')) {
            if (first) {
                if (cell != "t") throw std::runtime_error("trajectory csv: header must start with t");
                first = false;
            } else {
                t.names.push_back(cell);
            }
        }
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != t.names.size() + 1)
            throw std::runtime_error("trajectory csv: row width mismatch");
        rows.push_back(std::move(row));
    }
    t.t.resize(rows.size());
    t.vals.resize(static_cast<int>(rows.size()), static_cast<int>(t.names.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        t.t[k] = rows[k][0];
        for (std::size_t j = 0; j < t.names.size(); ++j) t.vals(k, j) = rows[k][j + 1];
    }
    return t;
}

EquivalenceReport table_diff(const TrajTable& a, const TrajTable& b) {
    if (a.t.size() != b.t.size())
        throw std::invalid_argument("trajectory diff: grids differ in length");
    for (std::size_t k = 0; k < a.t.size(); ++k)
        if (std::abs(a.t[k] - b.t[k]) > 1e-9)
            throw std::invalid_argument("trajectory diff: grids differ at row " +
                                        std::to_string(k));
    EquivalenceReport r;
    for (std::size_t ja = 0; ja < a.names.size(); ++ja) {
        auto it = std::find(b.names.begin(), b.names.end(), a.names[ja]);
        if (it == b.names.end()) continue;
        std::size_t jb = static_cast<std::size_t>(it - b.names.begin());
        double m = (a.vals.col(static_cast<int>(ja)) - b.vals.col(static_cast<int>(jb)))
                       .cwiseAbs()
                       .maxCoeff();
        r.variables.push_back(a.names[ja]);
        r.infnorm.push_back(m);
    }
    if (r.variables.empty())
        throw std::invalid_argument("trajectory diff: no shared variables");
    r.max = *std::max_element(r.infnorm.begin(), r.infnorm.end());
    r.mean = 0.0;
    for (double v : r.infnorm) r.mean += v;
    r.mean /= static_cast<double>(r.infnorm.size());
    return r;
}

EquivalenceReport trajectory_diff(const Trajectory& a, const Trajectory& b, double dt) {
    return table_diff(sample_trajectory(a, dt), sample_trajectory(b, dt));
}

std::string equivalence_csv(const EquivalenceReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "variable,infnorm\n";
    for (std::size_t i = 0; i < r.variables.size(); ++i)
        os << r.variables[i] << "," << r.infnorm[i] << "\n";
    os << "max," << r.max << "\n";
    os << "mean," << r.mean << "\n";
    return os.str();
}

std::string bench_csv_header() {
    return "case,buses,rep,warmup,failed,wall_seconds,peak_rss_bytes,alloc_bytes\n";
}

std::string bench_csv_row(const BenchRecord& r) {
    std::ostringstream os;
    os.precision(17);
    os << r.case_id << "," << r.buses << "," << r.rep << "," << (r.warmup ? 1 : 0) << ","
       << (r.failed ? 1 : 0) << "," << r.wall_seconds << "," << r.peak_rss_bytes << ","
       << r.alloc_bytes << "\n";
    return os.str();
}

ScalingFit fit_scaling(const std::vector<double>& buses,
                       const std::vector<double>& metric) {
    if (buses.size() != metric.size() || buses.size() < 3)
        throw std::invalid_argument("scaling fit: need >= 3 case sizes");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const int n = static_cast<int>(buses.size());
    for (int i = 0; i < n; ++i) {
        if (!(metric[i] > 0.0) || !(buses[i] > 0.0))
            throw std::invalid_argument("scaling fit: non-positive metric value");
        double x = std::log(buses[i]), y = std::log(metric[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    ScalingFit f;
    f.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double ssxy = n * sxy - sx * sy;
    double ssxx = n * sxx - sx * sx;
    double ssyy = n * syy - sy * sy;
    f.r2 = ssyy == 0.0 ? 1.0 : (ssxy * ssxy) / (ssxx * ssyy);
    return f;
}

} // namespace emtdq
