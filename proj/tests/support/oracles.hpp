// Test-only reference implementations, kept independent of the library code
// paths they are used to check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracles {

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Recursive adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
    const double m = 0.5 * (a + b);
    return simpson(f, a, b, f(a), f(b), f(m), eps, 48);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Closed-form log evidence of the linear-Gaussian model
//   y ~ N(0, sigma2 I + alpha2 X X').
inline double log_evidence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2,
                           double alpha2) {
    const Eigen::Index n = y.size();
    Eigen::MatrixXd C = alpha2 * (X * X.transpose());
    C.diagonal().array() += sigma2;
    const Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw std::runtime_error("log_evidence: C not PD");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = y.dot(llt.solve(y));
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + log_det + quad);
}

// Exact posterior of the linear-Gaussian model.
struct ExactPosterior {
    Eigen::VectorXd mu;
    Eigen::MatrixXd Sigma;
};

inline ExactPosterior exact_posterior(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      double sigma2, double alpha2) {
    const Eigen::Index nt = X.cols();
    Eigen::MatrixXd A = X.transpose() * X / sigma2;
    A.diagonal().array() += 1.0 / alpha2;
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    ExactPosterior out;
    out.Sigma = llt.solve(Eigen::MatrixXd::Identity(nt, nt));
    out.mu = llt.solve(X.transpose() * y / sigma2);
    return out;
}

// Textbook two-pass Pearson correlation.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t pos = 0; pos < idx.size();) {
        std::size_t end = pos;
        while (end + 1 < idx.size() && v[idx[end + 1]] == v[idx[pos]]) ++end;
        const double avg = 0.5 * (static_cast<double>(pos) + static_cast<double>(end)) + 1.0;
        for (std::size_t k = pos; k <= end; ++k) r[idx[k]] = avg;
        pos = end + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

}  // namespace oracles
