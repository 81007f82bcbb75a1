#include "sparsevl/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparsevl/errors.hpp"
#include "sparsevl/rng.hpp"

namespace sparsevl {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;  // (2*pi)^{-1/2}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void SparsifyConfig::validate() const {
    if (mode == SparsifyMode::Smoothed && !(rho > 0.0))
        throw std::invalid_argument("SparsifyConfig: rho must be > 0 in Smoothed mode");
    if (!(omega >= 1.0))
        throw std::invalid_argument("SparsifyConfig: omega must be >= 1");
}

double sigmoid(double x, double rho) {
    const double z = x / rho;
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double sparsify(double theta, const SparsifyConfig& cfg) {
    const double mag = std::pow(std::abs(theta), cfg.omega);
    if (cfg.mode == SparsifyMode::Hard) return sign(theta) * mag;
    return (2.0 * sigmoid(theta, cfg.rho) - 1.0) * mag;
}

double sparsify_deriv(double theta, const SparsifyConfig& cfg) {
    const double a = std::abs(theta);
    if (cfg.mode == SparsifyMode::Hard) {
        if (theta == 0.0) {
            if (cfg.omega < 2.0)
                throw NonDifferentiable("sparsify_deriv: Hard mode with omega < 2 at theta = 0");
            return 0.0;
        }
        return cfg.omega * std::pow(a, cfg.omega - 1.0);
    }
    if (theta == 0.0) return 0.0;
    const double s = sigmoid(theta, cfg.rho);
    const double mag = std::pow(a, cfg.omega);
    const double dmag = cfg.omega * sign(theta) * std::pow(a, cfg.omega - 1.0);
    return (2.0 / cfg.rho) * s * (1.0 - s) * mag + (2.0 * s - 1.0) * dmag;
}

double sparsify_inverse(double theta_tilde, const SparsifyConfig& cfg) {
    if (theta_tilde == 0.0) return 0.0;
    if (cfg.mode == SparsifyMode::Hard)
        return sign(theta_tilde) * std::pow(std::abs(theta_tilde), 1.0 / cfg.omega);

    // Smoothed mode: solve f(x) = |theta_tilde| on x > 0 (f is odd).
    const double target = std::abs(theta_tilde);
    const double sgn = sign(theta_tilde);
    constexpr double tol = 1e-12;

    // f(x) <= x^omega, so the root is at least target^{1/omega}.
    double lo = std::pow(target, 1.0 / cfg.omega);
    if (sparsify(lo, cfg) > target) lo = 0.0;
    double hi = std::max(1.0, std::pow(target, 1.0 / cfg.omega));
    while (sparsify(hi, cfg) < target) hi *= 2.0;

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double fx = sparsify(x, cfg) - target;
        if (fx == 0.0) break;
        if (fx > 0.0) hi = x; else lo = x;
        const double dfx = sparsify_deriv(x, cfg);
        double next = (dfx > 0.0) ? x - fx / dfx : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection safeguard
        x = next;
    }
    return sgn * x;
}

Eigen::VectorXd sparsify(const Eigen::VectorXd& theta, const SparsifyConfig& cfg) {
    return theta.unaryExpr([&](double t) { return sparsify(t, cfg); });
}

Eigen::VectorXd sparsify_deriv(const Eigen::VectorXd& theta, const SparsifyConfig& cfg) {
    return theta.unaryExpr([&](double t) { return sparsify_deriv(t, cfg); });
}

Eigen::VectorXd sparsify_inverse(const Eigen::VectorXd& theta_tilde, const SparsifyConfig& cfg) {
    return theta_tilde.unaryExpr([&](double t) { return sparsify_inverse(t, cfg); });
}

double induced_density_analytic(double theta_tilde) {
    if (theta_tilde == 0.0)
        throw SingularDensity("induced_density_analytic: density diverges at theta_tilde = 0");
    const double a = std::abs(theta_tilde);
    return kInvSqrt2Pi * std::exp(-a / 2.0) / (2.0 * std::sqrt(a));
}

double effective_regularizer(double theta_tilde) {
    return -std::log(induced_density_analytic(theta_tilde));
}

Histogram induced_density_mc(const SparsifyConfig& cfg, std::size_t n_samples,
                             std::span<const double> bin_edges, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("induced_density_mc: n_samples must be >= 1");
    if (bin_edges.size() < 2) throw std::invalid_argument("induced_density_mc: need >= 2 bin edges");
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        if (!(bin_edges[i] < bin_edges[i + 1]))
            throw std::invalid_argument("induced_density_mc: bin_edges must be strictly increasing");

    Histogram h;
    h.edges.assign(bin_edges.begin(), bin_edges.end());
    h.mass.assign(bin_edges.size() - 1, 0.0);
    h.n_samples = n_samples;

    auto gen = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> counts(h.mass.size(), 0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = sparsify(normal(gen), cfg);
        if (t < h.edges.front() || t >= h.edges.back()) continue;
        const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), t);
        counts[static_cast<std::size_t>(it - h.edges.begin()) - 1]++;
        h.n_in_range++;
    }
    if (h.n_in_range == 0) throw EmptyBins("induced_density_mc: all samples outside bin range");
    for (std::size_t b = 0; b < counts.size(); ++b)
        h.mass[b] = static_cast<double>(counts[b]) / static_cast<double>(h.n_in_range);
    return h;
}

}  // namespace sparsevl
