#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace sparsevl {

enum class SparsifyMode { Hard, Smoothed };

/// Configuration of the sparsify remapping family.
///
/// The map is odd, strictly monotone and one-to-one:
///   Hard:      f(theta) = sign(theta) * |theta|^omega
///   Smoothed:  f(theta) = (2*sigmoid(theta/rho) - 1) * |theta|^omega
/// Hard is the rho -> 0 limit of Smoothed. omega = 2 emulates l1-like
/// shrinkage under a Gaussian prior on native theta; omega = 1 (Hard) is the
/// identity.
struct SparsifyConfig {
    double rho = 0.01;   // sigmoid temperature, Smoothed mode only
    double omega = 2.0;  // effective norm-order exponent, >= 1
    SparsifyMode mode = SparsifyMode::Smoothed;

    static SparsifyConfig hard(double omega = 2.0) { return {0.0, omega, SparsifyMode::Hard}; }
    static SparsifyConfig smoothed(double rho = 0.01, double omega = 2.0) {
        return {rho, omega, SparsifyMode::Smoothed};
    }

    /// Throws std::invalid_argument on rho <= 0 (Smoothed) or omega < 1.
    void validate() const;
};

/// Logistic sigmoid with temperature rho: 1 / (1 + exp(-x/rho)).
/// Saturates to 0/1 for extreme x/rho without overflow.
double sigmoid(double x, double rho);

double sparsify(double theta, const SparsifyConfig& cfg);
Eigen::VectorXd sparsify(const Eigen::VectorXd& theta, const SparsifyConfig& cfg);

/// Analytic derivative of sparsify. Throws NonDifferentiable for Hard mode
/// with omega < 2 at theta = 0.
double sparsify_deriv(double theta, const SparsifyConfig& cfg);
Eigen::VectorXd sparsify_deriv(const Eigen::VectorXd& theta, const SparsifyConfig& cfg);

/// Inverse map. Hard mode is the signed |.|^{1/omega} root; Smoothed mode is
/// solved by safeguarded bisection + Newton to 1e-12 absolute tolerance.
double sparsify_inverse(double theta_tilde, const SparsifyConfig& cfg);
Eigen::VectorXd sparsify_inverse(const Eigen::VectorXd& theta_tilde, const SparsifyConfig& cfg);

/// Change-of-variables density of theta_tilde = f_hard(theta), theta ~ N(0,1),
/// omega = 2:  p(t) = (2*pi)^{-1/2} * exp(-|t|/2) / (2*sqrt(|t|)).
/// Throws SingularDensity at theta_tilde = 0 (integrable singularity).
double induced_density_analytic(double theta_tilde);

/// -log(induced_density_analytic), no dropped constants.
double effective_regularizer(double theta_tilde);

struct Histogram {
    std::vector<double> edges;  // strictly increasing, size nbins + 1
    std::vector<double> mass;   // size nbins; sums to 1 over in-range samples
    std::size_t n_samples = 0;
    std::size_t n_in_range = 0;

    double center(std::size_t bin) const { return 0.5 * (edges[bin] + edges[bin + 1]); }
    double width(std::size_t bin) const { return edges[bin + 1] - edges[bin]; }
};

/// Monte-Carlo histogram of sparsify-transformed standard-normal draws.
/// Masses are normalized over in-range samples. Throws EmptyBins if every
/// sample falls outside the bin range.
Histogram induced_density_mc(const SparsifyConfig& cfg, std::size_t n_samples,
                             std::span<const double> bin_edges, std::uint64_t seed);

}  // namespace sparsevl
