#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sparsevl/glm.hpp"

namespace sparsevl {

/// Gaussian prior N(0, alpha2 * I) on native parameters plus a Gamma
/// hyperprior Ga(noise_a0, noise_b0) on the noise precision. When
/// sigma2_fixed is set, noise estimation is disabled and that value is used
/// throughout.
struct PriorSpec {
    double alpha2 = 1.0;
    double noise_a0 = 1e-3;
    double noise_b0 = 1e-3;
    std::optional<double> sigma2_fixed;

    // Compatibility switch: drop the n_y / n_theta multiplicities on the
    // log-variance terms of the energy (single log sigma2 / log alpha2).
    // Off by default; the default is the fully normalized Gaussian log-joint.
    bool eq9_literal = false;

    void validate() const;
};

enum class InitKind { Zero, RidgeRemap, Random };

struct OptimOptions {
    int max_iter = 256;
    double energy_tol = 1e-9;   // relative energy change
    double step_tol = 1e-10;    // max-norm of the candidate step
    InitKind init = InitKind::RidgeRemap;
    double init_scale = 0.1;    // Random init std
    std::uint64_t init_seed = 0;
    double lm_damping_init = 1e-6;
    double sigma2_init = 0.0;  // starting noise variance; 0 = noise_b0 / noise_a0
};

struct Posterior {
    Eigen::VectorXd mu;
    Eigen::MatrixXd Sigma;
    double free_energy = 0.0;
    double sigma2 = 1.0;  // plug-in noise variance at convergence
    int n_iter = 0;       // accepted ascent steps
    bool converged = false;
    std::vector<double> energy_trace;  // strictly increasing over accepted steps
};

/// Log-joint of data and parameters:
///   I(theta) = -1/2 [ n_y log 2pi + n_y log sigma2 + ||y - g(theta)||^2 / sigma2
///                   + n_t log 2pi + n_t log alpha2 + theta'theta / alpha2 ]
/// With prior.eq9_literal the two log-variance terms lose their
/// multiplicities.
double variational_energy(const Eigen::VectorXd& theta, const GlmModel& model,
                          const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y);

/// Gradient of the variational energy: J'(y - g(theta))/sigma2 - theta/alpha2.
Eigen::VectorXd energy_gradient(const Eigen::VectorXd& theta, const GlmModel& model,
                                const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y);

/// Gauss-Newton curvature -(J'J/sigma2 + I/alpha2); always negative-definite.
Eigen::MatrixXd gauss_newton_hessian(const Eigen::VectorXd& theta, const GlmModel& model,
                                     const PriorSpec& prior, double sigma2);

/// Conjugate-form noise-variance update:
///   a = a0 + n_y/2,  b = b0 + (residual_ss + trace_term)/2,  sigma2 = b/a.
double update_noise(double residual_ss, double trace_term, Eigen::Index n_y,
                    const PriorSpec& prior);

/// Laplace approximation to the log evidence:
///   F = I(mu) + 1/2 log|Sigma| + (n_theta/2) log 2pi.
/// Throws NotPositiveDefinite if Sigma has no Cholesky factor.
double free_energy(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, const GlmModel& model,
                   const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y);

/// Levenberg-Marquardt ascent on the variational energy. Steps are accepted
/// only when the energy strictly increases; after each accepted step the
/// noise variance is refreshed by the conjugate update (unless fixed), kept
/// only when it does not lower the energy so the trace stays monotone.
Posterior infer(const GlmModel& model, const PriorSpec& prior, const Eigen::VectorXd& y,
                const OptimOptions& opts = {});

/// Restart policy over the joint (theta, sigma2) initialization space. Runs
/// infer from n_restarts random starts (seeds derived from seed) plus one
/// start at the data-scale noise level, and keeps the best free energy,
/// except that runs within tie_break_nats of the best are considered
/// equivalent evidence and the one with the fewest active weights
/// (|weight| > active_weight_cut) wins the tie. Identity-mapping models are
/// concave in theta, so only the two noise starts are run.
struct MultistartOptions {
    int n_restarts = 3;
    double tie_break_nats = 6.0;
    double active_weight_cut = 1e-2;
    std::uint64_t seed = 0;
};

Posterior infer_multistart(const GlmModel& model, const PriorSpec& prior,
                           const Eigen::VectorXd& y, const OptimOptions& opts,
                           const MultistartOptions& ms);

nlohmann::json posterior_to_json(const Posterior& post, bool full_sigma = false);

}  // namespace sparsevl
