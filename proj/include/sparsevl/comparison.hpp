#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sparsevl/glm.hpp"
#include "sparsevl/vl_engine.hpp"

namespace sparsevl {

/// Default cutoff on P(theta_i = 0 | y): a parameter is declared non-zero
/// only when that probability drops to 5% or below (uncorrected per-parameter
/// FPR target); everything above the cutoff is declared zero.
inline constexpr double kDefaultZeroThreshold = 0.05;

/// Savage-Dickey log Bayes factor of the full model over the point-null
/// reduced model for one parameter:
///   log p(y|m) - log p(y|m0) = log N(0; 0, alpha2) - log N(0; mu_i, sigma2_ii).
double savage_dickey_log_bf(double mu_i, double sigma2_ii, double alpha2);

/// P(theta_i = 0 | y) = 1 / (1 + exp(log_bf)) under equal prior odds.
double p_zero(double log_bf);

/// Per-parameter posterior-zero probabilities from the marginals of a
/// variational-Laplace posterior.
Eigen::VectorXd p_zero_all(const Posterior& post, double alpha2);

struct ZeroDetection {
    Eigen::VectorXd p_zero;
    double threshold = kDefaultZeroThreshold;  // declared_zero[i] <=> p_zero[i] > threshold
    std::vector<bool> declared_zero;

    double est_sparsity() const;
};

ZeroDetection detect(const Eigen::VectorXd& p_zero, double threshold = kDefaultZeroThreshold);

/// Positive = truly non-zero parameter detected as non-zero; negative = truly
/// zero parameter declared zero. Degenerate denominators yield absent rates.
struct DetectionRates {
    std::optional<double> tpr;
    std::optional<double> tnr;
    double est_sparsity = 0.0;
    long tp = 0, fn = 0, tn = 0, fp = 0;
};

DetectionRates detection_rates(const std::vector<bool>& declared_zero,
                               const std::vector<bool>& true_zero);

/// Pearson correlation between data-generating weights and estimated weights
/// (mu for identity mapping, sparsify(mu) for the sparse mapping). Absent on
/// zero variance.
std::optional<double> weight_correlation(const Eigen::VectorXd& theta_true, const Posterior& post,
                                         const GlmModel& model);

/// F_sparse - F_gaussian; positive favors the sparse priors.
double compare_models(const Posterior& post_sparse, const Posterior& post_gauss);

/// Per-cell Monte-Carlo averages. Rates can be absent when every replication
/// in the cell had a degenerate denominator.
struct CellMetrics {
    double delta_f = 0.0;
    std::optional<double> delta_r;
    std::optional<double> tpr;
    std::optional<double> tnr;
    double est_sparsity = 0.0;
};

}  // namespace sparsevl
