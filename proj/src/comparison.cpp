#include "sparsevl/comparison.hpp"

#include <cmath>
#include <stdexcept>

#include "sparsevl/errors.hpp"

namespace sparsevl {

double savage_dickey_log_bf(double mu_i, double sigma2_ii, double alpha2) {
    if (!(sigma2_ii > 0.0) || !(alpha2 > 0.0))
        throw std::invalid_argument("savage_dickey_log_bf: variances must be > 0");
    // log N(0;0,a2) - log N(0;mu,s2) = (1/2) log(s2/a2) + mu^2/(2 s2)
    return 0.5 * std::log(sigma2_ii / alpha2) + mu_i * mu_i / (2.0 * sigma2_ii);
}

double p_zero(double log_bf) {
    if (log_bf >= 0.0) {
        const double e = std::exp(-log_bf);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(log_bf));
}

Eigen::VectorXd p_zero_all(const Posterior& post, double alpha2) {
    Eigen::VectorXd out(post.mu.size());
    for (Eigen::Index i = 0; i < post.mu.size(); ++i)
        out[i] = p_zero(savage_dickey_log_bf(post.mu[i], post.Sigma(i, i), alpha2));
    return out;
}

double ZeroDetection::est_sparsity() const {
    if (declared_zero.empty()) return 0.0;
    long n = 0;
    for (bool z : declared_zero) n += z;
    return static_cast<double>(n) / static_cast<double>(declared_zero.size());
}

ZeroDetection detect(const Eigen::VectorXd& p_zero, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("detect: threshold must be in (0,1)");
    ZeroDetection out;
    out.p_zero = p_zero;
    out.threshold = threshold;
    out.declared_zero.resize(static_cast<std::size_t>(p_zero.size()));
    for (Eigen::Index i = 0; i < p_zero.size(); ++i)
        out.declared_zero[static_cast<std::size_t>(i)] = p_zero[i] > threshold;
    return out;
}

DetectionRates detection_rates(const std::vector<bool>& declared_zero,
                               const std::vector<bool>& true_zero) {
    if (declared_zero.size() != true_zero.size())
        throw LengthMismatch("detection_rates: mask lengths differ");
    DetectionRates r;
    long declared = 0;
    for (std::size_t i = 0; i < declared_zero.size(); ++i) {
        declared += declared_zero[i];
        if (true_zero[i]) {
            declared_zero[i] ? ++r.tn : ++r.fp;
        } else {
            declared_zero[i] ? ++r.fn : ++r.tp;
        }
    }
    if (r.tp + r.fn > 0) r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.tn + r.fp > 0) r.tnr = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
    r.est_sparsity = declared_zero.empty()
                         ? 0.0
                         : static_cast<double>(declared) / static_cast<double>(declared_zero.size());
    return r;
}

std::optional<double> weight_correlation(const Eigen::VectorXd& theta_true, const Posterior& post,
                                         const GlmModel& model) {
    if (theta_true.size() != post.mu.size())
        throw LengthMismatch("weight_correlation: length mismatch");
    const Eigen::VectorXd est = model_weights(model, post.mu);
    const Eigen::Index n = theta_true.size();
    const double mean_a = theta_true.mean();
    const double mean_b = est.mean();
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double da = theta_true[i] - mean_a;
        const double db = est[i] - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

double compare_models(const Posterior& post_sparse, const Posterior& post_gauss) {
    return post_sparse.free_energy - post_gauss.free_energy;
}

}  // namespace sparsevl
