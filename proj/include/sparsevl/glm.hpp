#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sparsevl/transforms.hpp"

namespace sparsevl {

/// Linear observation model y = X * w + noise, where the weights w are either
/// the parameters themselves (identity mapping) or their sparsify transform.
struct GlmModel {
    Eigen::MatrixXd X;
    std::optional<SparsifyConfig> sparsify_cfg;  // nullopt = identity mapping

    Eigen::Index n_y() const { return X.rows(); }
    Eigen::Index n_theta() const { return X.cols(); }
    bool is_sparse() const { return sparsify_cfg.has_value(); }

    GlmModel with_mapping(std::optional<SparsifyConfig> cfg) const { return {X, std::move(cfg)}; }
};

struct Scenario {
    enum class Kind { Sparse, Gaussian };
    Kind kind = Kind::Gaussian;
    double rate = 0.0;  // fraction of exactly-zero weights, Sparse only

    static Scenario sparse(double rate) { return {Kind::Sparse, rate}; }
    static Scenario gaussian() { return {Kind::Gaussian, 0.0}; }
};

struct SimulatedDataset {
    Eigen::VectorXd y;
    Eigen::VectorXd theta_true;   // data-generating weights (multiply X directly)
    std::vector<bool> zero_mask;  // true where theta_true is exactly 0
    double sigma_true = 1.0;
    Scenario scenario;
};

/// Design matrix with i.i.d. standard-normal entries; identity mapping.
GlmModel make_design(Eigen::Index n_y, Eigen::Index n_theta, std::uint64_t seed);

/// Weights entering the linear map: theta (identity) or sparsify(theta).
Eigen::VectorXd model_weights(const GlmModel& model, const Eigen::VectorXd& theta);

/// g(theta) = X * model_weights(theta). Throws DimensionMismatch.
Eigen::VectorXd predict(const GlmModel& model, const Eigen::VectorXd& theta);

/// d g / d theta = X (identity) or X * diag(sparsify_deriv(theta)).
Eigen::MatrixXd predict_jacobian(const GlmModel& model, const Eigen::VectorXd& theta);

/// Draws weights per scenario and observations y = X*theta_true + eps,
/// eps i.i.d. N(0, sigma^2). Sparse scenario zeroes a uniformly random subset
/// of floor(rate * n_theta) indices. Deterministic given seed.
SimulatedDataset simulate(const GlmModel& model, const Scenario& scenario, double sigma,
                          std::uint64_t seed);

nlohmann::json dataset_to_json(const GlmModel& model, const SimulatedDataset& data,
                               std::uint64_t seed);

struct LoadedDataset {
    GlmModel model;
    SimulatedDataset data;
    std::uint64_t seed = 0;
};
LoadedDataset dataset_from_json(const nlohmann::json& j);

}  // namespace sparsevl
