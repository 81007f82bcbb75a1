#include "sparsevl/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sparsevl/errors.hpp"
#include "sparsevl/rng.hpp"

namespace sparsevl {

namespace {

void check_theta_length(const GlmModel& model, const Eigen::VectorXd& theta, const char* where) {
    if (theta.size() != model.n_theta())
        throw DimensionMismatch(std::string(where) + ": theta length " +
                                std::to_string(theta.size()) + " != n_theta " +
                                std::to_string(model.n_theta()));
}

}  // namespace

GlmModel make_design(Eigen::Index n_y, Eigen::Index n_theta, std::uint64_t seed) {
    if (n_y < 1 || n_theta < 1)
        throw std::invalid_argument("make_design: dimensions must be >= 1");
    auto gen = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(n_y, n_theta);
    for (Eigen::Index i = 0; i < n_y; ++i)
        for (Eigen::Index j = 0; j < n_theta; ++j) X(i, j) = normal(gen);
    return {std::move(X), std::nullopt};
}

Eigen::VectorXd model_weights(const GlmModel& model, const Eigen::VectorXd& theta) {
    return model.is_sparse() ? sparsify(theta, *model.sparsify_cfg) : theta;
}

Eigen::VectorXd predict(const GlmModel& model, const Eigen::VectorXd& theta) {
    check_theta_length(model, theta, "predict");
    return model.X * model_weights(model, theta);
}

Eigen::MatrixXd predict_jacobian(const GlmModel& model, const Eigen::VectorXd& theta) {
    check_theta_length(model, theta, "predict_jacobian");
    if (!model.is_sparse()) return model.X;
    return model.X * sparsify_deriv(theta, *model.sparsify_cfg).asDiagonal();
}

SimulatedDataset simulate(const GlmModel& model, const Scenario& scenario, double sigma,
                          std::uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("simulate: sigma must be > 0");
    if (scenario.kind == Scenario::Kind::Sparse && !(scenario.rate >= 0.0 && scenario.rate <= 1.0))
        throw std::invalid_argument("simulate: sparse rate must be in [0,1]");

    const Eigen::Index n = model.n_theta();
    auto gen = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SimulatedDataset out;
    out.scenario = scenario;
    out.sigma_true = sigma;
    out.theta_true.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) out.theta_true[j] = normal(gen);
    out.zero_mask.assign(static_cast<std::size_t>(n), false);

    if (scenario.kind == Scenario::Kind::Sparse) {
        const auto n_zero =
            static_cast<Eigen::Index>(std::floor(scenario.rate * static_cast<double>(n)));
        // Partial Fisher-Yates: the first n_zero entries of a shuffled index
        // vector form a uniformly random subset. Draws nothing when n_zero = 0,
        // so rate = 0 matches the Gaussian scenario stream exactly.
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        for (Eigen::Index k = 0; k < n_zero; ++k) {
            std::uniform_int_distribution<Eigen::Index> pick(k, n - 1);
            std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(gen))]);
            const auto j = idx[static_cast<std::size_t>(k)];
            out.theta_true[j] = 0.0;
            out.zero_mask[static_cast<std::size_t>(j)] = true;
        }
    }

    out.y = model.X * out.theta_true;
    for (Eigen::Index i = 0; i < model.n_y(); ++i) out.y[i] += sigma * normal(gen);
    return out;
}

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json dataset_to_json(const GlmModel& model, const SimulatedDataset& data,
                               std::uint64_t seed) {
    nlohmann::json j;
    j["n_y"] = model.n_y();
    j["n_theta"] = model.n_theta();
    std::vector<double> x_rows;
    x_rows.reserve(static_cast<std::size_t>(model.X.size()));
    for (Eigen::Index i = 0; i < model.n_y(); ++i)
        for (Eigen::Index k = 0; k < model.n_theta(); ++k) x_rows.push_back(model.X(i, k));
    j["X_row_major"] = x_rows;
    j["y"] = vec_to_json(data.y);
    j["theta_true"] = vec_to_json(data.theta_true);
    j["zero_mask"] = data.zero_mask;
    j["sigma_true"] = data.sigma_true;
    if (data.scenario.kind == Scenario::Kind::Sparse) {
        j["scenario"] = {{"kind", "sparse"}, {"rate", data.scenario.rate}};
    } else {
        j["scenario"] = {{"kind", "gaussian"}};
    }
    j["seed"] = seed;
    return j;
}

LoadedDataset dataset_from_json(const nlohmann::json& j) {
    LoadedDataset out;
    const auto n_y = j.at("n_y").get<Eigen::Index>();
    const auto n_theta = j.at("n_theta").get<Eigen::Index>();
    const auto x_rows = j.at("X_row_major").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(x_rows.size()) != n_y * n_theta)
        throw DimensionMismatch("dataset_from_json: X_row_major size mismatch");
    out.model.X.resize(n_y, n_theta);
    for (Eigen::Index i = 0; i < n_y; ++i)
        for (Eigen::Index k = 0; k < n_theta; ++k)
            out.model.X(i, k) = x_rows[static_cast<std::size_t>(i * n_theta + k)];
    out.data.y = vec_from_json(j.at("y"));
    out.data.theta_true = vec_from_json(j.at("theta_true"));
    out.data.zero_mask = j.at("zero_mask").get<std::vector<bool>>();
    out.data.sigma_true = j.at("sigma_true").get<double>();
    const auto& sc = j.at("scenario");
    if (sc.at("kind").get<std::string>() == "sparse")
        out.data.scenario = Scenario::sparse(sc.at("rate").get<double>());
    else
        out.data.scenario = Scenario::gaussian();
    out.seed = j.at("seed").get<std::uint64_t>();
    return out;
}

}  // namespace sparsevl
