#include "sparsevl/vl_engine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sparsevl/errors.hpp"
#include "sparsevl/rng.hpp"
#include "sparsevl/transforms.hpp"

namespace sparsevl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_y_length(const GlmModel& model, const Eigen::VectorXd& y, const char* where) {
    if (y.size() != model.n_y())
        throw DimensionMismatch(std::string(where) + ": y length " + std::to_string(y.size()) +
                                " != n_y " + std::to_string(model.n_y()));
}

double energy_from_parts(double residual_ss, double theta_ss, const GlmModel& model,
                         const PriorSpec& prior, double sigma2) {
    const auto ny = static_cast<double>(model.n_y());
    const auto nt = static_cast<double>(model.n_theta());
    const double cy = prior.eq9_literal ? 1.0 : ny;
    const double ct = prior.eq9_literal ? 1.0 : nt;
    return -0.5 * (ny * kLog2Pi + cy * std::log(sigma2) + residual_ss / sigma2 + nt * kLog2Pi +
                   ct * std::log(prior.alpha2) + theta_ss / prior.alpha2);
}

// Ridge weights of the identity-mapping problem; also the exact posterior
// mean of the linear-Gaussian model.
Eigen::VectorXd ridge_weights(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2,
                              double alpha2) {
    const Eigen::Index nt = X.cols();
    Eigen::MatrixXd A = X.transpose() * X / sigma2;
    A.diagonal().array() += 1.0 / alpha2;
    return A.llt().solve(X.transpose() * y / sigma2);
}

}  // namespace

void PriorSpec::validate() const {
    if (!(alpha2 > 0.0)) throw std::invalid_argument("PriorSpec: alpha2 must be > 0");
    if (!(noise_a0 > 0.0) || !(noise_b0 > 0.0))
        throw std::invalid_argument("PriorSpec: noise hyperpriors must be > 0");
    if (sigma2_fixed && !(*sigma2_fixed > 0.0))
        throw std::invalid_argument("PriorSpec: sigma2_fixed must be > 0");
}

double variational_energy(const Eigen::VectorXd& theta, const GlmModel& model,
                          const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y) {
    check_y_length(model, y, "variational_energy");
    const Eigen::VectorXd r = y - predict(model, theta);
    return energy_from_parts(r.squaredNorm(), theta.squaredNorm(), model, prior, sigma2);
}

Eigen::VectorXd energy_gradient(const Eigen::VectorXd& theta, const GlmModel& model,
                                const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y) {
    check_y_length(model, y, "energy_gradient");
    const Eigen::VectorXd r = y - predict(model, theta);
    return predict_jacobian(model, theta).transpose() * r / sigma2 - theta / prior.alpha2;
}

Eigen::MatrixXd gauss_newton_hessian(const Eigen::VectorXd& theta, const GlmModel& model,
                                     const PriorSpec& prior, double sigma2) {
    const Eigen::MatrixXd J = predict_jacobian(model, theta);
    Eigen::MatrixXd H = J.transpose() * J / sigma2;
    H.diagonal().array() += 1.0 / prior.alpha2;
    return -H;
}

double update_noise(double residual_ss, double trace_term, Eigen::Index n_y,
                    const PriorSpec& prior) {
    if (residual_ss < 0.0 || trace_term < 0.0)
        throw std::invalid_argument("update_noise: inputs must be nonnegative");
    if (n_y < 1) throw std::invalid_argument("update_noise: n_y must be >= 1");
    const double a = prior.noise_a0 + static_cast<double>(n_y) / 2.0;
    const double b = prior.noise_b0 + 0.5 * (residual_ss + trace_term);
    return b / a;
}

double free_energy(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, const GlmModel& model,
                   const PriorSpec& prior, double sigma2, const Eigen::VectorXd& y) {
    const Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("free_energy: Sigma has no Cholesky factorization");
    const double log_det =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const auto nt = static_cast<double>(model.n_theta());
    return variational_energy(mu, model, prior, sigma2, y) + 0.5 * log_det + 0.5 * nt * kLog2Pi;
}

Posterior infer(const GlmModel& model, const PriorSpec& prior, const Eigen::VectorXd& y,
                const OptimOptions& opts) {
    check_y_length(model, y, "infer");
    const Eigen::Index nt = model.n_theta();
    const Eigen::Index ny = model.n_y();

    double sigma2 = prior.sigma2_fixed.value_or(
        opts.sigma2_init > 0.0 ? opts.sigma2_init : prior.noise_b0 / prior.noise_a0);

    // XtX is reused every iteration: with J = X diag(d), J'J = (d d') o XtX.
    const Eigen::MatrixXd XtX = model.X.transpose() * model.X;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nt, nt);

    Eigen::VectorXd theta;
    switch (opts.init) {
        case InitKind::Zero:
            theta = Eigen::VectorXd::Zero(nt);
            break;
        case InitKind::RidgeRemap: {
            const Eigen::VectorXd w = ridge_weights(model.X, y, sigma2, prior.alpha2);
            theta = model.is_sparse() ? sparsify_inverse(w, *model.sparsify_cfg) : w;
            break;
        }
        case InitKind::Random: {
            auto gen = make_engine(opts.init_seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            theta.resize(nt);
            for (Eigen::Index j = 0; j < nt; ++j) theta[j] = opts.init_scale * normal(gen);
            break;
        }
    }

    auto deriv = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
        return model.is_sparse() ? sparsify_deriv(th, *model.sparsify_cfg)
                                 : Eigen::VectorXd::Ones(nt).eval();
    };
    auto neg_hessian = [&](const Eigen::VectorXd& d, double s2) -> Eigen::MatrixXd {
        Eigen::MatrixXd H = ((d * d.transpose()).cwiseProduct(XtX)) / s2;
        H.diagonal().array() += 1.0 / prior.alpha2;
        return H;
    };

    Posterior post;
    double energy = variational_energy(theta, model, prior, sigma2, y);
    post.energy_trace.push_back(energy);

    double damping = opts.lm_damping_init;
    bool converged = false;
    int accepted = 0;

    // Alternating ascent: a guarded conjugate refresh of sigma2 at the
    // current theta, then one damped Gauss-Newton step on theta. The noise
    // refresh runs first so the very first iteration already sees a
    // data-scale sigma2 instead of the prior guess; otherwise an
    // underdetermined model can interpolate gross noise at the initial
    // sigma2 and lock the guard out of the honest noise level. Convergence
    // is judged on the energy change of the whole iteration, so a stalled
    // theta step with a still-moving sigma2 keeps iterating.
    for (int iter = 0; iter < opts.max_iter && !converged; ++iter) {
        const double iter_start_energy = energy;

        const Eigen::VectorXd r = y - predict(model, theta);
        const Eigen::VectorXd d = deriv(theta);
        const Eigen::VectorXd grad =
            (model.X.transpose() * r).cwiseProduct(d) / sigma2 - theta / prior.alpha2;
        const Eigen::MatrixXd H = neg_hessian(d, sigma2);

        int solve_failures = 0;
        for (int retry = 0; retry <= 40; ++retry) {
            const Eigen::LLT<Eigen::MatrixXd> llt(H + damping * eye);
            if (llt.info() != Eigen::Success) {
                if (++solve_failures > 40)
                    throw LinearSolveFailure("infer: damped curvature not factorizable");
                damping *= 10.0;
                continue;
            }
            const Eigen::VectorXd step = llt.solve(grad);
            if (step.lpNorm<Eigen::Infinity>() < opts.step_tol) break;
            const Eigen::VectorXd cand = theta + step;
            const double cand_energy = variational_energy(cand, model, prior, sigma2, y);
            if (cand_energy > energy) {
                theta = cand;
                energy = cand_energy;
                damping = std::max(damping / 10.0, opts.lm_damping_init);
                ++accepted;
                break;
            }
            damping *= 10.0;
        }

        if (!prior.sigma2_fixed) {
            // Refresh sigma2 at the current theta by solving the conjugate
            // update self-consistently: trace_term(s2) = tr(J Sigma J') =
            // sum_k s2 a2 l_k / (a2 l_k + s2) over the spectrum l_k of J J',
            // so the fixed point is the root of a strictly increasing scalar
            // function. (The one-step map contracts at ~1 - a0/n_y when
            // n_theta >= n_y, far too slowly to interleave.) Kept only when
            // it does not lower the plug-in energy, so the trace stays
            // monotone.
            const Eigen::VectorXd d_cur = deriv(theta);
            const Eigen::VectorXd r_cur = y - predict(model, theta);
            const double ss = r_cur.squaredNorm();
            Eigen::VectorXd lam;
            if (ny <= nt) {
                const Eigen::MatrixXd M = model.X * d_cur.array().square().matrix().asDiagonal() *
                                          model.X.transpose();
                lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues();
            } else {
                const Eigen::MatrixXd M = (d_cur * d_cur.transpose()).cwiseProduct(XtX);
                lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues();
            }
            lam = lam.cwiseMax(0.0);
            const auto conjugate = [&](double s2) {
                double tr = 0.0;
                for (Eigen::Index k = 0; k < lam.size(); ++k)
                    tr += s2 * prior.alpha2 * lam[k] / (prior.alpha2 * lam[k] + s2);
                return update_noise(ss, tr, ny, prior);
            };
            double lo = update_noise(ss, 0.0, ny, prior);
            double hi = update_noise(ss, prior.alpha2 * lam.sum(), ny, prior);
            for (int b = 0; b < 200 && hi - lo > 1e-14 * hi; ++b) {
                const double mid = 0.5 * (lo + hi);
                (conjugate(mid) > mid ? lo : hi) = mid;
            }
            const double cand_sigma2 = 0.5 * (lo + hi);
            const double cand_energy = variational_energy(theta, model, prior, cand_sigma2, y);
            if (cand_energy >= energy && cand_sigma2 != sigma2) {
                sigma2 = cand_sigma2;
                energy = cand_energy;
                damping = opts.lm_damping_init;  // new surface, forget old damping
            }
        }

        if (energy > iter_start_energy) post.energy_trace.push_back(energy);
        if (std::abs(energy - iter_start_energy) <=
            opts.energy_tol * (1.0 + std::abs(iter_start_energy)))
            converged = true;
    }

    post.mu = theta;
    post.sigma2 = sigma2;
    post.n_iter = accepted;
    post.converged = converged;

    const Eigen::MatrixXd H_final = neg_hessian(deriv(theta), sigma2);
    const Eigen::LLT<Eigen::MatrixXd> llt(H_final);
    if (llt.info() != Eigen::Success)
        throw LinearSolveFailure("infer: final curvature not factorizable");
    post.Sigma = llt.solve(eye);
    post.Sigma = 0.5 * (post.Sigma + post.Sigma.transpose()).eval();
    post.free_energy = free_energy(post.mu, post.Sigma, model, prior, sigma2, y);
    return post;
}

Posterior infer_multistart(const GlmModel& model, const PriorSpec& prior,
                           const Eigen::VectorXd& y, const OptimOptions& opts,
                           const MultistartOptions& ms) {
    if (ms.n_restarts < 1)
        throw std::invalid_argument("infer_multistart: n_restarts must be >= 1");
    const double data_scale_sigma2 =
        std::max(y.squaredNorm() / static_cast<double>(y.size()),
                 std::numeric_limits<double>::min());

    if (!model.is_sparse()) {
        // Concave in theta: only the noise start matters. Underdetermined
        // models can interpolate gross noise when started at the prior noise
        // guess, which is a genuine (bad) joint local optimum; the data-scale
        // start lands in the honest basin. Keep the better evidence.
        OptimOptions o = opts;
        o.init_seed = derive_seed(ms.seed, {0});
        Posterior a = infer(model, prior, y, o);
        if (prior.sigma2_fixed) return a;
        o.sigma2_init = data_scale_sigma2;
        Posterior b = infer(model, prior, y, o);
        return a.free_energy >= b.free_energy ? a : b;
    }

    auto active_count = [&](const Posterior& p) {
        const Eigen::VectorXd w = model_weights(model, p.mu);
        Eigen::Index n = 0;
        for (Eigen::Index i = 0; i < w.size(); ++i) n += std::abs(w[i]) > ms.active_weight_cut;
        return n;
    };

    // The flat zone of the transform keeps near-zero starts from ever
    // interpolating the data, so the sparse model does not need the
    // data-scale noise start: its restarts vary theta only.
    std::vector<Posterior> runs;
    runs.reserve(static_cast<std::size_t>(ms.n_restarts));
    for (int j = 0; j < ms.n_restarts; ++j) {
        OptimOptions o = opts;
        o.init_seed = derive_seed(ms.seed, {static_cast<std::uint64_t>(j)});
        runs.push_back(infer(model, prior, y, o));
    }
    double f_best = -std::numeric_limits<double>::infinity();
    for (const auto& p : runs) f_best = std::max(f_best, p.free_energy);

    std::size_t pick = 0;
    Eigen::Index pick_active = -1;
    for (std::size_t j = 0; j < runs.size(); ++j) {
        if (runs[j].free_energy < f_best - ms.tie_break_nats) continue;
        const Eigen::Index a = active_count(runs[j]);
        if (pick_active < 0 || a < pick_active ||
            (a == pick_active && runs[j].free_energy > runs[pick].free_energy)) {
            pick = j;
            pick_active = a;
        }
    }
    return runs[pick];
}

nlohmann::json posterior_to_json(const Posterior& post, bool full_sigma) {
    nlohmann::json j;
    j["mu"] = std::vector<double>(post.mu.data(), post.mu.data() + post.mu.size());
    const Eigen::VectorXd diag = post.Sigma.diagonal();
    j["sigma_diag"] = std::vector<double>(diag.data(), diag.data() + diag.size());
    j["free_energy"] = post.free_energy;
    j["sigma2"] = post.sigma2;
    j["n_iter"] = post.n_iter;
    j["converged"] = post.converged;
    if (full_sigma) {
        std::vector<double> rows;
        rows.reserve(static_cast<std::size_t>(post.Sigma.size()));
        for (Eigen::Index i = 0; i < post.Sigma.rows(); ++i)
            for (Eigen::Index k = 0; k < post.Sigma.cols(); ++k) rows.push_back(post.Sigma(i, k));
        j["sigma_row_major"] = rows;
    }
    return j;
}

}  // namespace sparsevl
