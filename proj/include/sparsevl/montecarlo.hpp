#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsevl/comparison.hpp"
#include "sparsevl/glm.hpp"
#include "sparsevl/vl_engine.hpp"

namespace sparsevl {

enum class SweepScenario { Sparse, Gaussian, Both };

struct SweepGrid {
    std::vector<double> precisions{0.01, 0.1, 1.0, 10.0, 100.0};  // sigma^{-1} levels
    std::vector<double> sparsity_rates{0.0, 0.25, 0.5, 0.75, 0.9375};
    int n_reps = 32;
    Eigen::Index n_y = 64;
    Eigen::Index n_theta = 128;
    std::uint64_t base_seed = 1;
    SweepScenario scenario = SweepScenario::Sparse;

    void validate() const;
};

/// Everything a replication needs beyond the grid cell itself. The defaults
/// are the calibrated benchmark configuration: a sparser-than-quadratic
/// transform, near-zero random starts, and restart selection with an Occam
/// tie-break.
struct SweepSettings {
    SweepGrid grid;
    SparsifyConfig transform = SparsifyConfig::smoothed(0.03, 2.6);
    PriorSpec prior;
    OptimOptions optim;
    MultistartOptions multistart;
    double zero_threshold = kDefaultZeroThreshold;

    SweepSettings() {
        optim.init = InitKind::Random;
        optim.init_scale = 0.5;
    }
};

struct RepRecord {
    std::uint64_t seed = 0;
    Scenario::Kind scenario = Scenario::Kind::Sparse;
    double precision = 0.0;
    double sparsity_rate = 0.0;
    std::size_t i_prec = 0, i_rate = 0;
    int rep = 0;

    double f_sparse = 0.0, f_gauss = 0.0;
    std::optional<double> r_sparse, r_gauss;
    std::optional<double> tpr, tnr;
    double est_sparsity = 0.0;
    long tp = 0, fn = 0, tn = 0, fp = 0;
    double delta_f = 0.0;
    std::optional<double> delta_r;
    double sigma2_sparse = 0.0, sigma2_gauss = 0.0;
    int iter_sparse = 0, iter_gauss = 0;
    bool converged_sparse = false, converged_gauss = false;

    bool failed = false;
    std::string fail_reason;
};

struct CellSummary {
    Scenario::Kind scenario = Scenario::Kind::Sparse;
    double precision = 0.0;
    double sparsity_rate = 0.0;
    int n_records = 0;  // non-failed replications
    int n_failed = 0;
    CellMetrics means;
    // Rates from pooled confusion counts across the cell, alongside the
    // per-dataset averages in `means`.
    std::optional<double> pooled_tpr, pooled_tnr;
};

struct SweepResult {
    std::vector<RepRecord> records;  // ordered by (scenario, precision, rate, rep)
    std::vector<CellSummary> cells;
    bool complete = true;
};

/// One replication: child seed from (base_seed, scenario, cell indices, rep),
/// fresh design + dataset at sigma = 1/precision, inversion under the sparse
/// and identity mappings with the same prior, metrics from the sparse model's
/// posterior-zero probabilities. Inversion failures come back flagged.
RepRecord run_cell(const SweepSettings& settings, std::size_t i_prec, std::size_t i_rate, int rep,
                   Scenario::Kind kind);

/// All cells x replications. `jobs` caps worker threads; records land in
/// preassigned slots so the result is identical for any parallelism.
/// `interrupted`, when provided and returning true, stops scheduling new
/// replications and marks the result incomplete.
SweepResult run_sweep(const SweepSettings& settings, int jobs = 1,
                      const std::function<bool()>& interrupted = {});

struct QuantileBin {
    std::size_t n = 0;
    double mean_delta_r = 0.0;
    double mean_delta_f = 0.0;
    double std_delta_f = 0.0;
};

/// Sorts records by delta_r and splits them into n_bins equal-count bins
/// (remainder spread over the leading bins). Throws TooFewRecords if there
/// are fewer records than bins.
std::vector<QuantileBin> quantile_bins(std::vector<std::pair<double, double>> delta_records,
                                       std::size_t n_bins = 10);

/// Cell summaries recomputed from raw records (deterministic fold in record
/// order).
std::vector<CellSummary> summarize_cells(const std::vector<RepRecord>& records);

void write_raw_csv(std::ostream& os, const std::vector<RepRecord>& records);
void write_cells_csv(std::ostream& os, const std::vector<CellSummary>& cells);
void write_bins_csv(std::ostream& os, const std::vector<QuantileBin>& bins);

/// (delta_r, delta_f) pairs from a raw CSV; rows with absent delta_r are
/// skipped.
std::vector<std::pair<double, double>> read_delta_records_csv(std::istream& is);

std::string csv_num(double v);

}  // namespace sparsevl
