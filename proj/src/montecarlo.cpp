#include "sparsevl/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sparsevl/errors.hpp"
#include "sparsevl/rng.hpp"

namespace sparsevl {

void SweepGrid::validate() const {
    if (precisions.empty() || sparsity_rates.empty())
        throw std::invalid_argument("SweepGrid: precision and rate sequences must be nonempty");
    for (double p : precisions)
        if (!(p > 0.0)) throw std::invalid_argument("SweepGrid: precisions must be > 0");
    for (double r : sparsity_rates)
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("SweepGrid: sparsity rates must be in [0,1]");
    if (n_reps < 1) throw std::invalid_argument("SweepGrid: n_reps must be >= 1");
    if (n_y < 1 || n_theta < 1) throw std::invalid_argument("SweepGrid: dimensions must be >= 1");
}

RepRecord run_cell(const SweepSettings& settings, std::size_t i_prec, std::size_t i_rate, int rep,
                   Scenario::Kind kind) {
    const SweepGrid& grid = settings.grid;
    RepRecord rec;
    rec.scenario = kind;
    rec.i_prec = i_prec;
    rec.i_rate = i_rate;
    rec.rep = rep;
    rec.precision = grid.precisions.at(i_prec);
    rec.sparsity_rate = grid.sparsity_rates.at(i_rate);
    rec.seed = derive_seed(grid.base_seed,
                           {static_cast<std::uint64_t>(kind == Scenario::Kind::Gaussian ? 1 : 0),
                            static_cast<std::uint64_t>(i_prec), static_cast<std::uint64_t>(i_rate),
                            static_cast<std::uint64_t>(rep)});

    const double sigma = 1.0 / rec.precision;
    const Scenario scenario = kind == Scenario::Kind::Sparse
                                  ? Scenario::sparse(rec.sparsity_rate)
                                  : Scenario::gaussian();
    try {
        const GlmModel design = make_design(grid.n_y, grid.n_theta, rec.seed);
        const SimulatedDataset data =
            simulate(design, scenario, sigma, derive_seed(rec.seed, {0xda7aULL}));

        MultistartOptions ms = settings.multistart;
        ms.seed = derive_seed(rec.seed, {0x1217ULL});
        const GlmModel sparse_model = design.with_mapping(settings.transform);
        const Posterior post_sparse =
            infer_multistart(sparse_model, settings.prior, data.y, settings.optim, ms);
        const Posterior post_gauss =
            infer_multistart(design, settings.prior, data.y, settings.optim, ms);

        rec.f_sparse = post_sparse.free_energy;
        rec.f_gauss = post_gauss.free_energy;
        rec.delta_f = compare_models(post_sparse, post_gauss);
        rec.r_sparse = weight_correlation(data.theta_true, post_sparse, sparse_model);
        rec.r_gauss = weight_correlation(data.theta_true, post_gauss, design);
        if (rec.r_sparse && rec.r_gauss) rec.delta_r = *rec.r_sparse - *rec.r_gauss;

        const ZeroDetection det = detect(p_zero_all(post_sparse, settings.prior.alpha2),
                                         settings.zero_threshold);
        const DetectionRates rates = detection_rates(det.declared_zero, data.zero_mask);
        rec.tpr = rates.tpr;
        rec.tnr = rates.tnr;
        rec.est_sparsity = rates.est_sparsity;
        rec.tp = rates.tp;
        rec.fn = rates.fn;
        rec.tn = rates.tn;
        rec.fp = rates.fp;

        rec.sigma2_sparse = post_sparse.sigma2;
        rec.sigma2_gauss = post_gauss.sigma2;
        rec.iter_sparse = post_sparse.n_iter;
        rec.iter_gauss = post_gauss.n_iter;
        rec.converged_sparse = post_sparse.converged;
        rec.converged_gauss = post_gauss.converged;
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.fail_reason = e.what();
    }
    return rec;
}

SweepResult run_sweep(const SweepSettings& settings, int jobs,
                      const std::function<bool()>& interrupted) {
    settings.grid.validate();
    settings.transform.validate();
    settings.prior.validate();

    std::vector<Scenario::Kind> kinds;
    if (settings.grid.scenario != SweepScenario::Gaussian) kinds.push_back(Scenario::Kind::Sparse);
    if (settings.grid.scenario != SweepScenario::Sparse) kinds.push_back(Scenario::Kind::Gaussian);

    struct Unit {
        Scenario::Kind kind;
        std::size_t i_prec, i_rate;
        int rep;
    };
    std::vector<Unit> units;
    for (const auto kind : kinds)
        for (std::size_t ip = 0; ip < settings.grid.precisions.size(); ++ip)
            for (std::size_t ir = 0; ir < settings.grid.sparsity_rates.size(); ++ir)
                for (int rep = 0; rep < settings.grid.n_reps; ++rep)
                    units.push_back({kind, ip, ir, rep});

    SweepResult result;
    result.records.resize(units.size());
    std::vector<char> done(units.size(), 0);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto worker = [&]() {
        while (!stop.load(std::memory_order_relaxed)) {
            if (interrupted && interrupted()) {
                stop.store(true, std::memory_order_relaxed);
                break;
            }
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= units.size()) break;
            const Unit& u = units[i];
            result.records[i] = run_cell(settings, u.i_prec, u.i_rate, u.rep, u.kind);
            done[i] = 1;
        }
    };

    const int n_threads = std::max(1, jobs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (std::find(done.begin(), done.end(), 0) != done.end()) {
        result.complete = false;
        std::vector<RepRecord> finished;
        finished.reserve(result.records.size());
        for (std::size_t i = 0; i < units.size(); ++i)
            if (done[i]) finished.push_back(std::move(result.records[i]));
        result.records = std::move(finished);
    }

    result.cells = summarize_cells(result.records);
    return result;
}

namespace {

struct Accum {
    int n = 0, n_failed = 0;
    double delta_f = 0.0, est_sparsity = 0.0;
    double delta_r = 0.0;
    int n_delta_r = 0;
    double tpr = 0.0, tnr = 0.0;
    int n_tpr = 0, n_tnr = 0;
    long tp = 0, fn = 0, tn = 0, fp = 0;
};

}  // namespace

std::vector<CellSummary> summarize_cells(const std::vector<RepRecord>& records) {
    std::map<std::tuple<int, std::size_t, std::size_t>, Accum> acc;
    for (const auto& r : records) {
        auto& a = acc[{r.scenario == Scenario::Kind::Gaussian ? 1 : 0, r.i_prec, r.i_rate}];
        if (r.failed) {
            a.n_failed++;
            continue;
        }
        a.n++;
        a.delta_f += r.delta_f;
        a.est_sparsity += r.est_sparsity;
        if (r.delta_r) {
            a.delta_r += *r.delta_r;
            a.n_delta_r++;
        }
        if (r.tpr) {
            a.tpr += *r.tpr;
            a.n_tpr++;
        }
        if (r.tnr) {
            a.tnr += *r.tnr;
            a.n_tnr++;
        }
        a.tp += r.tp;
        a.fn += r.fn;
        a.tn += r.tn;
        a.fp += r.fp;
    }

    std::vector<CellSummary> cells;
    cells.reserve(acc.size());
    for (const auto& [key, a] : acc) {
        CellSummary c;
        c.scenario = std::get<0>(key) == 1 ? Scenario::Kind::Gaussian : Scenario::Kind::Sparse;
        // precision/rate looked up from any record of the cell
        for (const auto& r : records) {
            if ((r.scenario == Scenario::Kind::Gaussian ? 1 : 0) == std::get<0>(key) &&
                r.i_prec == std::get<1>(key) && r.i_rate == std::get<2>(key)) {
                c.precision = r.precision;
                c.sparsity_rate = r.sparsity_rate;
                break;
            }
        }
        c.n_records = a.n;
        c.n_failed = a.n_failed;
        if (a.n > 0) {
            c.means.delta_f = a.delta_f / a.n;
            c.means.est_sparsity = a.est_sparsity / a.n;
            if (a.n_delta_r > 0) c.means.delta_r = a.delta_r / a.n_delta_r;
            if (a.n_tpr > 0) c.means.tpr = a.tpr / a.n_tpr;
            if (a.n_tnr > 0) c.means.tnr = a.tnr / a.n_tnr;
            if (a.tp + a.fn > 0)
                c.pooled_tpr = static_cast<double>(a.tp) / static_cast<double>(a.tp + a.fn);
            if (a.tn + a.fp > 0)
                c.pooled_tnr = static_cast<double>(a.tn) / static_cast<double>(a.tn + a.fp);
        }
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<QuantileBin> quantile_bins(std::vector<std::pair<double, double>> delta_records,
                                       std::size_t n_bins) {
    if (n_bins < 1) throw std::invalid_argument("quantile_bins: n_bins must be >= 1");
    if (delta_records.size() < n_bins)
        throw TooFewRecords("quantile_bins: need at least n_bins records");
    std::sort(delta_records.begin(), delta_records.end());

    const std::size_t n = delta_records.size();
    const std::size_t base = n / n_bins;
    const std::size_t rem = n % n_bins;

    std::vector<QuantileBin> bins;
    bins.reserve(n_bins);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t count = base + (b < rem ? 1 : 0);
        QuantileBin bin;
        bin.n = count;
        for (std::size_t i = pos; i < pos + count; ++i) {
            bin.mean_delta_r += delta_records[i].first;
            bin.mean_delta_f += delta_records[i].second;
        }
        bin.mean_delta_r /= static_cast<double>(count);
        bin.mean_delta_f /= static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = pos; i < pos + count; ++i) {
            const double d = delta_records[i].second - bin.mean_delta_f;
            ss += d * d;
        }
        bin.std_delta_f = std::sqrt(ss / static_cast<double>(count));
        pos += count;
        bins.push_back(bin);
    }
    return bins;
}

std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string csv_opt(const std::optional<double>& v) { return v ? csv_num(*v) : std::string(); }

const char* scenario_name(Scenario::Kind k) {
    return k == Scenario::Kind::Gaussian ? "gaussian" : "sparse";
}

}  // namespace

void write_raw_csv(std::ostream& os, const std::vector<RepRecord>& records) {
    os << "seed,scenario,precision,sparsity_rate,f_sparse,f_gauss,r_sparse,r_gauss,"
          "tpr,tnr,est_sparsity,delta_f,delta_r,tp,fn,tn,fp,sigma2_sparse,sigma2_gauss,"
          "iter_sparse,iter_gauss,converged_sparse,converged_gauss,failed\n";
    for (const auto& r : records) {
        os << r.seed << ',' << scenario_name(r.scenario) << ',' << csv_num(r.precision) << ','
           << csv_num(r.sparsity_rate) << ',' << csv_num(r.f_sparse) << ',' << csv_num(r.f_gauss)
           << ',' << csv_opt(r.r_sparse) << ',' << csv_opt(r.r_gauss) << ',' << csv_opt(r.tpr)
           << ',' << csv_opt(r.tnr) << ',' << csv_num(r.est_sparsity) << ',' << csv_num(r.delta_f)
           << ',' << csv_opt(r.delta_r) << ',' << r.tp << ',' << r.fn << ',' << r.tn << ','
           << r.fp << ',' << csv_num(r.sigma2_sparse) << ',' << csv_num(r.sigma2_gauss) << ','
           << r.iter_sparse << ',' << r.iter_gauss << ',' << (r.converged_sparse ? 1 : 0) << ','
           << (r.converged_gauss ? 1 : 0) << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

void write_cells_csv(std::ostream& os, const std::vector<CellSummary>& cells) {
    os << "scenario,precision,sparsity_rate,n_records,n_failed,mean_delta_f,mean_delta_r,"
          "mean_tpr,mean_tnr,pooled_tpr,pooled_tnr,mean_est_sparsity\n";
    for (const auto& c : cells) {
        os << scenario_name(c.scenario) << ',' << csv_num(c.precision) << ','
           << csv_num(c.sparsity_rate) << ',' << c.n_records << ',' << c.n_failed << ','
           << csv_num(c.means.delta_f) << ',' << csv_opt(c.means.delta_r) << ','
           << csv_opt(c.means.tpr) << ',' << csv_opt(c.means.tnr) << ',' << csv_opt(c.pooled_tpr)
           << ',' << csv_opt(c.pooled_tnr) << ',' << csv_num(c.means.est_sparsity) << '\n';
    }
}

void write_bins_csv(std::ostream& os, const std::vector<QuantileBin>& bins) {
    os << "bin,n_records,mean_delta_r,mean_delta_f,std_delta_f\n";
    for (std::size_t b = 0; b < bins.size(); ++b) {
        os << b << ',' << bins[b].n << ',' << csv_num(bins[b].mean_delta_r) << ','
           << csv_num(bins[b].mean_delta_f) << ',' << csv_num(bins[b].std_delta_f) << '\n';
    }
}

std::vector<std::pair<double, double>> read_delta_records_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_delta_records_csv: empty input");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) header.push_back(field);
    }
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("read_delta_records_csv: missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_dr = col("delta_r");
    const std::size_t c_df = col("delta_f");
    const std::size_t c_failed = col("failed");

    std::vector<std::pair<double, double>> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < header.size()) fields.emplace_back();
        if (fields[c_failed] == "1" || fields[c_dr].empty()) continue;
        out.emplace_back(std::stod(fields[c_dr]), std::stod(fields[c_df]));
    }
    return out;
}

}  // namespace sparsevl
