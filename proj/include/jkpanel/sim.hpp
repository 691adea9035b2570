#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jkpanel/design.hpp"
#include "jkpanel/estimators.hpp"
#include "jkpanel/linalg.hpp"

namespace jkpanel {

std::uint64_t splitmix64(std::uint64_t& state);
// Seed of replication r's private stream.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t r);

// xoshiro256** seeded through splitmix64. normal() uses the Marsaglia polar
// method: each accepted pair (u, v) yields u·f first and caches v·f for the
// next call, so the draw order is fixed across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();  // in [0, 1), 53 random bits
    double normal();

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// y_it = φ x_it + λ_i + ε_it with x_i0 = 0 and x_it = 1{y_{i,t−1} > 0}. Draws
// λ_0..λ_{N−1} first, then ε unit by unit in time order.
PanelDataset dgp_dynamic_binary_panel(const PanelShape& shape, double phi, Rng& rng);

// y_it = λ_i + γ_t + ε_it with ε ~ N(0, φ). Draws λ, then γ, then ε row-major.
PanelDataset dgp_twoway_variance(const PanelShape& shape, double phi, Rng& rng);

PanelDataset generate(const std::string& dgp, const PanelShape& shape, double phi, Rng& rng);

// A design paired with the weights used to combine its estimates.
struct StudyDesign {
    std::string name;
    Design design;
    linalg::Vector v;
    linalg::Matrix u;
};

// The three one-way schemes on (N, T) panels with a single λ_i bias term:
// "a" time halves, "b" time and cross-section halves, "c" time halves and
// cross-section fifths, each with its explicit weight vectors. Throws
// IndivisibleAxis / ParseError.
StudyDesign builtin_scheme(const std::string& name, const PanelShape& shape);

// Weights from the solver for an arbitrary design (q defaults to q_max).
StudyDesign solved_scheme(const std::string& name, const Design& design, std::optional<std::size_t> q = {});

enum class FailurePolicy { abort, drop_and_count };

struct StudyConfig {
    std::string dgp = "dynamic_binary";
    double phi = 0.5;
    PanelShape shape{{100, 10}};
    std::string estimator;  // empty: the natural estimator for the DGP
    std::vector<StudyDesign> designs;
    bool include_plugin_row = true;  // the uncorrected full-sample estimator
    std::string plugin_label;        // empty: derived from the estimator
    std::size_t replications = 2000;
    std::uint64_t seed = 20240101;
    double alpha = 0.05;
    std::size_t workers = 1;
    FailurePolicy failure_policy = FailurePolicy::abort;
};

std::string default_estimator_for(const std::string& dgp);

struct MetricsRow {
    std::string name;
    std::size_t replications = 0;  // successful replications
    std::size_t failures = 0;
    double bias = 0.0;
    double bias_se = 0.0;
    double std_err = 0.0;
    double std_err_se = 0.0;
    double coverage = 0.0;  // NaN for rows without intervals
    double coverage_se = 0.0;
    double length = 0.0;
    double length_se = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    const MetricsRow& row(const std::string& name) const;
};

// Per-replication outcome for one design.
struct ReplicationRecord {
    bool ok = false;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::string error;
};

struct StudyResult {
    MetricsTable table;
    // records[design][replication]; the plug-in row, when present, comes first.
    std::vector<std::vector<ReplicationRecord>> records;
};

// Throws InvalidDesign for an invalid config and, under the abort policy, the
// lowest-index replication's failure (with its index in the message).
StudyResult run_study(const StudyConfig& config);

MetricsTable summarize(const std::vector<std::string>& names, const std::vector<std::vector<ReplicationRecord>>& records,
                       double phi, bool first_is_plugin);

enum class TableFormat { markdown, csv, json };
TableFormat parse_table_format(const std::string& name);

// Four decimals; columns design, bias, std_err, coverage, length, then the
// Monte Carlo standard errors and counts.
std::string emit_table(const MetricsTable& table, TableFormat format);
// Reads back the CSV layout of emit_table.
MetricsTable parse_table_csv(const std::string& text);

}  // namespace jkpanel
