#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace jkpanel::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;          // usage, I/O or parse errors
inline constexpr int kExitInvalidDesign = 2;
inline constexpr int kExitEstimator = 3;

struct Options {
    std::string design;
    std::string data;
    std::string config;
    std::string estimator = "within_ls";
    std::optional<std::size_t> dof;
    double alpha = 0.05;
    double phi0 = 0.0;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;     // empty: write to `out` stream
    std::string format;  // empty: command default
    // generate only
    std::string dgp = "twoway_variance";
    std::string dims;
    double phi = 1.0;
};

// Each command writes its primary output to opts.out (or `out` when empty)
// and diagnostics to `err`, and returns an exit code.
int cmd_design(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_weights(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_infer(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_generate(const Options& opts, std::ostream& out, std::ostream& err);

// Reads JKPANEL_LOG (trace|debug|info|warn|error|off) and configures logging.
void init_logging();

}  // namespace jkpanel::cli
