#pragma once

#include "ckh/sweep.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ckh {

struct DiagnosticsConfig {
    double beta = 2.0 / 3.0;
    double alpha = 0.2;
    /// Shell indices; zero before resolution means the grid default
    /// (k_lo = k_star = max(1, n/16), k_hi = (n-1)/3).
    int k_lo = 0;
    int k_hi = 0;
    int k_star = 0;
    /// Space-modulus shifts along x, in grid cells.
    std::vector<int> space_shifts{1, 2, 4, 8};
    /// Time-modulus lags, in snapshot intervals.
    std::vector<int> time_lags{1, 2, 4};
    /// Zero before resolution means 1.2 gamma.
    double q1 = 0.0;
    double q2 = 2.5;
    double q = 2.5;
    /// Reynolds-quotient vacuum threshold.
    double theta = 1e-6;
};

/// Everything an experiment needs. parse_config fills every default so the
/// emitted text lists the full resolved configuration.
struct ExperimentConfig {
    int dim = 2;
    int n = 64;
    double period = 6.283185307179586;

    double gamma = 1.4;
    double kappa = 1.0;
    double mu = 1e-3;
    double lambda_coeff = -2.0 / 3.0;
    double rho_min = 1e-10;
    ForcingSpec forcing;

    IcSpec ic;

    double horizon = 1.0;
    int snapshot_every = 10;
    double cfl = 0.5;
    std::optional<double> dt;
    bool euler_reference = false;

    DiagnosticsConfig diagnostics;

    SweepSpec sweep;
    double p1 = 0.0;
    double p2 = 2.0;

    std::string output_dir = "out";

    PeriodicGrid grid() const { return PeriodicGrid(dim, n, period); }
    FluidParams fluid() const;
    RunOptions run_options() const;
    SweepPlan sweep_plan() const;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// INI text: sections [grid] [fluid] [forcing] [initial] [run] [diagnostics]
/// [sweep] [output] with key = value lines. Unknown sections or keys, values
/// that do not parse and constraint violations raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved INI text; parse_config(emit_config(c)) reproduces c.
std::string emit_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace ckh
