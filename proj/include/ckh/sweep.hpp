#pragma once

#include "ckh/diagnostics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ckh {

/// Viscosity sequence request: either mu0 * ratio^i for i < length, or an
/// explicit list when `mu_list` is non-empty.
struct SweepSpec {
    double mu0 = 1e-2;
    double ratio = 0.5;
    int length = 4;
    std::vector<double> mu_list;
    double lambda_coeff = -2.0 / 3.0;
    /// Optional fine run that the per-entry distances are measured against.
    std::optional<double> reference_mu;
};

/// Exponents used by the sweep measurements. Zero means "use the default":
/// (p1, p2) = (gamma, 2), (q1, q2, q) = (1.2 gamma, 2.5, 2.5).
struct SweepExponents {
    double p1 = 0.0;
    double p2 = 2.0;
    double q1 = 0.0;
    double q2 = 2.5;
    double q = 2.5;
    double beta = 2.0 / 3.0;
    double alpha = 0.2;
    /// Shell index; zero means n/16 (at least 1).
    int k_star = 0;
};

struct SweepPlan {
    PeriodicGrid grid{2, 32, 1.0};
    /// gamma, kappa, rho_min and forcing shared by every entry.
    FluidParams base;
    IcSpec ic;
    double horizon = 1.0;
    int snapshot_every = 1;
    double cfl = 0.5;
    std::vector<double> mu;
    double lambda_coeff = -2.0 / 3.0;
    std::optional<double> reference_mu;
    SweepExponents exponents;

    FluidParams params_for(double mu_value) const;
};

/// Validates and expands a sweep request. Rejects a non-decreasing sequence,
/// non-positive entries and any entry with lambda + 2 mu <= 0.
SweepPlan plan_sweep(const SweepSpec& spec, const PeriodicGrid& grid, const FluidParams& base, const IcSpec& ic,
                     double horizon, int snapshot_every, double cfl = 0.5, const SweepExponents& exponents = {});

struct SweepRun {
    double mu = 0.0;
    FluidParams params;
    RunResult result;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    SweepPlan plan;
    /// Shared time step: the smallest stable step over all entries and the reference.
    double dt = 0.0;
    std::vector<SweepRun> runs;
    std::optional<SweepRun> reference;
    /// False when any run blew up; the failed entries carry the message.
    bool complete = true;
};

/// Runs every entry (and the reference) in parallel with a shared dt.
SweepResult run_sweep(const SweepPlan& plan);

/// D(i, j) per channel: (L^p1 density, L^p2 momentum) over [0, T) x T_P.
struct DistanceMatrix {
    Eigen::MatrixXd density;
    Eigen::MatrixXd momentum;
};
DistanceMatrix cauchy_distances(const SweepResult& result, double p1, double p2);

/// Distances of every entry to the reference run, per channel.
struct ReferenceDistances {
    std::vector<double> density;
    std::vector<double> momentum;
};
ReferenceDistances reference_distances(const SweepResult& result, double p1, double p2);

struct ChannelRate {
    double slope = 0.0;
    double residual = 0.0;
    /// Every distance is zero; the slope is undefined and left at zero.
    bool converged_exactly = false;
};
/// Least-squares slope of log distance against log mu.
ChannelRate fit_rate(const std::vector<double>& distances, const std::vector<double>& mu);

struct ConvergenceRate {
    ChannelRate density;
    ChannelRate momentum;
};
/// Fit over consecutive distances D(i, i+1) against mu_i; needs L >= 3.
ConvergenceRate convergence_rate(const DistanceMatrix& d, const std::vector<double>& mu);

struct ViscousSmallnessRow {
    double mu = 0.0;
    /// sqrt(mu) ||grad u||, bounded by the energy estimate.
    double energy_scale = 0.0;
    /// sqrt(mu) * ||sqrt(mu) grad u|| = mu ||grad u||, the size of the viscous term.
    double value = 0.0;
};
struct ViscousSmallness {
    std::vector<ViscousSmallnessRow> rows;
    /// Empirical M_T: max over the sweep of sqrt(mu) ||grad u||.
    double empirical_bound = 0.0;
    /// Every energy_scale^2 stays below E0 + sup W (the energy estimate), when lambda + mu >= 0.
    bool bounded = true;
};
ViscousSmallness viscous_smallness(const SweepResult& result);

struct UniformNormsRow {
    double mu = 0.0;
    CkhwStatistic ckhw;
    double sobolev = 0.0;
    HighIntegrability integrability;
};
std::vector<UniformNormsRow> uniform_norms(const SweepResult& result);

struct LimitReport {
    WeakResidual mass;
    MomentumResidual momentum;
    AdmissibilityReport admissibility;
    /// Largest vacuum fraction of the Reynolds quotient over the snapshots.
    double vacuum_fraction = 0.0;
    /// |Euler-form residual - viscous term| <= 2 * quadrature tolerance.
    bool consistent = false;
};
/// Limit-candidate residuals on the smallest-mu run, Euler form.
LimitReport limit_candidate_check(const SweepResult& result, const TestFunction& mass_phi,
                                  const TestFunction& momentum_phi, double theta = 1e-6);
LimitReport limit_candidate_check(const SweepResult& result);

}  // namespace ckh
