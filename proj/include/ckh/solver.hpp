#pragma once

#include "ckh/fluid.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckh {

/// Raised when a run produces non-finite values or magnitudes above 1e12.
class BlowUpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Extra volumetric source added to the tendencies at time t. Used for
/// manufactured-solution verification; not part of the energy ledger.
using SourceFn = std::function<void(double t, const PeriodicGrid& grid, RealField& drho, RealField& dmomentum)>;

/// Time derivative of (rho, m) together with the instantaneous ledger rates.
struct StateRate {
    RealField drho;
    RealField dmomentum;
    /// integral of mu |grad u|^2 + (lambda + mu) (div u)^2
    double dissipation_rate = 0.0;
    /// integral of m . f
    double forcing_power = 0.0;
};

/// Pseudo-spectral tendencies of the barotropic compressible Navier-Stokes system:
///   d_t rho = -div m
///   d_t m   = -div(m (x) m / rho) - grad p + div Sigma + rho f
/// Products are formed pointwise, differentiated spectrally and the tendencies
/// are truncated by the 2/3 rule.
StateRate rhs(const State& state, const FluidParams& params, const SourceFn& source = {});

/// Fixed step from the CFL bound on |u| + sqrt(gamma p / rho) and the viscous
/// bound dx^2 rho / (2 d (2 mu + |lambda|)).
double cfl_dt(const State& state, const FluidParams& params, double cfl);

struct LedgerIncrement {
    double dissipation = 0.0;
    double work = 0.0;
};

struct StepOutcome {
    State state;
    LedgerIncrement ledger;
};

/// Classical RK4 step; dissipation and forcing work ride along as extra ODE
/// components so the ledger has the same order as the state.
StepOutcome step_with_ledger(const State& state, const FluidParams& params, double dt,
                             const SourceFn& source = {});

State step(const State& state, const FluidParams& params, double dt);

struct EnergyRow {
    double t = 0.0;
    double energy = 0.0;       ///< total energy over the torus
    double dissipation = 0.0;  ///< cumulative D(t)
    double work = 0.0;         ///< cumulative W(t)
    double residual = 0.0;     ///< E(t) + D(t) - E0 - W(t)
};

struct EnergyReport {
    double initial_energy = 0.0;
    std::vector<EnergyRow> rows;
    /// sup over the run of E(t) + D(t), the empirical M_T of the energy estimate.
    double bound = 0.0;

    double max_residual() const;
    /// D(t_{i+1}) >= D(t_i) for every recorded row.
    bool dissipation_nondecreasing() const;
};

struct RunOptions {
    double horizon = 1.0;
    /// Steps between stored snapshots.
    int snapshot_every = 1;
    double cfl = 0.5;
    /// Overrides the CFL step; rounded down so the horizon is hit exactly.
    std::optional<double> dt;
    /// Required to run with mu = 0; such runs are under-resolved references.
    bool euler_reference = false;
    SourceFn source;
};

struct RunResult {
    std::vector<State> snapshots;
    EnergyReport energy;
    double dt = 0.0;
    long steps = 0;
};

/// Advances `initial` to initial.t + horizon with a fixed step and records a
/// snapshot plus a ledger row every `snapshot_every` steps (including t0).
RunResult run(const State& initial, const FluidParams& params, const RunOptions& options);

/// Initial-condition preset selection.
struct IcSpec {
    std::string preset = "taylor-green";
    std::uint64_t seed = 1;
    /// Velocity scale (taylor-green, random-band) or relative density bump (acoustic-pulse).
    double amplitude = 0.3;
    double rho0 = 1.0;
};

/// taylor-green: divergence-free vortex cells at uniform density (d >= 2).
/// acoustic-pulse: smooth periodic density bump at rest.
/// random-band: uniform density, random velocity confined to |n| <= n/8.
/// rest: the equilibrium state, uniform density rho0 at rest.
State preset_ic(const IcSpec& spec, const PeriodicGrid& grid, const FluidParams& params);

}  // namespace ckh
