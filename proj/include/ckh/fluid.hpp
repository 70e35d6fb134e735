#pragma once

#include "ckh/field.hpp"

#include <Eigen/Core>

#include <vector>

namespace ckh {

/// One term a * cos(k.x + phase) of a trigonometric forcing sum.
struct ForcingTerm {
    LatticeOffset wavevector = LatticeOffset::Zero();
    Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
    double phase = 0.0;
};

/// External body force f(t, x) = envelope(t) * sum_j a_j cos(k_j . x + phase_j).
struct ForcingSpec {
    enum class Mode { none, trig_sum };
    enum class Envelope { constant, ramp };

    Mode mode = Mode::none;
    std::vector<ForcingTerm> terms;
    Envelope envelope = Envelope::constant;
    /// Ramp reaches full strength at this time (ramp envelope only).
    double ramp_time = 1.0;

    bool active() const { return mode == Mode::trig_sum && !terms.empty(); }
    double envelope_at(double t) const;
    /// d-component force field sampled at time t.
    RealField evaluate(const PeriodicGrid& g, double t) const;
    void validate(const PeriodicGrid& g) const;
};

/// Barotropic fluid: p = kappa * rho^gamma, stress 2 mu D(u) + lambda div(u) I.
struct FluidParams {
    double gamma = 1.4;
    double kappa = 1.0;
    double mu = 0.0;
    double lambda = 0.0;
    double rho_min = 1e-10;
    ForcingSpec forcing;

    /// Params with lambda = coeff * mu.
    static FluidParams with_viscosity(double gamma, double kappa, double mu, double lambda_coeff);

    /// Throws std::invalid_argument when gamma <= 1, kappa <= 0, mu < 0,
    /// lambda + 2 mu <= 0 for mu > 0, or lambda != 0 when mu == 0.
    void validate() const;
};

/// Density and momentum on the grid at time t.
struct State {
    double t = 0.0;
    RealField rho;
    RealField momentum;

    State(double time, RealField density, RealField mom);

    const PeriodicGrid& grid() const { return rho.grid(); }
    /// Throws when rho < -1e-12 somewhere or any value is non-finite.
    void validate() const;
};

/// Slack below zero tolerated in densities before they count as negative.
inline constexpr double negative_density_tolerance = 1e-12;

RealField pressure(const RealField& rho, const FluidParams& params);

/// c = sqrt(p / rho) = sqrt(kappa) rho^((gamma-1)/2), so that e = c^2 / (gamma - 1).
RealField sonic_speed(const RealField& rho, const FluidParams& params);

/// u = m / max(rho, rho_min).
RealField velocity(const State& s, const FluidParams& params);

/// w = (sqrt(rho) u, sqrt(rho) c(rho)), d + 1 components with the sonic part last.
RealField weighted_fields(const State& s, const FluidParams& params);

/// Pointwise E = |m|^2 / (2 max(rho, rho_min)) + kappa rho^gamma / (gamma - 1).
RealField energy_density(const State& s, const FluidParams& params);

/// Integral of the energy density over the torus.
double total_energy(const State& s, const FluidParams& params);
double total_mass(const State& s);
Eigen::VectorXd total_momentum(const State& s);

}  // namespace ckh
