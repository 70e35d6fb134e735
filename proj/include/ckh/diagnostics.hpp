#pragma once

#include "ckh/solver.hpp"

#include <span>
#include <vector>

namespace ckh {

/// Snapshots ordered by strictly increasing time.
using Series = std::span<const State>;

/// Shell-binned spectra of the weighted fields at one time. Shell s collects
/// the modes with round(|n|) = s, where k = (2 pi / P) n.
struct Spectrum {
    double t = 0.0;
    double period = 1.0;
    /// E(t, s) = sum over the shell of |w_u_hat|^2 / 2 + |w_c_hat|^2 / (gamma - 1)
    std::vector<double> energy;
    /// Unweighted sum over the shell of |w_hat|^2 across all components.
    std::vector<double> raw;
    std::vector<int> modes;

    int shells() const { return static_cast<int>(energy.size()); }
    double wavenumber(int s) const;
    /// q = E / (4 pi k^2) for k > 0, zero for the mean shell.
    double spectral_density(int s) const;
    double total_energy() const;
};

/// Shell index of every stored mode plus per-shell mode counts.
struct ShellMap {
    std::vector<int> shell_of_mode;
    std::vector<int> count;
};
ShellMap shell_map(const PeriodicGrid& g);

Spectrum shell_spectrum(const State& state, const FluidParams& params);

/// Per-shell and per-mode time integrals of a spectrum series (trapezoid in t).
struct SpectrumSeries {
    PeriodicGrid grid;
    double horizon = 0.0;
    std::vector<Spectrum> spectra;
    std::vector<double> energy_integral;
    std::vector<double> raw_integral;
    /// Integral over time of |w_hat(t, k)|^2 summed over components, per mode.
    Eigen::ArrayXd mode_integral;
    std::vector<int> modes;

    double wavenumber(int s) const { return grid.wavenumber_step() * s; }
};

SpectrumSeries time_integrated_spectrum(Series series, const FluidParams& params);

/// Least-squares fit of log(int E dt) against log k over shells [k_lo, k_hi].
struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    /// RMS of the log-space residuals.
    double residual = 0.0;
    /// max over the window of k^(5/3) * int E dt
    double empirical_bound = 0.0;
    int shells = 0;
};
PowerLawFit ckh_fit(const SpectrumSeries& spec, int k_lo, int k_hi);

struct CkhwStatistic {
    double beta = 0.0;
    int k_star = 0;
    /// sup over shells k_star <= s <= n/3 of k^(3+beta) * (shell mean of int |w_hat|^2 dt)
    double value = 0.0;
    /// sup over single modes with k_star <= |n| and shell <= n/3 of |k|^(3+beta) * int |w_hat|^2 dt
    double per_mode_sup = 0.0;
    int argmax_shell = -1;
};
CkhwStatistic ckhw_statistic(const SpectrumSeries& spec, double beta, int k_star);

/// Constant C with max_window k^(5/3) int E dt <= C * ckhw(beta = 2/3, k_star <= k_lo):
/// C = max(1/2, 1/(gamma-1)) * max over window shells of (mode count) / k^2.
double ckh_ckhw_factor(const SpectrumSeries& spec, const FluidParams& params, int k_lo, int k_hi);

/// (int_0^T sum_k (1 + |k|^2)^alpha |w_hat(t, k)|^2 dt)^(1/2).
double fractional_sobolev_norm(const SpectrumSeries& spec, double alpha);

/// Equicontinuity moduli over a list of shifts.
struct ModulusTable {
    enum class Kind { space, time };
    Kind kind = Kind::space;
    /// |dx| for space tables, dt for time tables.
    std::vector<double> shifts;
    /// int int |rho(. + shift) - rho|^gamma
    std::vector<double> density;
    /// int int |m(. + shift) - m|^2
    std::vector<double> momentum;
    double density_slope = 0.0;
    double momentum_slope = 0.0;
    double density_fit_residual = 0.0;
    double momentum_fit_residual = 0.0;
};

/// Shifts are physical displacements and must lie on the grid lattice.
ModulusTable space_modulus(Series series, const std::vector<Eigen::Vector3d>& shifts, double gamma);
/// Each lag must be a positive integer multiple of the (uniform) snapshot spacing.
ModulusTable time_modulus(Series series, const std::vector<double>& lags, double gamma);

struct HighIntegrability {
    double rho_norm = 0.0;       ///< ||rho||_{L^q1}
    double momentum_norm = 0.0;  ///< ||m||_{L^q2}
    double weighted_norm = 0.0;  ///< ||w||_{L^q}
};
/// Space-time norms over [0, T) x T_P; requires q1 > gamma, q2 > 2, q > 2.
HighIntegrability high_integrability(Series series, const FluidParams& params, double q1, double q2, double q);

/// Space-time L^p norm of the difference of two aligned series, per channel.
double spacetime_distance(Series a, Series b, double p, bool momentum_channel);

/// a * cos(k.x) + b * sin(k.x) with k on the grid lattice.
struct TrigMonomial {
    LatticeOffset wavevector = LatticeOffset::Zero();
    double cos_coeff = 0.0;
    double sin_coeff = 0.0;
};
using TrigPolynomial = std::vector<TrigMonomial>;

/// phi(t, x) = (1 - t/T0)^3_+ * Phi(x) with Phi a trigonometric polynomial per
/// component; all derivatives are evaluated in closed form.
struct TestFunction {
    std::vector<TrigPolynomial> components;
    double support_end = 1.0;

    double temporal(double t) const;
    double temporal_derivative(double t) const;
    RealField spatial(const PeriodicGrid& g) const;
    /// Component c * d + b is d Phi_c / d x_b.
    RealField spatial_gradient(const PeriodicGrid& g) const;
};

TestFunction default_mass_test_function(const PeriodicGrid& g, double horizon);
TestFunction default_momentum_test_function(const PeriodicGrid& g, double horizon);

/// Quadrature value plus a Richardson estimate of its time-quadrature error
/// (full snapshot set against every other snapshot).
struct WeakResidual {
    double value = 0.0;
    double tolerance = 0.0;
};

/// int int (rho phi_t + m . grad phi) + int rho0 phi(0).
WeakResidual weak_residual_mass(Series series, const TestFunction& phi, const RealField& rho0);

struct MomentumResidual {
    /// Euler form: int int (m . phi_t + (m (x) m / rho) : grad phi + p div phi + rho f . phi) + int m0 . phi(0)
    WeakResidual euler;
    /// int int Sigma : grad phi
    double viscous_term = 0.0;
    /// Euler form minus the viscous term; vanishes for Navier-Stokes solutions.
    WeakResidual navier_stokes;
    /// Cauchy-Schwarz bound 2 mu ||grad u|| ||grad phi|| + |lambda| ||div u|| ||div phi||.
    double viscous_bound = 0.0;
    /// navier_stokes.value when include_viscous, euler.value otherwise.
    double value = 0.0;
};
MomentumResidual weak_residual_momentum(Series series, const TestFunction& phi, const RealField& m0,
                                        const FluidParams& params, bool include_viscous);

struct AdmissibilityReport {
    std::vector<double> t;
    /// E(t) - E0 - W(t) from the snapshots and the ledger work.
    std::vector<double> residual;
    double max_residual = 0.0;
    /// max |E(t) + D(t) - E0 - W(t)| with E from the snapshots, the ledger cross-check.
    double ledger_defect = 0.0;
};
AdmissibilityReport energy_admissibility(Series series, const EnergyReport& report, const FluidParams& params);

struct ReynoldsQuotient {
    /// Component a * d + b holds m_a m_b / rho where rho >= theta, zero elsewhere.
    RealField tensor;
    /// |m|^2 / rho on the unmasked set.
    RealField trace;
    /// 1 where rho < theta.
    Eigen::Array<bool, Eigen::Dynamic, 1> vacuum;
    double vacuum_fraction = 0.0;
};
ReynoldsQuotient reynolds_quotient(const State& state, double theta);

/// Space-time L^2 norms of grad u and div u over the series (trapezoid in t).
struct GradientNorms {
    double grad = 0.0;
    double div = 0.0;
};
GradientNorms velocity_gradient_norms(Series series, const FluidParams& params);

/// Trapezoid rule over snapshot times.
double trapezoid(std::span<const double> t, std::span<const double> v);

}  // namespace ckh
