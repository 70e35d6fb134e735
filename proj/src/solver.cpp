#include "ckh/solver.hpp"

#include "ckh/fft.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

namespace ckh {

namespace {

using Complex = std::complex<double>;
using CoeffArray = Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic>;

/// Mask and i*k multipliers for one grid, cached per thread.
struct SpectralOperators {
    PeriodicGrid grid;
    Eigen::ArrayXd mask;
    std::array<Eigen::ArrayXcd, 3> ik;
};

const SpectralOperators& operators_for(const PeriodicGrid& g) {
    thread_local std::vector<SpectralOperators> cache;
    for (const auto& ops : cache) {
        if (ops.grid == g) return ops;
    }
    SpectralOperators ops{g, dealias_mask(g), {}};
    const auto size = static_cast<Eigen::Index>(g.size());
    for (int a = 0; a < g.dim(); ++a) {
        ops.ik[a] = Eigen::ArrayXcd::Zero(size);
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            const int j = g.unflatten(idx)[a];
            if (2 * j == g.n()) continue;
            ops.ik[a][static_cast<Eigen::Index>(idx)] = Complex(0.0, g.wavenumber_step() * g.wavenumber_index(j));
        }
    }
    if (cache.size() > 8) cache.erase(cache.begin());
    cache.push_back(std::move(ops));
    return cache.back();
}

void check_finite_bounded(const State& s) {
    const double limit = 1e12;
    if (!s.rho.all_finite() || !s.momentum.all_finite() || s.rho.values().abs().maxCoeff() > limit ||
        s.momentum.values().abs().maxCoeff() > limit) {
        throw BlowUpError("solution blew up at t = " + std::to_string(s.t));
    }
}

State axpy(const State& s, double h, const StateRate& k, double t) {
    RealField rho(s.grid(), (s.rho.values() + h * k.drho.values()).eval());
    RealField m(s.grid(), (s.momentum.values() + h * k.dmomentum.values()).eval());
    return State(t, std::move(rho), std::move(m));
}

}  // namespace

StateRate rhs(const State& state, const FluidParams& params, const SourceFn& source) {
    state.validate();
    const PeriodicGrid& g = state.grid();
    const int d = g.dim();
    const auto& ops = operators_for(g);
    const double cell = g.cell_volume();

    const RealField u = velocity(state, params);
    const auto u_hat = dft_forward(u);

    SpectralField<double> grad_hat(g, d * d);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) grad_hat.coefficients().col(a * d + b) = u_hat.coefficients().col(a) * ops.ik[b];
    }
    const RealField grad = dft_inverse_unchecked(grad_hat);

    Eigen::ArrayXd div = Eigen::ArrayXd::Zero(u.size());
    for (int a = 0; a < d; ++a) div += grad.component(a * d + a);
    const Eigen::ArrayXd p = params.kappa * state.rho.component(0).max(0.0).pow(params.gamma);

    // Symmetric flux m_a u_b + p delta_ab - Sigma_ab, stored for a <= b.
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) pairs.emplace_back(a, b);
    }
    RealField flux(g, static_cast<int>(pairs.size()));
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        const auto [a, b] = pairs[q];
        auto col = flux.component(static_cast<int>(q));
        col = state.momentum.component(a) * u.component(b) -
              params.mu * (grad.component(a * d + b) + grad.component(b * d + a));
        if (a == b) col += p - params.lambda * div;
    }
    const auto flux_hat = dft_forward(flux);
    auto pair_index = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        for (std::size_t q = 0; q < pairs.size(); ++q) {
            if (pairs[q].first == a && pairs[q].second == b) return static_cast<int>(q);
        }
        return -1;
    };

    RealField force(g, d);
    const bool forced = params.forcing.active();
    SpectralField<double> body_hat(g, d);
    if (forced) {
        force = params.forcing.evaluate(g, state.t);
        RealField body(g, d);
        for (int a = 0; a < d; ++a) body.component(a) = state.rho.component(0) * force.component(a);
        body_hat = dft_forward(body);
    }

    const auto m_hat = dft_forward(state.momentum);
    SpectralField<double> out_hat(g, d + 1);
    auto mass = out_hat.coefficients().col(0);
    for (int a = 0; a < d; ++a) mass -= m_hat.coefficients().col(a) * ops.ik[a];
    for (int a = 0; a < d; ++a) {
        auto col = out_hat.coefficients().col(a + 1);
        for (int b = 0; b < d; ++b) col -= flux_hat.coefficients().col(pair_index(a, b)) * ops.ik[b];
        if (forced) col += body_hat.coefficients().col(a);
    }
    apply_mask(out_hat, ops.mask);
    const RealField out = dft_inverse_unchecked(out_hat);

    StateRate rate{RealField(g, out.values().col(0).eval()),
                   RealField(g, out.values().rightCols(d).eval()), 0.0, 0.0};
    rate.dissipation_rate =
        (params.mu * grad.values().square().rowwise().sum() + (params.lambda + params.mu) * div.square()).sum() * cell;
    if (forced) rate.forcing_power = (state.momentum.values() * force.values()).sum() * cell;
    if (source) source(state.t, g, rate.drho, rate.dmomentum);
    return rate;
}

double cfl_dt(const State& state, const FluidParams& params, double cfl) {
    if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl factor must lie in (0, 1]");
    state.validate();
    if (state.rho.size() == 0) throw std::invalid_argument("empty state");
    const PeriodicGrid& g = state.grid();
    const Eigen::ArrayXd rho = state.rho.component(0).max(params.rho_min);
    const Eigen::ArrayXd speed = velocity(state, params).magnitude() +
                                 (params.gamma * params.kappa * rho.pow(params.gamma - 1.0)).sqrt();
    const double dx = g.dx();
    double dt = dx / std::max(speed.maxCoeff(), 1e-300);
    const double diffusivity = std::max(2.0 * params.mu + std::abs(params.lambda), 1e-300);
    dt = std::min(dt, dx * dx * rho.minCoeff() / (2.0 * g.dim() * diffusivity));
    return cfl * dt;
}

StepOutcome step_with_ledger(const State& s, const FluidParams& params, double dt, const SourceFn& source) {
    const double t = s.t;
    const StateRate k1 = rhs(s, params, source);
    auto stage = [&](const StateRate& k, double h) {
        // A valid input that turns invalid inside the step is a blow-up.
        try {
            return rhs(axpy(s, h, k, t + h), params, source);
        } catch (const std::invalid_argument& e) {
            throw BlowUpError(std::string("step failed at t = ") + std::to_string(t) + ": " + e.what());
        }
    };
    const StateRate k2 = stage(k1, 0.5 * dt);
    const StateRate k3 = stage(k2, 0.5 * dt);
    const StateRate k4 = stage(k3, dt);

    const double w = dt / 6.0;
    RealField rho(s.grid(), (s.rho.values() + w * (k1.drho.values() + 2.0 * k2.drho.values() +
                                                    2.0 * k3.drho.values() + k4.drho.values()))
                                .eval());
    RealField m(s.grid(), (s.momentum.values() + w * (k1.dmomentum.values() + 2.0 * k2.dmomentum.values() +
                                                       2.0 * k3.dmomentum.values() + k4.dmomentum.values()))
                              .eval());
    StepOutcome out{State(t + dt, std::move(rho), std::move(m)), {}};
    out.ledger.dissipation =
        w * (k1.dissipation_rate + 2.0 * k2.dissipation_rate + 2.0 * k3.dissipation_rate + k4.dissipation_rate);
    out.ledger.work = w * (k1.forcing_power + 2.0 * k2.forcing_power + 2.0 * k3.forcing_power + k4.forcing_power);
    check_finite_bounded(out.state);
    return out;
}

State step(const State& state, const FluidParams& params, double dt) {
    return step_with_ledger(state, params, dt).state;
}

double EnergyReport::max_residual() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) worst = std::max(worst, r.residual);
    return worst;
}

bool EnergyReport::dissipation_nondecreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].dissipation < rows[i - 1].dissipation) return false;
    }
    return true;
}

RunResult run(const State& initial, const FluidParams& params, const RunOptions& options) {
    params.validate();
    params.forcing.validate(initial.grid());
    initial.validate();
    if (!(options.horizon > 0.0)) throw std::invalid_argument("run horizon must be positive");
    if (options.snapshot_every < 1) throw std::invalid_argument("snapshot cadence must be at least one step");
    if (params.mu == 0.0) {
        if (!options.euler_reference) throw std::invalid_argument("mu = 0 requires the Euler-reference mode");
        std::clog << "warning: inviscid run, the pseudo-spectral scheme is under-resolved past shock formation\n";
    }

    double dt = options.dt ? *options.dt : cfl_dt(initial, params, options.cfl);
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const long cadence = options.snapshot_every;
    const long blocks = std::max(1L, static_cast<long>(std::ceil(options.horizon / (dt * cadence) - 1e-9)));
    const long total = blocks * cadence;
    dt = options.horizon / static_cast<double>(total);

    RunResult result;
    result.dt = dt;
    result.steps = total;
    const double t0 = initial.t;
    const double e0 = total_energy(initial, params);
    result.energy.initial_energy = e0;
    result.snapshots.push_back(initial);
    result.energy.rows.push_back({t0, e0, 0.0, 0.0, 0.0});
    result.energy.bound = e0;

    State current = initial;
    double dissipation = 0.0;
    double work = 0.0;
    for (long n = 1; n <= total; ++n) {
        StepOutcome next = step_with_ledger(current, params, dt, options.source);
        next.state.t = t0 + static_cast<double>(n) * dt;
        dissipation += next.ledger.dissipation;
        work += next.ledger.work;
        current = std::move(next.state);
        if (n % cadence == 0) {
            const double e = total_energy(current, params);
            result.energy.rows.push_back({current.t, e, dissipation, work, e + dissipation - e0 - work});
            result.energy.bound = std::max(result.energy.bound, e + dissipation);
            result.snapshots.push_back(current);
        }
    }
    return result;
}

State preset_ic(const IcSpec& spec, const PeriodicGrid& g, const FluidParams& params) {
    params.validate();
    if (!(spec.rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
    const int d = g.dim();
    const double k = g.wavenumber_step();
    RealField rho(g, 1);
    RealField m(g, d);
    rho.values().setConstant(spec.rho0);

    if (spec.preset == "rest") {
        // uniform density, no motion
    } else if (spec.preset == "taylor-green") {
        if (d < 2) throw std::invalid_argument("taylor-green preset needs d >= 2");
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Eigen::Vector3d x = g.coordinate(i) * k;
            const double cz = d == 3 ? std::cos(x[2]) : 1.0;
            const auto r = static_cast<Eigen::Index>(i);
            m(r, 0) = spec.rho0 * spec.amplitude * std::sin(x[0]) * std::cos(x[1]) * cz;
            m(r, 1) = -spec.rho0 * spec.amplitude * std::cos(x[0]) * std::sin(x[1]) * cz;
        }
    } else if (spec.preset == "acoustic-pulse") {
        if (!(spec.amplitude > -1.0)) throw std::invalid_argument("acoustic-pulse amplitude must exceed -1");
        const double width2 = 0.25;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Eigen::Vector3d x = g.coordinate(i) * k;
            double bump = 1.0;
            for (int a = 0; a < d; ++a) bump *= std::exp((std::cos(x[a]) - 1.0) / width2);
            rho(static_cast<Eigen::Index>(i)) = spec.rho0 * (1.0 + spec.amplitude * bump);
        }
    } else if (spec.preset == "random-band") {
        const int band = g.n() / 8;
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        SpectralField<double> hat(g, d);
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            const double kn = g.wavevector_index(idx).cast<double>().norm();
            for (int a = 0; a < d; ++a) {
                const double re = normal(rng);
                const double im = normal(rng);
                if (kn >= 1.0 && kn <= band) hat(static_cast<Eigen::Index>(idx), a) = Complex(re, im);
            }
        }
        RealField u = dft_inverse_unchecked(hat);
        const double rms = std::sqrt(u.values().square().rowwise().sum().mean());
        if (rms > 0.0) u.values() *= spec.amplitude / rms;
        m.values() = spec.rho0 * u.values();
    } else {
        throw std::invalid_argument("unknown initial-condition preset: " + spec.preset);
    }
    return State(0.0, std::move(rho), std::move(m));
}

}  // namespace ckh
