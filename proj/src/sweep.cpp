#include "ckh/sweep.hpp"

#include "ckh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ckh {

FluidParams SweepPlan::params_for(double mu_value) const {
    FluidParams p = base;
    p.mu = mu_value;
    p.lambda = lambda_coeff * mu_value;
    return p;
}

namespace {

void check_entry(double mu, double coeff) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("sweep viscosities must be positive");
    if (!(coeff * mu + 2.0 * mu > 0.0)) {
        throw std::invalid_argument("sweep entry mu = " + std::to_string(mu) + " has lambda + 2 mu <= 0");
    }
}

const SweepRun& smallest(const SweepResult& result) {
    if (result.runs.empty()) throw std::invalid_argument("sweep has no runs");
    const SweepRun& last = result.runs.back();
    if (!last.ok) throw std::runtime_error("smallest-mu run did not complete: " + last.error);
    return last;
}

void require_complete(const SweepResult& result) {
    for (const auto& r : result.runs) {
        if (!r.ok) throw std::runtime_error("sweep run at mu = " + std::to_string(r.mu) + " failed: " + r.error);
    }
}

}  // namespace

SweepPlan plan_sweep(const SweepSpec& spec, const PeriodicGrid& grid, const FluidParams& base, const IcSpec& ic,
                     double horizon, int snapshot_every, double cfl, const SweepExponents& exponents) {
    SweepPlan plan;
    plan.grid = grid;
    plan.base = base;
    plan.base.mu = 0.0;
    plan.base.lambda = 0.0;
    plan.ic = ic;
    plan.horizon = horizon;
    plan.snapshot_every = snapshot_every;
    plan.cfl = cfl;
    plan.lambda_coeff = spec.lambda_coeff;
    plan.exponents = exponents;
    if (!(horizon > 0.0)) throw std::invalid_argument("sweep horizon must be positive");
    if (snapshot_every < 1) throw std::invalid_argument("snapshot cadence must be >= 1 step");

    if (!spec.mu_list.empty()) {
        plan.mu = spec.mu_list;
    } else {
        if (spec.length < 1) throw std::invalid_argument("sweep length must be >= 1");
        if (spec.length > 1 && !(spec.ratio > 0.0 && spec.ratio < 1.0)) {
            throw std::invalid_argument("sweep ratio must lie in (0, 1) so mu decreases");
        }
        double mu = spec.mu0;
        for (int i = 0; i < spec.length; ++i, mu *= spec.ratio) plan.mu.push_back(mu);
    }
    for (std::size_t i = 0; i < plan.mu.size(); ++i) {
        check_entry(plan.mu[i], spec.lambda_coeff);
        if (i > 0 && !(plan.mu[i] < plan.mu[i - 1])) throw std::invalid_argument("sweep viscosities must strictly decrease");
    }
    if (spec.reference_mu) {
        check_entry(*spec.reference_mu, spec.lambda_coeff);
        if (!(*spec.reference_mu < plan.mu.back())) {
            throw std::invalid_argument("reference viscosity must lie below the sweep");
        }
        plan.reference_mu = spec.reference_mu;
    }

    auto& e = plan.exponents;
    if (e.p1 == 0.0) e.p1 = base.gamma;
    if (e.q1 == 0.0) e.q1 = 1.2 * base.gamma;
    if (e.k_star == 0) e.k_star = std::max(1, grid.n() / 16);
    if (!(e.p1 >= 1.0) || !(e.p2 >= 1.0)) throw std::invalid_argument("distance exponents must be >= 1");
    if (!(e.q1 > base.gamma) || !(e.q2 > 2.0) || !(e.q > 2.0)) {
        throw std::invalid_argument("integrability exponents need q1 > gamma, q2 > 2, q > 2");
    }
    if (!(e.alpha >= 0.0)) throw std::invalid_argument("sobolev alpha must be >= 0");
    plan.params_for(plan.mu.front()).validate();
    return plan;
}

SweepResult run_sweep(const SweepPlan& plan) {
    SweepResult result;
    result.plan = plan;
    const State initial = preset_ic(plan.ic, plan.grid, plan.params_for(plan.mu.front()));

    std::vector<double> all = plan.mu;
    if (plan.reference_mu) all.push_back(*plan.reference_mu);
    double dt = std::numeric_limits<double>::infinity();
    for (double mu : all) dt = std::min(dt, cfl_dt(initial, plan.params_for(mu), plan.cfl));
    result.dt = dt;

    std::vector<SweepRun> runs(all.size());
    parallel_for(all.size(), [&](std::size_t i) {
        SweepRun& r = runs[i];
        r.mu = all[i];
        r.params = plan.params_for(all[i]);
        RunOptions opt;
        opt.horizon = plan.horizon;
        opt.snapshot_every = plan.snapshot_every;
        opt.cfl = plan.cfl;
        opt.dt = dt;
        try {
            r.result = run(initial, r.params, opt);
            r.ok = true;
        } catch (const BlowUpError& e) {
            r.error = e.what();
        }
    });
    if (plan.reference_mu) {
        result.reference = std::move(runs.back());
        runs.pop_back();
    }
    result.runs = std::move(runs);
    for (const auto& r : result.runs) result.complete = result.complete && r.ok;
    if (result.reference) result.complete = result.complete && result.reference->ok;
    return result;
}

DistanceMatrix cauchy_distances(const SweepResult& result, double p1, double p2) {
    require_complete(result);
    const auto count = static_cast<Eigen::Index>(result.runs.size());
    DistanceMatrix d;
    if (count < 2) {
        d.density.resize(0, 0);
        d.momentum.resize(0, 0);
        return d;
    }
    d.density = Eigen::MatrixXd::Zero(count, count);
    d.momentum = Eigen::MatrixXd::Zero(count, count);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < count; ++i) {
        for (Eigen::Index j = i + 1; j < count; ++j) pairs.emplace_back(i, j);
    }
    parallel_for(pairs.size(), [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        const auto& a = result.runs[static_cast<std::size_t>(i)].result.snapshots;
        const auto& b = result.runs[static_cast<std::size_t>(j)].result.snapshots;
        d.density(i, j) = d.density(j, i) = spacetime_distance(a, b, p1, false);
        d.momentum(i, j) = d.momentum(j, i) = spacetime_distance(a, b, p2, true);
    });
    return d;
}

ReferenceDistances reference_distances(const SweepResult& result, double p1, double p2) {
    require_complete(result);
    if (!result.reference || !result.reference->ok) throw std::invalid_argument("sweep has no completed reference run");
    ReferenceDistances out;
    out.density.resize(result.runs.size());
    out.momentum.resize(result.runs.size());
    const auto& ref = result.reference->result.snapshots;
    parallel_for(result.runs.size(), [&](std::size_t i) {
        out.density[i] = spacetime_distance(result.runs[i].result.snapshots, ref, p1, false);
        out.momentum[i] = spacetime_distance(result.runs[i].result.snapshots, ref, p2, true);
    });
    return out;
}

ChannelRate fit_rate(const std::vector<double>& distances, const std::vector<double>& mu) {
    if (distances.size() != mu.size() || distances.size() < 2) {
        throw std::invalid_argument("fit_rate: need at least two (distance, mu) pairs");
    }
    ChannelRate out;
    if (std::all_of(distances.begin(), distances.end(), [](double v) { return v == 0.0; })) {
        out.converged_exactly = true;
        return out;
    }
    const auto n = static_cast<double>(mu.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(distances[i] > 0.0)) throw std::invalid_argument("fit_rate: distances must all be positive or all zero");
        mx += std::log(mu[i]);
        my += std::log(distances[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double x = std::log(mu[i]) - mx;
        sxx += x * x;
        sxy += x * (std::log(distances[i]) - my);
    }
    out.slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double r = std::log(distances[i]) - my - out.slope * (std::log(mu[i]) - mx);
        ss += r * r;
    }
    out.residual = std::sqrt(ss / n);
    return out;
}

ConvergenceRate convergence_rate(const DistanceMatrix& d, const std::vector<double>& mu) {
    if (mu.size() < 3) throw std::invalid_argument("convergence_rate: need at least 3 viscosities");
    if (d.density.rows() != static_cast<Eigen::Index>(mu.size())) {
        throw std::invalid_argument("convergence_rate: matrix size does not match the sequence");
    }
    std::vector<double> dd;
    std::vector<double> dm;
    std::vector<double> mm;
    for (std::size_t i = 0; i + 1 < mu.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        dd.push_back(d.density(a, a + 1));
        dm.push_back(d.momentum(a, a + 1));
        mm.push_back(mu[i]);
    }
    return {fit_rate(dd, mm), fit_rate(dm, mm)};
}

ViscousSmallness viscous_smallness(const SweepResult& result) {
    require_complete(result);
    ViscousSmallness out;
    out.rows.resize(result.runs.size());
    std::vector<double> budget(result.runs.size());
    parallel_for(result.runs.size(), [&](std::size_t i) {
        const auto& r = result.runs[i];
        const auto norms = velocity_gradient_norms(r.result.snapshots, r.params);
        out.rows[i] = {r.mu, std::sqrt(r.mu) * norms.grad, r.mu * norms.grad};
        double w = 0.0;
        for (const auto& row : r.result.energy.rows) w = std::max(w, row.work);
        budget[i] = r.result.energy.initial_energy + w;
    });
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        const auto& r = result.runs[i];
        out.empirical_bound = std::max(out.empirical_bound, out.rows[i].energy_scale);
        if (r.params.lambda + r.params.mu >= 0.0) {
            const double s = out.rows[i].energy_scale;
            out.bounded = out.bounded && s * s <= budget[i] * (1.0 + 1e-9);
        }
    }
    return out;
}

std::vector<UniformNormsRow> uniform_norms(const SweepResult& result) {
    require_complete(result);
    const auto& e = result.plan.exponents;
    std::vector<UniformNormsRow> rows(result.runs.size());
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& r = result.runs[i];
        const auto spec = time_integrated_spectrum(r.result.snapshots, r.params);
        rows[i].mu = r.mu;
        rows[i].ckhw = ckhw_statistic(spec, e.beta, e.k_star);
        rows[i].sobolev = fractional_sobolev_norm(spec, e.alpha);
        rows[i].integrability = high_integrability(r.result.snapshots, r.params, e.q1, e.q2, e.q);
    }
    return rows;
}

LimitReport limit_candidate_check(const SweepResult& result, const TestFunction& mass_phi,
                                  const TestFunction& momentum_phi, double theta) {
    const SweepRun& run = smallest(result);
    const auto& series = run.result.snapshots;
    LimitReport out;
    out.mass = weak_residual_mass(series, mass_phi, series.front().rho);
    out.momentum = weak_residual_momentum(series, momentum_phi, series.front().momentum, run.params, false);
    out.admissibility = energy_admissibility(series, run.result.energy, run.params);
    for (const auto& s : series) out.vacuum_fraction = std::max(out.vacuum_fraction, reynolds_quotient(s, theta).vacuum_fraction);
    out.consistent = std::abs(out.momentum.euler.value - out.momentum.viscous_term) <= 2.0 * out.momentum.navier_stokes.tolerance;
    return out;
}

LimitReport limit_candidate_check(const SweepResult& result) {
    const double horizon = result.plan.horizon;
    return limit_candidate_check(result, default_mass_test_function(result.plan.grid, horizon),
                                 default_momentum_test_function(result.plan.grid, horizon));
}

}  // namespace ckh
