#include "ckh/diagnostics.hpp"

#include "ckh/fft.hpp"
#include "ckh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ckh {

namespace {

void require_series(Series series, std::size_t min_count, const char* what) {
    if (series.size() < min_count) {
        throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(min_count) +
                                    " snapshots");
    }
    const PeriodicGrid& g = series.front().grid();
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].grid() != g) throw std::invalid_argument(std::string(what) + ": snapshots on different grids");
        if (i > 0 && !(series[i].t > series[i - 1].t)) {
            throw std::invalid_argument(std::string(what) + ": snapshot times are not strictly increasing");
        }
    }
}

std::vector<double> times_of(Series series) {
    std::vector<double> t(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) t[i] = series[i].t;
    return t;
}

struct LineFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit out;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return out;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (out.intercept + out.slope * x[i]);
        ss += r * r;
    }
    out.residual = std::sqrt(ss / n);
    return out;
}

/// Log-log fit over entries with both coordinates positive.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    return fit_line(lx, ly);
}

double sum_pow_abs(const Eigen::ArrayXd& v, double p) {
    return permutation_invariant_sum<double>(v.abs().pow(p));
}

/// Cosine and sine of the lattice phase 2 pi (k . i) / n, from an integer phase
/// so the values are exactly periodic.
struct Phase {
    double c;
    double s;
};

Phase lattice_phase(const PeriodicGrid& g, const LatticeOffset& k, std::size_t idx) {
    const auto i = g.unflatten(idx);
    const long n = g.n();
    long ph = 0;
    for (int a = 0; a < g.dim(); ++a) ph += static_cast<long>(k[a]) * i[a];
    ph = ((ph % n) + n) % n;
    const double arg = 2.0 * std::numbers::pi * static_cast<double>(ph) / static_cast<double>(n);
    return {std::cos(arg), std::sin(arg)};
}

void check_test_function(const TestFunction& phi, const PeriodicGrid& g, int components, double t0, double t_end) {
    if (static_cast<int>(phi.components.size()) != components) {
        throw std::invalid_argument("test function has " + std::to_string(phi.components.size()) +
                                    " components, expected " + std::to_string(components));
    }
    for (const auto& poly : phi.components) {
        for (const auto& term : poly) {
            for (int a = g.dim(); a < 3; ++a) {
                if (term.wavevector[a] != 0) throw std::invalid_argument("test function uses an axis the grid lacks");
            }
        }
    }
    if (!(phi.support_end > 0.0)) throw std::invalid_argument("test function support must be positive");
    if (!(t0 + phi.support_end < t_end)) {
        throw std::invalid_argument("unsupported test function: it does not vanish before the end of the series");
    }
}

/// Trapezoid on the full set and on every other snapshot; the coarse set keeps
/// the first and last index so both rules cover the same interval.
WeakResidual richardson(const std::vector<double>& t, const std::vector<double>& g, const std::vector<double>& g_abs,
                        double boundary) {
    const double fine = trapezoid(t, g) + boundary;
    std::vector<double> tc;
    std::vector<double> gc;
    for (std::size_t i = 0; i < t.size(); i += 2) {
        tc.push_back(t[i]);
        gc.push_back(g[i]);
    }
    if ((t.size() - 1) % 2 != 0) {
        tc.push_back(t.back());
        gc.push_back(g.back());
    }
    const double coarse = trapezoid(tc, gc) + boundary;
    const double scale = std::abs(boundary) + trapezoid(t, g_abs);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    return {fine, std::max(std::abs(fine - coarse) / 3.0, floor)};
}

}  // namespace

double trapezoid(std::span<const double> t, std::span<const double> v) {
    if (t.size() != v.size()) throw std::invalid_argument("trapezoid: size mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
    return s;
}

double Spectrum::wavenumber(int s) const { return 2.0 * std::numbers::pi / period * s; }

double Spectrum::spectral_density(int s) const {
    if (s <= 0) return 0.0;
    const double k = wavenumber(s);
    return energy[static_cast<std::size_t>(s)] / (4.0 * std::numbers::pi * k * k);
}

double Spectrum::total_energy() const {
    double sum = 0.0;
    for (double e : energy) sum += e;
    return sum;
}

ShellMap shell_map(const PeriodicGrid& g) {
    ShellMap map;
    map.shell_of_mode.resize(g.size());
    const int max_shell = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(g.dim())) * g.n() / 2.0)) + 1;
    map.count.assign(static_cast<std::size_t>(max_shell) + 1, 0);
    int top = 0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const int s = static_cast<int>(std::lround(g.wavevector_index(idx).cast<double>().norm()));
        map.shell_of_mode[idx] = s;
        ++map.count[static_cast<std::size_t>(s)];
        top = std::max(top, s);
    }
    map.count.resize(static_cast<std::size_t>(top) + 1);
    return map;
}

namespace {

struct ModePowers {
    Eigen::ArrayXd energy;  // weighted energy per mode
    Eigen::ArrayXd raw;     // sum over components of |w_hat|^2
};

ModePowers mode_powers(const State& state, const FluidParams& params) {
    state.validate();
    const int d = state.grid().dim();
    const auto hat = dft_forward(weighted_fields(state, params));
    const auto a2 = hat.coefficients().abs2().eval();
    ModePowers out;
    out.raw = a2.rowwise().sum();
    out.energy = 0.5 * a2.leftCols(d).rowwise().sum() + a2.col(d) / (params.gamma - 1.0);
    return out;
}

Spectrum bin(const ModePowers& powers, const ShellMap& map, double t, double period) {
    Spectrum sp;
    sp.t = t;
    sp.period = period;
    sp.energy.assign(map.count.size(), 0.0);
    sp.raw.assign(map.count.size(), 0.0);
    sp.modes = map.count;
    for (std::size_t idx = 0; idx < map.shell_of_mode.size(); ++idx) {
        const auto s = static_cast<std::size_t>(map.shell_of_mode[idx]);
        const auto i = static_cast<Eigen::Index>(idx);
        sp.energy[s] += powers.energy[i];
        sp.raw[s] += powers.raw[i];
    }
    return sp;
}

}  // namespace

Spectrum shell_spectrum(const State& state, const FluidParams& params) {
    return bin(mode_powers(state, params), shell_map(state.grid()), state.t, state.grid().period());
}

SpectrumSeries time_integrated_spectrum(Series series, const FluidParams& params) {
    require_series(series, 2, "time_integrated_spectrum");
    const PeriodicGrid& g = series.front().grid();
    const ShellMap map = shell_map(g);

    std::vector<ModePowers> powers(series.size());
    parallel_for(series.size(), [&](std::size_t i) { powers[i] = mode_powers(series[i], params); });

    SpectrumSeries out{g, series.back().t - series.front().t, {}, {}, {}, Eigen::ArrayXd::Zero(0), map.count};
    for (std::size_t i = 0; i < series.size(); ++i) out.spectra.push_back(bin(powers[i], map, series[i].t, g.period()));

    const auto t = times_of(series);
    const std::size_t shells = map.count.size();
    out.energy_integral.assign(shells, 0.0);
    out.raw_integral.assign(shells, 0.0);
    std::vector<double> column(series.size());
    for (std::size_t s = 0; s < shells; ++s) {
        for (std::size_t i = 0; i < series.size(); ++i) column[i] = out.spectra[i].energy[s];
        out.energy_integral[s] = trapezoid(t, column);
        for (std::size_t i = 0; i < series.size(); ++i) column[i] = out.spectra[i].raw[s];
        out.raw_integral[s] = trapezoid(t, column);
    }
    out.mode_integral = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 1; i < series.size(); ++i) {
        out.mode_integral += 0.5 * (t[i] - t[i - 1]) * (powers[i].raw + powers[i - 1].raw);
    }
    return out;
}

PowerLawFit ckh_fit(const SpectrumSeries& spec, int k_lo, int k_hi) {
    if (k_lo < 1 || k_hi < k_lo) throw std::invalid_argument("ckh_fit: need 1 <= k_lo <= k_hi");
    std::vector<double> lk;
    std::vector<double> le;
    PowerLawFit fit;
    const int top = std::min(k_hi, static_cast<int>(spec.energy_integral.size()) - 1);
    for (int s = k_lo; s <= top; ++s) {
        const auto si = static_cast<std::size_t>(s);
        if (spec.modes[si] == 0) continue;
        const double v = spec.energy_integral[si];
        if (!(v > 0.0)) continue;
        const double k = spec.wavenumber(s);
        lk.push_back(std::log(k));
        le.push_back(std::log(v));
        fit.empirical_bound = std::max(fit.empirical_bound, std::pow(k, 5.0 / 3.0) * v);
    }
    fit.shells = static_cast<int>(lk.size());
    if (fit.shells < 4) {
        throw std::invalid_argument("ckh_fit: window [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) +
                                    "] holds " + std::to_string(fit.shells) + " nonempty shells, need 4");
    }
    const LineFit line = fit_line(lk, le);
    fit.exponent = line.slope;
    fit.prefactor = std::exp(line.intercept);
    fit.residual = line.residual;
    return fit;
}

CkhwStatistic ckhw_statistic(const SpectrumSeries& spec, double beta, int k_star) {
    const int cap = spec.grid.dealias_cutoff();
    if (k_star < 1 || k_star > cap) {
        throw std::invalid_argument("ckhw_statistic: k_star " + std::to_string(k_star) +
                                    " outside the dealiased range [1, " + std::to_string(cap) + "]");
    }
    CkhwStatistic out;
    out.beta = beta;
    out.k_star = k_star;
    for (int s = k_star; s <= cap && s < static_cast<int>(spec.raw_integral.size()); ++s) {
        const auto si = static_cast<std::size_t>(s);
        if (spec.modes[si] == 0) continue;
        const double v = std::pow(spec.wavenumber(s), 3.0 + beta) * spec.raw_integral[si] / spec.modes[si];
        if (out.argmax_shell < 0 || v > out.value) {
            out.value = v;
            out.argmax_shell = s;
        }
    }
    const double step = spec.grid.wavenumber_step();
    for (std::size_t idx = 0; idx < spec.grid.size(); ++idx) {
        const double nn = spec.grid.wavevector_index(idx).cast<double>().norm();
        const long s = std::lround(nn);
        if (s < k_star || s > cap) continue;
        const double k = step * nn;
        out.per_mode_sup = std::max(out.per_mode_sup,
                                    std::pow(k, 3.0 + beta) * spec.mode_integral[static_cast<Eigen::Index>(idx)]);
    }
    return out;
}

double ckh_ckhw_factor(const SpectrumSeries& spec, const FluidParams& params, int k_lo, int k_hi) {
    const double c_gamma = std::max(0.5, 1.0 / (params.gamma - 1.0));
    double worst = 0.0;
    const int top = std::min(k_hi, static_cast<int>(spec.modes.size()) - 1);
    for (int s = std::max(k_lo, 1); s <= top; ++s) {
        const double k = spec.wavenumber(s);
        worst = std::max(worst, spec.modes[static_cast<std::size_t>(s)] / (k * k));
    }
    return c_gamma * worst;
}

double fractional_sobolev_norm(const SpectrumSeries& spec, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("fractional_sobolev_norm: alpha must be >= 0");
    double sum = 0.0;
    for (std::size_t idx = 0; idx < spec.grid.size(); ++idx) {
        const double k2 = spec.grid.wavevector(idx).squaredNorm();
        sum += std::pow(1.0 + k2, alpha) * spec.mode_integral[static_cast<Eigen::Index>(idx)];
    }
    return std::sqrt(sum);
}

ModulusTable space_modulus(Series series, const std::vector<Eigen::Vector3d>& shifts, double gamma) {
    require_series(series, 2, "space_modulus");
    if (!(gamma >= 1.0)) throw std::invalid_argument("space_modulus: gamma must be >= 1");
    const PeriodicGrid& g = series.front().grid();
    std::vector<LatticeOffset> offsets;
    for (const auto& dx : shifts) offsets.push_back(lattice_offset(g, dx));

    const auto t = times_of(series);
    ModulusTable table;
    table.kind = ModulusTable::Kind::space;
    table.density.assign(shifts.size(), 0.0);
    table.momentum.assign(shifts.size(), 0.0);
    for (const auto& dx : shifts) table.shifts.push_back(dx.norm());

    const double dv = g.cell_volume();
    parallel_for(shifts.size(), [&](std::size_t j) {
        std::vector<double> dens(series.size());
        std::vector<double> mom(series.size());
        for (std::size_t i = 0; i < series.size(); ++i) {
            const auto& s = series[i];
            const auto rho = shift_field(s.rho, offsets[j]);
            const auto m = shift_field(s.momentum, offsets[j]);
            dens[i] = sum_pow_abs((rho.values() - s.rho.values()).col(0), gamma) * dv;
            mom[i] = permutation_invariant_sum<double>((m.values() - s.momentum.values()).square().rowwise().sum()) * dv;
        }
        table.density[j] = trapezoid(t, dens);
        table.momentum[j] = trapezoid(t, mom);
    });

    const auto fd = fit_loglog(table.shifts, table.density);
    const auto fm = fit_loglog(table.shifts, table.momentum);
    table.density_slope = fd.slope;
    table.density_fit_residual = fd.residual;
    table.momentum_slope = fm.slope;
    table.momentum_fit_residual = fm.residual;
    return table;
}

ModulusTable time_modulus(Series series, const std::vector<double>& lags, double gamma) {
    require_series(series, 2, "time_modulus");
    if (!(gamma >= 1.0)) throw std::invalid_argument("time_modulus: gamma must be >= 1");
    const auto t = times_of(series);
    const double cadence = t[1] - t[0];
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - cadence) > 1e-9 * cadence) {
            throw std::invalid_argument("time_modulus: snapshots are not uniformly spaced");
        }
    }
    const double dv = series.front().grid().cell_volume();
    ModulusTable table;
    table.kind = ModulusTable::Kind::time;
    table.shifts = lags;
    table.density.assign(lags.size(), 0.0);
    table.momentum.assign(lags.size(), 0.0);

    std::vector<std::size_t> steps;
    for (double lag : lags) {
        const double q = lag / cadence;
        const double r = std::round(q);
        if (lag < 0.0 || std::abs(q - r) > 1e-6 * std::max(1.0, q)) {
            throw std::invalid_argument("time_modulus: lag " + std::to_string(lag) +
                                        " is not a multiple of the snapshot cadence " + std::to_string(cadence));
        }
        if (lag > 0.0 && r < 1.0) throw std::invalid_argument("time_modulus: lag below cadence resolution");
        const auto l = static_cast<std::size_t>(r);
        if (l + 1 >= series.size()) {
            throw std::invalid_argument("time_modulus: lag " + std::to_string(lag) + " leaves an empty integration window");
        }
        steps.push_back(l);
    }

    parallel_for(lags.size(), [&](std::size_t j) {
        const std::size_t l = steps[j];
        const std::size_t count = series.size() - l;
        std::vector<double> tt(count);
        std::vector<double> dens(count);
        std::vector<double> mom(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& a = series[i];
            const auto& b = series[i + l];
            tt[i] = t[i];
            dens[i] = sum_pow_abs((b.rho.values() - a.rho.values()).col(0), gamma) * dv;
            mom[i] = permutation_invariant_sum<double>((b.momentum.values() - a.momentum.values()).square().rowwise().sum()) * dv;
        }
        table.density[j] = trapezoid(tt, dens);
        table.momentum[j] = trapezoid(tt, mom);
    });

    const auto fd = fit_loglog(table.shifts, table.density);
    const auto fm = fit_loglog(table.shifts, table.momentum);
    table.density_slope = fd.slope;
    table.density_fit_residual = fd.residual;
    table.momentum_slope = fm.slope;
    table.momentum_fit_residual = fm.residual;
    return table;
}

HighIntegrability high_integrability(Series series, const FluidParams& params, double q1, double q2, double q) {
    require_series(series, 2, "high_integrability");
    if (!(q1 > params.gamma)) throw std::invalid_argument("high_integrability: q1 must exceed gamma");
    if (!(q2 > 2.0)) throw std::invalid_argument("high_integrability: q2 must exceed 2");
    if (!(q > 2.0)) throw std::invalid_argument("high_integrability: q must exceed 2");
    const auto t = times_of(series);
    const double dv = series.front().grid().cell_volume();
    std::vector<double> r(series.size());
    std::vector<double> m(series.size());
    std::vector<double> w(series.size());
    parallel_for(series.size(), [&](std::size_t i) {
        const auto& s = series[i];
        r[i] = sum_pow_abs(s.rho.values().col(0), q1) * dv;
        m[i] = permutation_invariant_sum<double>(s.momentum.magnitude().pow(q2)) * dv;
        w[i] = permutation_invariant_sum<double>(weighted_fields(s, params).magnitude().pow(q)) * dv;
    });
    return {std::pow(trapezoid(t, r), 1.0 / q1), std::pow(trapezoid(t, m), 1.0 / q2),
            std::pow(trapezoid(t, w), 1.0 / q)};
}

double spacetime_distance(Series a, Series b, double p, bool momentum_channel) {
    require_series(a, 2, "spacetime_distance");
    if (a.size() != b.size()) throw std::invalid_argument("spacetime_distance: series lengths differ");
    if (!(p >= 1.0)) throw std::invalid_argument("spacetime_distance: exponent must be >= 1");
    const auto t = times_of(a);
    const double dv = a.front().grid().cell_volume();
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].grid() != b[i].grid()) throw std::invalid_argument("spacetime_distance: grids differ");
        if (std::abs(a[i].t - b[i].t) > 1e-9 * std::max(1.0, std::abs(a[i].t))) {
            throw std::invalid_argument("spacetime_distance: snapshot times differ");
        }
        const auto& fa = momentum_channel ? a[i].momentum : a[i].rho;
        const auto& fb = momentum_channel ? b[i].momentum : b[i].rho;
        const Eigen::ArrayXd diff = (fa.values() - fb.values()).square().rowwise().sum().sqrt();
        v[i] = permutation_invariant_sum<double>(diff.pow(p)) * dv;
    }
    return std::pow(trapezoid(t, v), 1.0 / p);
}

double TestFunction::temporal(double t) const {
    if (t >= support_end) return 0.0;
    const double s = 1.0 - t / support_end;
    return s * s * s;
}

double TestFunction::temporal_derivative(double t) const {
    if (t >= support_end) return 0.0;
    const double s = 1.0 - t / support_end;
    return -3.0 * s * s / support_end;
}

RealField TestFunction::spatial(const PeriodicGrid& g) const {
    RealField out(g, static_cast<int>(components.size()));
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (const auto& term : components[c]) {
            for (std::size_t idx = 0; idx < g.size(); ++idx) {
                const auto ph = lattice_phase(g, term.wavevector, idx);
                out(static_cast<Eigen::Index>(idx), static_cast<int>(c)) += term.cos_coeff * ph.c + term.sin_coeff * ph.s;
            }
        }
    }
    return out;
}

RealField TestFunction::spatial_gradient(const PeriodicGrid& g) const {
    const int d = g.dim();
    RealField out(g, static_cast<int>(components.size()) * d);
    const double step = g.wavenumber_step();
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (const auto& term : components[c]) {
            for (std::size_t idx = 0; idx < g.size(); ++idx) {
                const auto ph = lattice_phase(g, term.wavevector, idx);
                const double dtheta = -term.cos_coeff * ph.s + term.sin_coeff * ph.c;
                for (int b = 0; b < d; ++b) {
                    out(static_cast<Eigen::Index>(idx), static_cast<int>(c) * d + b) += step * term.wavevector[b] * dtheta;
                }
            }
        }
    }
    return out;
}

TestFunction default_mass_test_function(const PeriodicGrid& g, double horizon) {
    TrigPolynomial p{{LatticeOffset(0, 0, 0), 1.0, 0.0}, {LatticeOffset(1, 0, 0), 0.5, 0.2}};
    if (g.dim() > 1) p.push_back({LatticeOffset(1, 1, 0), 0.0, 0.3});
    if (g.dim() > 2) p.push_back({LatticeOffset(0, 1, -1), 0.25, 0.0});
    return {{p}, 0.8 * horizon};
}

TestFunction default_momentum_test_function(const PeriodicGrid& g, double horizon) {
    const int d = g.dim();
    std::vector<TrigPolynomial> comps(static_cast<std::size_t>(d));
    comps[0] = {{LatticeOffset(1, 0, 0), 0.5, 0.0}, {LatticeOffset(2, 0, 0), 0.0, 0.2}};
    if (d > 1) {
        comps[0].push_back({LatticeOffset(0, 1, 0), 0.0, 1.0});
        comps[1] = {{LatticeOffset(1, 0, 0), 1.0, 0.0}, {LatticeOffset(1, 1, 0), 0.0, 0.4}};
    }
    if (d > 2) comps[2] = {{LatticeOffset(0, 1, 0), 0.6, 0.0}, {LatticeOffset(1, 0, 1), 0.0, 0.3}};
    return {comps, 0.8 * horizon};
}

WeakResidual weak_residual_mass(Series series, const TestFunction& phi, const RealField& rho0) {
    require_series(series, 3, "weak_residual_mass");
    const PeriodicGrid& g = series.front().grid();
    if (rho0.grid() != g || rho0.components() != 1) throw std::invalid_argument("weak_residual_mass: bad initial density");
    const double t0 = series.front().t;
    check_test_function(phi, g, 1, t0, series.back().t);

    const auto Phi = phi.spatial(g);
    const auto grad = phi.spatial_gradient(g);
    const double dv = g.cell_volume();
    const auto t = times_of(series);
    std::vector<double> val(series.size());
    std::vector<double> mag(series.size());
    parallel_for(series.size(), [&](std::size_t i) {
        const auto& s = series[i];
        const double tau = s.t - t0;
        const Eigen::ArrayXd a = phi.temporal_derivative(tau) * s.rho.values().col(0) * Phi.values().col(0);
        const Eigen::ArrayXd b = phi.temporal(tau) * (s.momentum.values() * grad.values()).rowwise().sum();
        val[i] = (a + b).sum() * dv;
        mag[i] = (a.abs() + b.abs()).sum() * dv;
    });
    const double boundary = phi.temporal(0.0) * (rho0.values().col(0) * Phi.values().col(0)).sum() * dv;
    return richardson(t, val, mag, boundary);
}

MomentumResidual weak_residual_momentum(Series series, const TestFunction& phi, const RealField& m0,
                                        const FluidParams& params, bool include_viscous) {
    require_series(series, 3, "weak_residual_momentum");
    params.validate();
    const PeriodicGrid& g = series.front().grid();
    const int d = g.dim();
    if (m0.grid() != g || m0.components() != d) throw std::invalid_argument("weak_residual_momentum: bad initial momentum");
    const double t0 = series.front().t;
    check_test_function(phi, g, d, t0, series.back().t);

    const auto Phi = phi.spatial(g);
    const auto grad = phi.spatial_gradient(g);
    Eigen::ArrayXd div_phi = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(g.size()));
    for (int a = 0; a < d; ++a) div_phi += grad.values().col(a * d + a);
    const double dv = g.cell_volume();
    const auto t = times_of(series);
    const std::size_t count = series.size();

    std::vector<double> euler(count), euler_mag(count), visc(count), visc_mag(count), ns(count), ns_mag(count);
    std::vector<double> gu2(count), div2(count), gphi2(count), dphi2(count);
    const bool viscous = params.mu > 0.0;
    parallel_for(count, [&](std::size_t i) {
        const auto& s = series[i];
        const double tau = s.t - t0;
        const double psi = phi.temporal(tau);
        const double dpsi = phi.temporal_derivative(tau);
        const Eigen::ArrayXd rho = s.rho.values().col(0).max(params.rho_min);
        const auto p = pressure(s.rho, params);

        Eigen::ArrayXd ti = dpsi * (s.momentum.values() * Phi.values()).rowwise().sum();
        Eigen::ArrayXd conv = Eigen::ArrayXd::Zero(rho.size());
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                conv += s.momentum.values().col(a) * s.momentum.values().col(b) / rho * grad.values().col(a * d + b);
            }
        }
        conv *= psi;
        const Eigen::ArrayXd pres = psi * p.values().col(0) * div_phi;
        Eigen::ArrayXd force = Eigen::ArrayXd::Zero(rho.size());
        if (params.forcing.active()) {
            const auto f = params.forcing.evaluate(g, s.t);
            force = psi * s.rho.values().col(0) * (f.values() * Phi.values()).rowwise().sum();
        }
        const Eigen::ArrayXd e = ti + conv + pres + force;
        const Eigen::ArrayXd e_abs = ti.abs() + conv.abs() + pres.abs() + force.abs();
        euler[i] = e.sum() * dv;
        euler_mag[i] = e_abs.sum() * dv;

        Eigen::ArrayXd v = Eigen::ArrayXd::Zero(rho.size());
        Eigen::ArrayXd g2 = Eigen::ArrayXd::Zero(rho.size());
        Eigen::ArrayXd dvu = Eigen::ArrayXd::Zero(rho.size());
        if (viscous) {
            const auto gu = gradient(velocity(s, params));
            for (int a = 0; a < d; ++a) dvu += gu.values().col(a * d + a);
            for (int a = 0; a < d; ++a) {
                for (int b = 0; b < d; ++b) {
                    Eigen::ArrayXd sigma = params.mu * (gu.values().col(a * d + b) + gu.values().col(b * d + a));
                    if (a == b) sigma += params.lambda * dvu;
                    v += sigma * grad.values().col(a * d + b);
                    g2 += gu.values().col(a * d + b).square();
                }
            }
            v *= psi;
        }
        visc[i] = v.sum() * dv;
        visc_mag[i] = v.abs().sum() * dv;
        ns[i] = euler[i] - visc[i];
        ns_mag[i] = euler_mag[i] + visc_mag[i];
        gu2[i] = g2.sum() * dv;
        div2[i] = dvu.square().sum() * dv;
        gphi2[i] = psi * psi * grad.values().square().sum() * dv;
        dphi2[i] = psi * psi * div_phi.square().sum() * dv;
    });

    const double boundary = phi.temporal(0.0) * (m0.values() * Phi.values()).sum() * dv;
    MomentumResidual out;
    out.euler = richardson(t, euler, euler_mag, boundary);
    out.navier_stokes = richardson(t, ns, ns_mag, boundary);
    out.viscous_term = trapezoid(t, visc);
    out.viscous_bound = 2.0 * params.mu * std::sqrt(trapezoid(t, gu2) * trapezoid(t, gphi2)) +
                        std::abs(params.lambda) * std::sqrt(trapezoid(t, div2) * trapezoid(t, dphi2));
    out.value = include_viscous ? out.navier_stokes.value : out.euler.value;
    return out;
}

AdmissibilityReport energy_admissibility(Series series, const EnergyReport& report, const FluidParams& params) {
    require_series(series, 1, "energy_admissibility");
    if (report.rows.size() != series.size()) {
        throw std::invalid_argument("energy_admissibility: ledger has " + std::to_string(report.rows.size()) +
                                    " rows for " + std::to_string(series.size()) + " snapshots");
    }
    AdmissibilityReport out;
    std::vector<double> energy(series.size());
    parallel_for(series.size(), [&](std::size_t i) { energy[i] = total_energy(series[i], params); });
    const double e0 = energy.front();
    out.max_residual = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& row = report.rows[i];
        if (std::abs(row.t - series[i].t) > 1e-9 * std::max(1.0, std::abs(row.t))) {
            throw std::invalid_argument("energy_admissibility: ledger times do not match the snapshots");
        }
        const double r = energy[i] - e0 - row.work;
        out.t.push_back(series[i].t);
        out.residual.push_back(r);
        out.max_residual = std::max(out.max_residual, r);
        out.ledger_defect = std::max(out.ledger_defect, std::abs(r + row.dissipation));
    }
    return out;
}

ReynoldsQuotient reynolds_quotient(const State& state, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("reynolds_quotient: threshold must be positive");
    const PeriodicGrid& g = state.grid();
    const int d = g.dim();
    ReynoldsQuotient out{RealField(g, d * d), RealField(g, 1), {}, 0.0};
    const Eigen::ArrayXd rho = state.rho.values().col(0);
    out.vacuum = rho < theta;
    const Eigen::ArrayXd inv = out.vacuum.select(Eigen::ArrayXd::Zero(rho.size()), 1.0 / rho.max(theta));
    const auto& m = state.momentum.values();
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) out.tensor.component(a * d + b) = m.col(a) * m.col(b) * inv;
        out.trace.component(0) += m.col(a).square() * inv;
    }
    out.vacuum_fraction = static_cast<double>(out.vacuum.count()) / static_cast<double>(rho.size());
    return out;
}

GradientNorms velocity_gradient_norms(Series series, const FluidParams& params) {
    require_series(series, 2, "velocity_gradient_norms");
    const int d = series.front().grid().dim();
    const double dv = series.front().grid().cell_volume();
    const auto t = times_of(series);
    std::vector<double> g2(series.size());
    std::vector<double> d2(series.size());
    parallel_for(series.size(), [&](std::size_t i) {
        const auto gu = gradient(velocity(series[i], params));
        Eigen::ArrayXd div = Eigen::ArrayXd::Zero(gu.size());
        for (int a = 0; a < d; ++a) div += gu.values().col(a * d + a);
        g2[i] = gu.values().square().sum() * dv;
        d2[i] = div.square().sum() * dv;
    });
    return {std::sqrt(trapezoid(t, g2)), std::sqrt(trapezoid(t, d2))};
}

}  // namespace ckh
