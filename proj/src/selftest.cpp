#include "ckh/cli.hpp"

#include "ckh/config.hpp"
#include "ckh/diagnostics.hpp"
#include "ckh/fft.hpp"
#include "ckh/io.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

namespace ckh {

namespace {

constexpr double pi = std::numbers::pi;

/// O(N^2) forward transform with the same 1/N scaling as dft_forward.
std::vector<std::complex<double>> slow_dft(const RealField& f) {
    const auto& g = f.grid();
    const int n = g.n();
    std::vector<std::complex<double>> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto kk = g.unflatten(k);
        std::complex<double> acc = 0.0;
        for (std::size_t x = 0; x < g.size(); ++x) {
            const auto xx = g.unflatten(x);
            long phase = 0;
            for (int a = 0; a < g.dim(); ++a) phase += static_cast<long>(kk[a]) * xx[a];
            acc += f(static_cast<Eigen::Index>(x)) * std::polar(1.0, -2.0 * pi * static_cast<double>(phase % n) / n);
        }
        out[k] = acc / static_cast<double>(g.size());
    }
    return out;
}

RealField noise(const PeriodicGrid& g, int comps, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    RealField f(g, comps);
    for (Eigen::Index i = 0; i < f.values().size(); ++i) f.values().data()[i] = u(rng);
    return f;
}

bool check_dft(std::string& detail) {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int d = 1; d <= 3; ++d) {
        const auto g = make_grid(d, d == 3 ? 8 : 16, 2 * pi);
        const auto f = noise(g, 1, rng, -1, 1);
        const auto fast = dft_forward(f);
        const auto slow = slow_dft(f);
        for (std::size_t k = 0; k < g.size(); ++k) {
            worst = std::max(worst, std::abs(fast(static_cast<Eigen::Index>(k)) - slow[k]));
        }
    }
    detail = "max |fft - direct| = " + format_double(worst);
    return worst < 1e-12;
}

bool check_round_trip(std::string& detail) {
    std::mt19937_64 rng(12);
    const auto g = make_grid(2, 32, 1.0);
    const auto f = noise(g, 2, rng, -1, 1);
    const double err = (dft_inverse(dft_forward(f)).values() - f.values()).abs().maxCoeff();
    detail = "max inverse round-trip error = " + format_double(err);
    return err < 1e-13;
}

bool check_parseval(std::string& detail) {
    std::mt19937_64 rng(13);
    const auto g = make_grid(3, 16, 2 * pi);
    const FluidParams p = FluidParams::with_viscosity(1.4, 1.0, 0.0, 0.0);
    State s(0.0, noise(g, 1, rng, 0.5, 1.5), noise(g, 3, rng, -1, 1));
    const auto sp = shell_spectrum(s, p);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < s.rho.size(); ++i) {
        const double r = s.rho(i);
        sum += 0.5 * s.momentum.values().row(i).square().sum() / r + p.kappa * std::pow(r, p.gamma) / (p.gamma - 1.0);
    }
    const double volume_energy = sum * g.cell_volume() / g.volume();
    const double rel = std::abs(sp.total_energy() - volume_energy) / volume_energy;
    detail = "relative shell-sum defect = " + format_double(rel);
    return rel < 1e-10;
}

bool check_snapshot(std::string& detail) {
    std::mt19937_64 rng(14);
    const auto g = make_grid(2, 16, 2 * pi);
    const FluidParams p = FluidParams::with_viscosity(1.4, 1.0, 1e-2, -2.0 / 3.0);
    const State s(0.25, noise(g, 1, rng, 0.5, 1.5), noise(g, 2, rng, -1, 1));
    auto bytes = encode_snapshot(s, p);
    const auto back = decode_snapshot(bytes);
    const bool exact = (back.state.rho.values() == s.rho.values()).all() &&
                       (back.state.momentum.values() == s.momentum.values()).all() && back.state.t == s.t;
    bytes[bytes.size() / 2] ^= 0x01;
    bool caught = false;
    try {
        decode_snapshot(bytes);
    } catch (const SnapshotError&) {
        caught = true;
    }
    detail = std::string("bit-exact ") + (exact ? "yes" : "no") + ", corruption " + (caught ? "detected" : "missed");
    return exact && caught;
}

bool check_config(std::string& detail) {
    const auto c = parse_config("[grid]\ndim = 2\nn = 32\n[fluid]\nmu = 0.01\n");
    const bool defaults = c.kappa == 1.0 && c.lambda_coeff == -2.0 / 3.0;
    const bool trip = parse_config(emit_config(c)) == c;
    detail = std::string("defaults ") + (defaults ? "ok" : "wrong") + ", round trip " + (trip ? "ok" : "broken");
    return defaults && trip;
}

bool check_ledger(std::string& detail) {
    const auto g = make_grid(2, 32, 2 * pi);
    const FluidParams p = FluidParams::with_viscosity(1.4, 1.0, 1e-2, -2.0 / 3.0);
    IcSpec ic;
    const State s0 = preset_ic(ic, g, p);
    RunOptions opt;
    opt.horizon = 0.25;
    opt.snapshot_every = 4;
    const auto r = run(s0, p, opt);
    double worst = 0.0;
    for (const auto& row : r.energy.rows) worst = std::max(worst, std::abs(row.residual));
    const double rel = worst / r.energy.initial_energy;
    const double mass = std::abs(total_mass(r.snapshots.back()) - total_mass(s0)) / total_mass(s0);
    detail = "ledger residual / E0 = " + format_double(rel) + ", mass drift = " + format_double(mass);
    return rel < 1e-6 && mass < 1e-10 && r.energy.dissipation_nondecreasing();
}

bool check_fit(std::string& detail) {
    const auto g = make_grid(1, 64, 2 * pi);
    const FluidParams p = FluidParams::with_viscosity(2.0, 1.0, 0.0, 0.0);
    RealField m(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) m(static_cast<Eigen::Index>(i)) = 0.1 * std::sin(g.coordinate(i)[0]);
    RealField rho(g, 1);
    rho.values().setConstant(1.0);
    const std::vector<State> series{State(0.0, rho, m), State(1.0, rho, m)};
    auto spec = time_integrated_spectrum(series, p);
    for (std::size_t s = 1; s < spec.energy_integral.size(); ++s) {
        spec.energy_integral[s] = std::pow(spec.wavenumber(static_cast<int>(s)), -5.0 / 3.0);
    }
    const auto fit = ckh_fit(spec, 2, 20);
    detail = "fitted exponent = " + format_double(fit.exponent);
    return std::abs(fit.exponent + 5.0 / 3.0) < 1e-8;
}

bool check_modulus(std::string& detail) {
    // rho = 1 + sin(x)/2 shifted by pi: |rho(x+pi) - rho(x)|^2 = sin^2 x, integral pi over [0, 2pi).
    const auto g = make_grid(1, 32, 2 * pi);
    const double T = 1.5;
    RealField rho(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        rho(static_cast<Eigen::Index>(i)) = 1.0 + 0.5 * std::sin(g.coordinate(i)[0]);
    }
    const RealField m(g, 1);
    const std::vector<State> series{State(0.0, rho, m), State(T, rho, m)};
    const auto tab = space_modulus(series, {Eigen::Vector3d(pi, 0, 0)}, 2.0);
    const double err = std::abs(tab.density[0] - T * pi);
    detail = "closed-form defect = " + format_double(err);
    return err < 1e-8;
}

}  // namespace

bool run_selftest(std::ostream& out) {
    struct Check {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Check> checks{
        {"fft matches direct summation", check_dft},
        {"inverse transform round trip", check_round_trip},
        {"shell sums match per-volume energy", check_parseval},
        {"snapshot round trip and checksum", check_snapshot},
        {"config defaults and round trip", check_config},
        {"energy ledger on a short viscous run", check_ledger},
        {"power-law fit on a synthetic spectrum", check_fit},
        {"space modulus closed form", check_modulus},
    };
    bool all = true;
    for (const auto& c : checks) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("threw: ") + e.what();
        }
        all = all && ok;
        out << (ok ? "[ ok ] " : "[FAIL] ") << c.name << ": " << detail << '\n';
    }
    out << (all ? "selftest passed" : "selftest FAILED") << '\n';
    return all;
}

}  // namespace ckh
