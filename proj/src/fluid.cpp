#include "ckh/fluid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ckh {

namespace {

void check_density(const RealField& rho) {
    if (!rho.all_finite()) throw std::invalid_argument("density has non-finite values");
    if (rho.values().minCoeff() < -negative_density_tolerance) {
        throw std::invalid_argument("negative density beyond tolerance");
    }
}

Eigen::ArrayXd nonnegative(const RealField& rho) { return rho.component(0).max(0.0); }

}  // namespace

double ForcingSpec::envelope_at(double t) const {
    if (envelope == Envelope::ramp) return ramp_time > 0.0 ? std::min(1.0, std::max(0.0, t / ramp_time)) : 1.0;
    return 1.0;
}

RealField ForcingSpec::evaluate(const PeriodicGrid& g, double t) const {
    RealField f(g, g.dim());
    if (!active()) return f;
    const double env = envelope_at(t);
    const double step = g.wavenumber_step();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Eigen::Vector3d x = g.coordinate(i);
        for (const auto& term : terms) {
            const double arg = step * term.wavevector.cast<double>().dot(x) + term.phase;
            const double c = env * std::cos(arg);
            for (int a = 0; a < g.dim(); ++a) f(static_cast<Eigen::Index>(i), a) += term.amplitude[a] * c;
        }
    }
    return f;
}

void ForcingSpec::validate(const PeriodicGrid& g) const {
    if (mode == Mode::none) return;
    for (const auto& term : terms) {
        if (!term.amplitude.allFinite() || !std::isfinite(term.phase)) {
            throw std::invalid_argument("forcing term has non-finite amplitude or phase");
        }
        for (int a = g.dim(); a < 3; ++a) {
            if (term.wavevector[a] != 0 || term.amplitude[a] != 0.0) {
                throw std::invalid_argument("forcing term uses an axis the grid does not have");
            }
        }
        if (term.wavevector.cwiseAbs().maxCoeff() > g.n() / 2) {
            throw std::invalid_argument("forcing wavevector outside the grid lattice");
        }
    }
    if (envelope == Envelope::ramp && !(ramp_time > 0.0)) throw std::invalid_argument("ramp_time must be positive");
}

FluidParams FluidParams::with_viscosity(double gamma, double kappa, double mu, double lambda_coeff) {
    FluidParams p;
    p.gamma = gamma;
    p.kappa = kappa;
    p.mu = mu;
    p.lambda = lambda_coeff * mu;
    p.validate();
    return p;
}

void FluidParams::validate() const {
    if (!(gamma > 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must exceed 1");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be positive");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be nonnegative");
    if (!std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite");
    if (mu > 0.0 && !(lambda + 2.0 * mu > 0.0)) throw std::invalid_argument("lambda + 2 mu must be positive");
    if (mu == 0.0 && lambda != 0.0) throw std::invalid_argument("lambda must vanish when mu = 0");
    if (!(rho_min > 0.0)) throw std::invalid_argument("rho_min must be positive");
}

State::State(double time, RealField density, RealField mom)
    : t(time), rho(std::move(density)), momentum(std::move(mom)) {
    if (rho.components() != 1) throw std::invalid_argument("density must be a scalar field");
    if (rho.grid() != momentum.grid()) throw std::invalid_argument("density and momentum grids differ");
    if (momentum.components() != rho.grid().dim()) throw std::invalid_argument("momentum needs d components");
}

void State::validate() const {
    if (!std::isfinite(t)) throw std::invalid_argument("state time is not finite");
    check_density(rho);
    if (!momentum.all_finite()) throw std::invalid_argument("momentum has non-finite values");
}

RealField pressure(const RealField& rho, const FluidParams& params) {
    check_density(rho);
    RealField p(rho.grid(), 1);
    p.component(0) = params.kappa * nonnegative(rho).pow(params.gamma);
    return p;
}

RealField sonic_speed(const RealField& rho, const FluidParams& params) {
    check_density(rho);
    RealField c(rho.grid(), 1);
    c.component(0) = std::sqrt(params.kappa) * nonnegative(rho).pow(0.5 * (params.gamma - 1.0));
    return c;
}

RealField velocity(const State& s, const FluidParams& params) {
    check_density(s.rho);
    const Eigen::ArrayXd denom = s.rho.component(0).max(params.rho_min);
    RealField u(s.grid(), s.grid().dim());
    for (int a = 0; a < s.grid().dim(); ++a) u.component(a) = s.momentum.component(a) / denom;
    return u;
}

RealField weighted_fields(const State& s, const FluidParams& params) {
    const int d = s.grid().dim();
    const RealField u = velocity(s, params);
    const Eigen::ArrayXd root = nonnegative(s.rho).sqrt();
    RealField w(s.grid(), d + 1);
    for (int a = 0; a < d; ++a) w.component(a) = root * u.component(a);
    w.component(d) = root * sonic_speed(s.rho, params).component(0);
    return w;
}

RealField energy_density(const State& s, const FluidParams& params) {
    check_density(s.rho);
    const Eigen::ArrayXd denom = s.rho.component(0).max(params.rho_min);
    RealField e(s.grid(), 1);
    e.component(0) = 0.5 * s.momentum.values().square().rowwise().sum() / denom +
                     params.kappa * nonnegative(s.rho).pow(params.gamma) / (params.gamma - 1.0);
    return e;
}

double total_energy(const State& s, const FluidParams& params) {
    return energy_density(s, params).integral()[0];
}

double total_mass(const State& s) { return s.rho.integral()[0]; }

Eigen::VectorXd total_momentum(const State& s) { return s.momentum.integral().matrix().transpose(); }

}  // namespace ckh
