#include "ckh/config.hpp"

#include "ckh/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ckh {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"grid", {"dim", "n", "period"}},
        {"fluid", {"gamma", "kappa", "mu", "lambda_coeff", "rho_min"}},
        {"forcing", {"mode", "envelope", "ramp_time", "terms"}},
        {"initial", {"preset", "seed", "amplitude", "rho0"}},
        {"run", {"horizon", "snapshot_every", "cfl", "dt", "euler_reference"}},
        {"diagnostics",
         {"beta", "alpha", "k_lo", "k_hi", "k_star", "space_shifts", "time_lags", "q1", "q2", "q", "theta"}},
        {"sweep", {"mu0", "ratio", "length", "mu_list", "reference_mu", "p1", "p2"}},
        {"output", {"dir"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a finite number, got '" + raw + "'");
}

long long to_integer(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used == v.size()) return i;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + raw + "'");
}

int to_int(const std::string& key, const std::string& raw) {
    const long long v = to_integer(key, raw);
    if (v < -(1LL << 31) || v > (1LL << 31) - 1) throw ConfigError(key + ": integer out of range");
    return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& raw) {
    std::vector<int> out;
    for (const auto& item : split(raw, ',')) out.push_back(to_int(key, item));
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    for (const auto& item : split(raw, ',')) out.push_back(to_double(key, item));
    return out;
}

std::vector<ForcingTerm> to_terms(const std::string& raw) {
    std::vector<ForcingTerm> out;
    for (const auto& item : split(raw, ';')) {
        std::istringstream ss(item);
        std::vector<std::string> parts;
        for (std::string tok; ss >> tok;) parts.push_back(tok);
        if (parts.size() != 7) throw ConfigError("forcing.terms: each term needs 'kx ky kz ax ay az phase'");
        ForcingTerm t;
        for (int a = 0; a < 3; ++a) t.wavevector[a] = to_int("forcing.terms", parts[static_cast<std::size_t>(a)]);
        for (int a = 0; a < 3; ++a) t.amplitude[a] = to_double("forcing.terms", parts[static_cast<std::size_t>(3 + a)]);
        t.phase = to_double("forcing.terms", parts[6]);
        out.push_back(t);
    }
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt, const char* sep = ", ") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + fmt(v[i]);
    return s;
}

void validate(ExperimentConfig& c) {
    PeriodicGrid g = [&] {
        try {
            return c.grid();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("grid: ") + e.what());
        }
    }();
    try {
        c.fluid().validate();
        c.forcing.validate(g);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("fluid: ") + e.what());
    }
    if (!(c.rho_min > 0.0)) throw ConfigError("fluid.rho_min must be positive");
    if (c.mu == 0.0 && !c.euler_reference) throw ConfigError("fluid.mu = 0 needs run.euler_reference = true");
    static const std::set<std::string> presets{"taylor-green", "acoustic-pulse", "random-band", "rest"};
    if (!presets.count(c.ic.preset)) throw ConfigError("initial.preset: unknown preset '" + c.ic.preset + "'");
    if (!(c.ic.rho0 > 0.0)) throw ConfigError("initial.rho0 must be positive");
    if (!(c.horizon > 0.0)) throw ConfigError("run.horizon must be positive");
    if (c.snapshot_every < 1) throw ConfigError("run.snapshot_every must be >= 1");
    if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw ConfigError("run.cfl must lie in (0, 1]");
    if (c.dt && !(*c.dt > 0.0)) throw ConfigError("run.dt must be positive");

    auto& d = c.diagnostics;
    const int cap = g.dealias_cutoff();
    const int base = std::max(1, c.n / 16);
    if (d.k_lo == 0) d.k_lo = base;
    if (d.k_hi == 0) d.k_hi = cap;
    if (d.k_star == 0) d.k_star = base;
    if (d.q1 == 0.0) d.q1 = 1.2 * c.gamma;
    if (d.k_lo < 1 || d.k_hi < d.k_lo + 3) throw ConfigError("diagnostics: fit window needs 1 <= k_lo and k_hi >= k_lo + 3");
    if (d.k_star < 1 || d.k_star > cap) {
        throw ConfigError("diagnostics.k_star must lie in [1, " + std::to_string(cap) + "]");
    }
    if (!(d.beta > 0.0)) throw ConfigError("diagnostics.beta must be positive");
    if (!(d.alpha >= 0.0)) throw ConfigError("diagnostics.alpha must be >= 0");
    if (!(d.q1 > c.gamma)) throw ConfigError("diagnostics.q1 must exceed gamma");
    if (!(d.q2 > 2.0)) throw ConfigError("diagnostics.q2 must exceed 2");
    if (!(d.q > 2.0)) throw ConfigError("diagnostics.q must exceed 2");
    if (!(d.theta > 0.0)) throw ConfigError("diagnostics.theta must be positive");
    for (int s : d.space_shifts) {
        if (s < 0) throw ConfigError("diagnostics.space_shifts must be >= 0 cells");
    }
    for (int l : d.time_lags) {
        if (l < 1) throw ConfigError("diagnostics.time_lags must be >= 1 snapshot interval");
    }
    if (c.p1 == 0.0) c.p1 = c.gamma;
    if (!(c.p1 >= 1.0) || !(c.p2 >= 1.0)) throw ConfigError("sweep.p1 and sweep.p2 must be >= 1");
    try {
        c.sweep_plan();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sweep: ") + e.what());
    }
}

}  // namespace

FluidParams ExperimentConfig::fluid() const {
    FluidParams p = FluidParams::with_viscosity(gamma, kappa, mu, lambda_coeff);
    p.rho_min = rho_min;
    p.forcing = forcing;
    return p;
}

RunOptions ExperimentConfig::run_options() const {
    RunOptions o;
    o.horizon = horizon;
    o.snapshot_every = snapshot_every;
    o.cfl = cfl;
    o.dt = dt;
    o.euler_reference = euler_reference;
    return o;
}

SweepPlan ExperimentConfig::sweep_plan() const {
    SweepSpec s = sweep;
    s.lambda_coeff = lambda_coeff;
    SweepExponents e;
    e.p1 = p1;
    e.p2 = p2;
    e.q1 = diagnostics.q1;
    e.q2 = diagnostics.q2;
    e.q = diagnostics.q;
    e.beta = diagnostics.beta;
    e.alpha = diagnostics.alpha;
    e.k_star = diagnostics.k_star;
    FluidParams base = fluid();
    return plan_sweep(s, grid(), base, ic, horizon, snapshot_every, cfl, e);
}

ExperimentConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
        const auto it = schema().find(section);
        if (it == schema().end()) {
            if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, node] : body) {
            if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            const std::string name = section + "." + key;
            const std::string v = trim(node.data());
            if (section == "grid") {
                if (key == "dim") c.dim = to_int(name, v);
                if (key == "n") c.n = to_int(name, v);
                if (key == "period") c.period = to_double(name, v);
            } else if (section == "fluid") {
                if (key == "gamma") c.gamma = to_double(name, v);
                if (key == "kappa") c.kappa = to_double(name, v);
                if (key == "mu") c.mu = to_double(name, v);
                if (key == "lambda_coeff") c.lambda_coeff = to_double(name, v);
                if (key == "rho_min") c.rho_min = to_double(name, v);
            } else if (section == "forcing") {
                if (key == "mode") {
                    if (v == "none") c.forcing.mode = ForcingSpec::Mode::none;
                    else if (v == "trig_sum") c.forcing.mode = ForcingSpec::Mode::trig_sum;
                    else throw ConfigError(name + ": expected none or trig_sum");
                }
                if (key == "envelope") {
                    if (v == "constant") c.forcing.envelope = ForcingSpec::Envelope::constant;
                    else if (v == "ramp") c.forcing.envelope = ForcingSpec::Envelope::ramp;
                    else throw ConfigError(name + ": expected constant or ramp");
                }
                if (key == "ramp_time") c.forcing.ramp_time = to_double(name, v);
                if (key == "terms") c.forcing.terms = to_terms(v);
            } else if (section == "initial") {
                if (key == "preset") c.ic.preset = v;
                if (key == "seed") {
                    const long long s = to_integer(name, v);
                    if (s < 0) throw ConfigError(name + ": seed must be non-negative");
                    c.ic.seed = static_cast<std::uint64_t>(s);
                }
                if (key == "amplitude") c.ic.amplitude = to_double(name, v);
                if (key == "rho0") c.ic.rho0 = to_double(name, v);
            } else if (section == "run") {
                if (key == "horizon") c.horizon = to_double(name, v);
                if (key == "snapshot_every") c.snapshot_every = to_int(name, v);
                if (key == "cfl") c.cfl = to_double(name, v);
                if (key == "dt") c.dt = v.empty() ? std::nullopt : std::optional<double>(to_double(name, v));
                if (key == "euler_reference") c.euler_reference = to_bool(name, v);
            } else if (section == "diagnostics") {
                auto& d = c.diagnostics;
                if (key == "beta") d.beta = to_double(name, v);
                if (key == "alpha") d.alpha = to_double(name, v);
                if (key == "k_lo") d.k_lo = to_int(name, v);
                if (key == "k_hi") d.k_hi = to_int(name, v);
                if (key == "k_star") d.k_star = to_int(name, v);
                if (key == "space_shifts") d.space_shifts = to_int_list(name, v);
                if (key == "time_lags") d.time_lags = to_int_list(name, v);
                if (key == "q1") d.q1 = to_double(name, v);
                if (key == "q2") d.q2 = to_double(name, v);
                if (key == "q") d.q = to_double(name, v);
                if (key == "theta") d.theta = to_double(name, v);
            } else if (section == "sweep") {
                if (key == "mu0") c.sweep.mu0 = to_double(name, v);
                if (key == "ratio") c.sweep.ratio = to_double(name, v);
                if (key == "length") c.sweep.length = to_int(name, v);
                if (key == "mu_list") c.sweep.mu_list = to_double_list(name, v);
                if (key == "reference_mu") {
                    c.sweep.reference_mu = v.empty() ? std::nullopt : std::optional<double>(to_double(name, v));
                }
                if (key == "p1") c.p1 = to_double(name, v);
                if (key == "p2") c.p2 = to_double(name, v);
            } else if (section == "output") {
                if (key == "dir") c.output_dir = v;
            }
        }
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
    const auto f = [](double v) { return format_double(v); };
    const auto i = [](int v) { return std::to_string(v); };
    std::ostringstream o;
    o << "[grid]\n"
      << "dim = " << c.dim << "\nn = " << c.n << "\nperiod = " << f(c.period) << "\n\n";
    o << "[fluid]\n"
      << "gamma = " << f(c.gamma) << "\nkappa = " << f(c.kappa) << "\nmu = " << f(c.mu)
      << "\nlambda_coeff = " << f(c.lambda_coeff) << "\nrho_min = " << f(c.rho_min) << "\n\n";
    o << "[forcing]\n"
      << "mode = " << (c.forcing.mode == ForcingSpec::Mode::trig_sum ? "trig_sum" : "none")
      << "\nenvelope = " << (c.forcing.envelope == ForcingSpec::Envelope::ramp ? "ramp" : "constant")
      << "\nramp_time = " << f(c.forcing.ramp_time) << "\nterms = "
      << join(c.forcing.terms,
              [&](const ForcingTerm& t) {
                  return i(t.wavevector[0]) + " " + i(t.wavevector[1]) + " " + i(t.wavevector[2]) + " " +
                         f(t.amplitude[0]) + " " + f(t.amplitude[1]) + " " + f(t.amplitude[2]) + " " + f(t.phase);
              },
              "; ")
      << "\n\n";
    o << "[initial]\n"
      << "preset = " << c.ic.preset << "\nseed = " << c.ic.seed << "\namplitude = " << f(c.ic.amplitude)
      << "\nrho0 = " << f(c.ic.rho0) << "\n\n";
    o << "[run]\n"
      << "horizon = " << f(c.horizon) << "\nsnapshot_every = " << c.snapshot_every << "\ncfl = " << f(c.cfl)
      << "\ndt = " << (c.dt ? f(*c.dt) : "") << "\neuler_reference = " << (c.euler_reference ? "true" : "false")
      << "\n\n";
    const auto& d = c.diagnostics;
    o << "[diagnostics]\n"
      << "beta = " << f(d.beta) << "\nalpha = " << f(d.alpha) << "\nk_lo = " << d.k_lo << "\nk_hi = " << d.k_hi
      << "\nk_star = " << d.k_star << "\nspace_shifts = " << join(d.space_shifts, i)
      << "\ntime_lags = " << join(d.time_lags, i) << "\nq1 = " << f(d.q1) << "\nq2 = " << f(d.q2)
      << "\nq = " << f(d.q) << "\ntheta = " << f(d.theta) << "\n\n";
    o << "[sweep]\n"
      << "mu0 = " << f(c.sweep.mu0) << "\nratio = " << f(c.sweep.ratio) << "\nlength = " << c.sweep.length
      << "\nmu_list = " << join(c.sweep.mu_list, f)
      << "\nreference_mu = " << (c.sweep.reference_mu ? f(*c.sweep.reference_mu) : "") << "\np1 = " << f(c.p1)
      << "\np2 = " << f(c.p2) << "\n\n";
    o << "[output]\n"
      << "dir = " << c.output_dir << "\n";
    return o.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return emit_config(a) == emit_config(b); }

}  // namespace ckh
