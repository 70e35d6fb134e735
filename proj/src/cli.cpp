#include "ckh/cli.hpp"

#include "ckh/config.hpp"
#include "ckh/io.hpp"
#include "ckh/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

namespace ckh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Failures that are the caller's fault and map to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const Common& c) {
    if (c.config.empty()) throw UsageError("--config is required");
    if (!fs::exists(c.config)) throw UsageError("config file '" + c.config + "' does not exist");
    ExperimentConfig cfg;
    try {
        cfg = load_config(c.config);
    } catch (const ConfigError& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }
    if (c.seed) cfg.ic.seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

/// Each command owns one section of summary.json so simulate and diagnose
/// outputs can share a directory.
void write_summary(const fs::path& dir, const std::string& command, const json& section) {
    json j = json::object();
    const fs::path path = dir / "summary.json";
    if (fs::exists(path)) {
        std::ifstream in(path);
        j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) j = json::object();
    }
    j[command] = section;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Resolved config without the [output] section: where results go is not an
/// input, and keeping it out makes headers and hashes location independent.
std::string provenance_text(const ExperimentConfig& cfg) {
    std::string text = emit_config(cfg);
    const auto cut = text.find("[output]");
    if (cut != std::string::npos) text.erase(cut);
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    return text + '\n';
}

/// Scalar diagnostics kept in insertion order for the key,value table.
struct Scalars {
    std::vector<std::pair<std::string, double>> items;
    void set(const std::string& k, double v) { items.emplace_back(k, v); }
    Table table() const {
        Table t{{"key", "value"}, {}};
        for (const auto& [k, v] : items) t.add({k, format_double(v)});
        return t;
    }
    json as_json() const {
        json j = json::object();
        for (const auto& [k, v] : items) j[k] = std::isfinite(v) ? json(v) : json(nullptr);
        return j;
    }
};

double relative_mass_drift(const std::vector<State>& s) {
    const double m0 = total_mass(s.front());
    double worst = 0.0;
    for (const auto& x : s) worst = std::max(worst, std::abs(total_mass(x) - m0) / std::abs(m0));
    return worst;
}

double max_abs_residual(const EnergyReport& r) {
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, std::abs(row.residual));
    return worst;
}

int cmd_simulate(const Common& common) {
    const auto cfg = resolve(common);
    const fs::path out = cfg.output_dir;
    const auto grid = cfg.grid();
    const auto params = cfg.fluid();
    const State initial = preset_ic(cfg.ic, grid, params);
    const RunResult r = run(initial, params, cfg.run_options());

    const std::string text = provenance_text(cfg);
    const ReportHeader header{text, content_hash(text)};
    fs::create_directories(out);
    write_series(out / "series", r.snapshots, params, &r.energy, header);
    write_table(out / "energy.csv", header, energy_table(r.energy));

    json j;
    j["config_hash"] = header.input_hash;
    j["dt"] = r.dt;
    j["steps"] = r.steps;
    j["snapshots"] = r.snapshots.size();
    j["initial_energy"] = r.energy.initial_energy;
    j["final_energy"] = r.energy.rows.back().energy;
    j["energy_bound"] = r.energy.bound;
    j["max_ledger_residual"] = max_abs_residual(r.energy);
    j["dissipation_nondecreasing"] = r.energy.dissipation_nondecreasing();
    j["mass_drift"] = relative_mass_drift(r.snapshots);
    write_summary(out, "simulate", j);
    std::cout << "simulate: " << r.steps << " steps of dt = " << format_double(r.dt) << ", " << r.snapshots.size()
              << " snapshots in " << (out / "series").string() << '\n';
    return 0;
}

struct Selection {
    bool spectrum = false;
    bool ckhw = false;
    bool moduli = false;
    bool sobolev = false;
    bool residuals = false;
    bool any() const { return spectrum || ckhw || moduli || sobolev || residuals; }
};

int cmd_diagnose(const Common& common, Selection sel, const std::string& input) {
    const auto cfg = resolve(common);
    if (!sel.any()) sel = {true, true, true, true, true};
    const fs::path out = cfg.output_dir;
    const fs::path in = input.empty() ? out / "series" : fs::path(input);
    if (!fs::exists(in / "series.csv")) throw UsageError("no series found at '" + in.string() + "'");
    const SeriesData data = read_series(in);
    if (data.snapshots.size() < 2) throw std::runtime_error("series needs at least two snapshots");

    FluidParams params = cfg.fluid();
    if (data.params.gamma != params.gamma || data.params.kappa != params.kappa || data.params.mu != params.mu ||
        data.params.lambda != params.lambda) {
        throw UsageError("config fluid parameters do not match the stored series");
    }
    if (data.snapshots.front().grid() != cfg.grid()) throw UsageError("config grid does not match the stored series");

    std::vector<fs::path> inputs = data.files;
    if (fs::exists(in / "energy.csv")) inputs.push_back(in / "energy.csv");
    const std::string text = provenance_text(cfg);
    const ReportHeader header{text, files_hash(inputs)};
    fs::create_directories(out);

    const auto& series = data.snapshots;
    const auto& g = series.front().grid();
    const auto& d = cfg.diagnostics;
    Scalars sc;
    std::optional<SpectrumSeries> spec;
    if (sel.spectrum || sel.ckhw || sel.sobolev) spec = time_integrated_spectrum(series, params);

    if (sel.spectrum) {
        Table t{{"t", "shell", "k", "E", "q"}, {}};
        for (const auto& sp : spec->spectra) {
            for (int s = 0; s < sp.shells(); ++s) {
                if (sp.modes[static_cast<std::size_t>(s)] == 0) continue;
                t.add({format_double(sp.t), std::to_string(s), format_double(sp.wavenumber(s)),
                       format_double(sp.energy[static_cast<std::size_t>(s)]), format_double(sp.spectral_density(s))});
            }
        }
        write_table(out / "spectrum.csv", header, t);
        Table ti{{"shell", "k", "modes", "int_E", "int_raw"}, {}};
        for (std::size_t s = 0; s < spec->energy_integral.size(); ++s) {
            if (spec->modes[s] == 0) continue;
            ti.add({std::to_string(s), format_double(spec->wavenumber(static_cast<int>(s))), std::to_string(spec->modes[s]),
                    format_double(spec->energy_integral[s]), format_double(spec->raw_integral[s])});
        }
        write_table(out / "spectrum_integrated.csv", header, ti);
        // A flow without energy above the mean shell has nothing to fit; the
        // scalars are then reported as NaN (null in JSON).
        PowerLawFit fit{};
        const double nan = std::numeric_limits<double>::quiet_NaN();
        try {
            fit = ckh_fit(*spec, d.k_lo, d.k_hi);
        } catch (const std::invalid_argument& e) {
            std::cerr << "ckh: spectrum fit skipped: " << e.what() << '\n';
            fit = {nan, nan, nan, nan, 0};
        }
        sc.set("ckh_exponent", fit.exponent);
        sc.set("ckh_prefactor", fit.prefactor);
        sc.set("ckh_fit_residual", fit.residual);
        sc.set("ckh_empirical_M_T", fit.empirical_bound);
        sc.set("ckh_shells", fit.shells);
    }
    if (sel.ckhw) {
        const auto st = ckhw_statistic(*spec, d.beta, d.k_star);
        sc.set("ckhw_beta", st.beta);
        sc.set("ckhw_k_star", st.k_star);
        sc.set("ckhw_value", st.value);
        sc.set("ckhw_per_mode_sup", st.per_mode_sup);
        sc.set("ckhw_argmax_shell", st.argmax_shell);
        sc.set("ckh_ckhw_factor", ckh_ckhw_factor(*spec, params, d.k_lo, d.k_hi));
    }
    if (sel.moduli) {
        std::vector<Eigen::Vector3d> shifts;
        for (int s : d.space_shifts) shifts.push_back(Eigen::Vector3d(s * g.dx(), 0, 0));
        const double cadence = series[1].t - series[0].t;
        std::vector<double> lags;
        for (int l : d.time_lags) {
            if (static_cast<std::size_t>(l) + 1 < series.size()) lags.push_back(l * cadence);
        }
        const auto sm = space_modulus(series, shifts, params.gamma);
        const auto tm = time_modulus(series, lags, params.gamma);
        Table t{{"kind", "delta", "density_channel", "momentum_channel"}, {}};
        for (std::size_t j = 0; j < sm.shifts.size(); ++j) {
            t.add({"space", format_double(sm.shifts[j]), format_double(sm.density[j]), format_double(sm.momentum[j])});
        }
        for (std::size_t j = 0; j < tm.shifts.size(); ++j) {
            t.add({"time", format_double(tm.shifts[j]), format_double(tm.density[j]), format_double(tm.momentum[j])});
        }
        write_table(out / "moduli.csv", header, t);
        sc.set("alpha1_density", sm.density_slope);
        sc.set("alpha1_momentum", sm.momentum_slope);
        sc.set("alpha2_density", tm.density_slope);
        sc.set("alpha2_momentum", tm.momentum_slope);
    }
    if (sel.sobolev) {
        sc.set("sobolev_alpha", d.alpha);
        sc.set("sobolev_norm", fractional_sobolev_norm(*spec, d.alpha));
        const auto hi = high_integrability(series, params, d.q1, d.q2, d.q);
        sc.set("rho_Lq1", hi.rho_norm);
        sc.set("momentum_Lq2", hi.momentum_norm);
        sc.set("weighted_Lq", hi.weighted_norm);
    }
    if (sel.residuals) {
        const double horizon = series.back().t - series.front().t;
        const auto mass = weak_residual_mass(series, default_mass_test_function(g, horizon), series.front().rho);
        const auto mom = weak_residual_momentum(series, default_momentum_test_function(g, horizon),
                                                series.front().momentum, params, true);
        sc.set("mass_residual", mass.value);
        sc.set("mass_tolerance", mass.tolerance);
        sc.set("momentum_euler_residual", mom.euler.value);
        sc.set("momentum_viscous_term", mom.viscous_term);
        sc.set("momentum_ns_residual", mom.navier_stokes.value);
        sc.set("momentum_tolerance", mom.navier_stokes.tolerance);
        sc.set("momentum_viscous_bound", mom.viscous_bound);
        if (data.energy) {
            const auto adm = energy_admissibility(series, *data.energy, params);
            sc.set("admissibility_max_residual", adm.max_residual);
            sc.set("ledger_defect", adm.ledger_defect);
        }
        double vac = 0.0;
        for (const auto& s : series) vac = std::max(vac, reynolds_quotient(s, d.theta).vacuum_fraction);
        sc.set("vacuum_fraction", vac);
    }
    write_table(out / "diagnostics.csv", header, sc.table());
    json j;
    j["input_hash"] = header.input_hash;
    j["snapshots"] = series.size();
    j["scalars"] = sc.as_json();
    write_summary(out, "diagnose", j);
    for (const auto& [k, v] : sc.items) std::cout << k << " = " << format_double(v) << '\n';
    return 0;
}

int cmd_sweep(const Common& common) {
    const auto cfg = resolve(common);
    const fs::path out = cfg.output_dir;
    const SweepPlan plan = cfg.sweep_plan();
    const SweepResult result = run_sweep(plan);
    const std::string text = provenance_text(cfg);
    const ReportHeader header{text, content_hash(text)};
    fs::create_directories(out / "runs");

    Table manifest{{"index", "mu", "lambda", "ok", "path", "error"}, {}};
    std::vector<const SweepRun*> all;
    for (const auto& r : result.runs) all.push_back(&r);
    if (result.reference) all.push_back(&*result.reference);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const SweepRun& r = *all[i];
        const bool is_ref = result.reference && i + 1 == all.size();
        const std::string rel = is_ref ? "runs/reference" : "runs/mu_" + std::to_string(i);
        if (r.ok) write_series(out / rel, r.result.snapshots, r.params, &r.result.energy, header);
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        manifest.add({is_ref ? "reference" : std::to_string(i), format_double(r.mu), format_double(r.params.lambda),
                      r.ok ? "1" : "0", r.ok ? rel : "", err});
    }
    write_table(out / "manifest.csv", header, manifest);

    json j;
    j["config_hash"] = header.input_hash;
    j["dt"] = result.dt;
    j["mu"] = plan.mu;
    j["complete"] = result.complete;
    if (!result.complete) {
        write_summary(out, "sweep", j);
        std::cerr << "sweep: at least one run blew up; see manifest.csv\n";
        return 1;
    }

    const double p1 = plan.exponents.p1;
    const double p2 = plan.exponents.p2;
    const auto dist = cauchy_distances(result, p1, p2);
    Table dt{{"i", "j", "mu_i", "mu_j", "density", "momentum"}, {}};
    for (Eigen::Index a = 0; a < dist.density.rows(); ++a) {
        for (Eigen::Index b = 0; b < dist.density.cols(); ++b) {
            dt.add({std::to_string(a), std::to_string(b), format_double(plan.mu[static_cast<std::size_t>(a)]),
                    format_double(plan.mu[static_cast<std::size_t>(b)]), format_double(dist.density(a, b)),
                    format_double(dist.momentum(a, b))});
        }
    }
    write_table(out / "distances.csv", header, dt);

    json flags;
    bool decreasing = true;
    for (Eigen::Index a = 0; a + 2 < dist.density.rows(); ++a) {
        decreasing = decreasing && dist.density(a + 1, a + 2) < dist.density(a, a + 1) &&
                     dist.momentum(a + 1, a + 2) < dist.momentum(a, a + 1);
    }
    flags["consecutive_distances_decrease"] = decreasing;
    if (plan.mu.size() >= 3) {
        const auto rate = convergence_rate(dist, plan.mu);
        j["rate_consecutive"] = {{"density", rate.density.slope}, {"momentum", rate.momentum.slope}};
    }
    if (result.reference) {
        const auto ref = reference_distances(result, p1, p2);
        Table rt{{"mu", "density", "momentum"}, {}};
        for (std::size_t i = 0; i < plan.mu.size(); ++i) {
            rt.add({format_double(plan.mu[i]), format_double(ref.density[i]), format_double(ref.momentum[i])});
        }
        write_table(out / "reference.csv", header, rt);
        if (plan.mu.size() >= 2) {
            const auto rd = fit_rate(ref.density, plan.mu);
            const auto rm = fit_rate(ref.momentum, plan.mu);
            j["rate_reference"] = {{"density", rd.slope}, {"momentum", rm.slope}};
            flags["reference_rate_in_band"] = rd.slope >= 0.7 && rd.slope <= 1.3 && rm.slope >= 0.7 && rm.slope <= 1.3;
        }
    }

    const auto vs = viscous_smallness(result);
    Table vt{{"mu", "sqrt_mu_grad_u", "sqrt_mu_sqrt_mu_grad_u"}, {}};
    bool vdec = true;
    for (std::size_t i = 0; i < vs.rows.size(); ++i) {
        vt.add({format_double(vs.rows[i].mu), format_double(vs.rows[i].energy_scale), format_double(vs.rows[i].value)});
        if (i > 0) vdec = vdec && vs.rows[i].value < vs.rows[i - 1].value;
    }
    write_table(out / "viscous.csv", header, vt);
    j["empirical_M_T"] = vs.empirical_bound;
    flags["viscous_term_decreases"] = vdec;
    flags["energy_estimate_bounded"] = vs.bounded;

    const auto norms = uniform_norms(result);
    Table nt{{"mu", "ckhw", "ckhw_per_mode_sup", "sobolev", "rho_Lq1", "momentum_Lq2", "weighted_Lq"}, {}};
    for (const auto& n : norms) {
        nt.add({format_double(n.mu), format_double(n.ckhw.value), format_double(n.ckhw.per_mode_sup),
                format_double(n.sobolev), format_double(n.integrability.rho_norm),
                format_double(n.integrability.momentum_norm), format_double(n.integrability.weighted_norm)});
    }
    write_table(out / "norms.csv", header, nt);
    const auto spread = [&](auto get) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (const auto& n : norms) {
            lo = std::min(lo, get(n));
            hi = std::max(hi, get(n));
        }
        return hi / lo - 1.0;
    };
    j["norm_spread"] = {{"sobolev", spread([](const UniformNormsRow& n) { return n.sobolev; })},
                        {"rho_Lq1", spread([](const UniformNormsRow& n) { return n.integrability.rho_norm; })},
                        {"momentum_Lq2", spread([](const UniformNormsRow& n) { return n.integrability.momentum_norm; })}};

    const auto lim = limit_candidate_check(result, default_mass_test_function(plan.grid, plan.horizon),
                                           default_momentum_test_function(plan.grid, plan.horizon),
                                           cfg.diagnostics.theta);
    Scalars sc;
    sc.set("mass_residual", lim.mass.value);
    sc.set("mass_tolerance", lim.mass.tolerance);
    sc.set("momentum_euler_residual", lim.momentum.euler.value);
    sc.set("momentum_viscous_term", lim.momentum.viscous_term);
    sc.set("momentum_tolerance", lim.momentum.navier_stokes.tolerance);
    sc.set("admissibility_max_residual", lim.admissibility.max_residual);
    sc.set("vacuum_fraction", lim.vacuum_fraction);
    write_table(out / "limit.csv", header, sc.table());
    j["limit"] = sc.as_json();
    flags["limit_consistent"] = lim.consistent;
    flags["admissible"] = lim.admissibility.max_residual <= 0.0;
    j["flags"] = flags;
    write_summary(out, "sweep", j);
    std::cout << "sweep: " << plan.mu.size() << " runs, dt = " << format_double(result.dt) << ", results in "
              << out.string() << '\n';
    return 0;
}

int cmd_report(const std::string& dir) {
    if (dir.empty()) throw UsageError("report needs --out <dir>");
    const fs::path root = dir;
    if (!fs::is_directory(root)) throw UsageError("'" + dir + "' is not a directory");
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
    }
    std::sort(csvs.begin(), csvs.end());
    json j;
    json tables = json::array();
    for (const auto& p : csvs) {
        const auto t = read_table(p);
        std::string hash;
        std::ifstream in(p);
        for (std::string line; std::getline(in, line) && !line.empty() && line[0] == '#';) {
            const std::string tag = "# input_hash = ";
            if (line.rfind(tag, 0) == 0) hash = line.substr(tag.size());
        }
        tables.push_back({{"file", p.filename().string()}, {"columns", t.columns}, {"rows", t.rows.size()},
                          {"input_hash", hash}});
        std::cout << p.filename().string() << ": " << t.rows.size() << " rows\n";
    }
    j["tables"] = tables;
    if (fs::exists(root / "summary.json")) {
        std::ifstream in(root / "summary.json");
        j["summary"] = json::parse(in);
        for (const auto& [cmd, section] : j["summary"].items()) {
            if (!section.is_object() || !section.contains("flags")) continue;
            for (const auto& [k, v] : section["flags"].items()) {
                std::cout << (v.get<bool>() ? "PASS " : "FAIL ") << cmd << '.' << k << '\n';
            }
        }
    }
    write_json(root / "report.json", j);
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"ckh: compressible Navier-Stokes runs and inviscid-limit diagnostics"};
    app.require_subcommand(1);
    Common common;
    const auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", common.config, "experiment config (INI)");
        if (need_config) opt->required();
        sub->add_option("--out", common.out, "output directory (overrides [output] dir)");
        sub->add_option("--seed", common.seed, "initial-condition seed (overrides [initial] seed)");
    };
    auto* simulate = app.add_subcommand("simulate", "run one viscous solve and store the snapshot series");
    add_common(simulate, true);
    auto* diagnose = app.add_subcommand("diagnose", "compute diagnostics on a stored series");
    add_common(diagnose, true);
    Selection sel;
    std::string input;
    diagnose->add_flag("--spectrum", sel.spectrum, "shell spectra and the power-law fit");
    diagnose->add_flag("--ckhw", sel.ckhw, "weighted spectral decay statistic");
    diagnose->add_flag("--moduli", sel.moduli, "space and time equicontinuity moduli");
    diagnose->add_flag("--sobolev", sel.sobolev, "fractional Sobolev and integrability norms");
    diagnose->add_flag("--residuals", sel.residuals, "weak-form residuals and energy admissibility");
    diagnose->add_option("--input", input, "series directory (default <out>/series)");
    auto* sweep = app.add_subcommand("sweep", "run a viscosity sweep and its convergence measurements");
    add_common(sweep, true);
    auto* report = app.add_subcommand("report", "collate the tables and summary in an output directory");
    add_common(report, false);
    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (simulate->parsed()) return cmd_simulate(common);
        if (diagnose->parsed()) return cmd_diagnose(common, sel, input);
        if (sweep->parsed()) return cmd_sweep(common);
        if (report->parsed()) {
            std::string dir = common.out;
            if (dir.empty() && !common.config.empty()) dir = resolve(common).output_dir;
            return cmd_report(dir);
        }
        if (selftest->parsed()) return run_selftest(std::cout) ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "ckh: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ckh: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace ckh
