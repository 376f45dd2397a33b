// bathent: parameter sweeps, figure data and oracle comparisons.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bathent/analysis.hpp"
#include "bathent/covariance.hpp"
#include "bathent/error.hpp"
#include "bathent/io.hpp"
#include "bathent/model.hpp"
#include "bathent/oracle.hpp"

namespace fs = std::filesystem;
using namespace bathent;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOracle = 4;

constexpr double kOracleCovTol = 1e-3;
constexpr double kOracleNegTol = 2e-3;

struct RunConfig {
    std::string command;
    std::string gamma = "1";
    std::string omega_cut = "10";
    std::string temperature = "0";
    std::string distance = "0";
    double t_max = 30.0;
    double dt = 0.05;
    double tol = 1e-3;
    std::size_t oracle_modes = 2000;
    unsigned jobs = default_jobs();
    std::string output_dir = ".";
    bool emit_plot_script = false;
    bool with_d1 = false;

    io::ConfigEcho echo() const {
        return {{"command", command},
                {"gamma", gamma},
                {"omega-cut", omega_cut},
                {"temperature", temperature},
                {"distance", distance},
                {"t-max", io::format_number(t_max)},
                {"dt", io::format_number(dt)},
                {"tol", io::format_number(tol)},
                {"oracle-modes", std::to_string(oracle_modes)},
                {"d1", with_d1 ? "true" : "false"}};
    }
};

struct Grid {
    std::vector<double> gamma, omega_cut, temperature, distance;
};

Grid resolve(const RunConfig& c) {
    Grid g{io::parse_values(c.gamma), io::parse_values(c.omega_cut), io::parse_values(c.temperature),
           io::parse_values(c.distance)};
    for (double v : g.gamma) validate(ModelParams{}.with_gamma(v));
    for (double v : g.omega_cut) validate(ModelParams{}.with_omega_cut(v));
    for (double v : g.temperature) validate(ModelParams{}.with_temperature(v));
    for (double v : g.distance) validate(ModelParams{}.with_distance(v));
    if (!(c.t_max > 0.0)) throw ConfigError("--t-max must be positive");
    if (!(c.dt > 0.0) || c.dt > c.t_max) throw ConfigError("--dt must be in (0, t-max]");
    if (!(c.tol > 0.0)) throw ConfigError("--tol must be positive");
    if (c.jobs == 0) throw ConfigError("--jobs must be at least 1");
    return g;
}

template <class F>
void for_points(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
                const std::vector<double>& d, F&& f) {
    for (double x : a)
        for (double y : b)
            for (double z : c)
                for (double w : d) f(x, y, z, w);
}

ModelParams make_params(double gamma, double omega_cut, double temperature, double distance) {
    ModelParams p;
    p.gamma = gamma;
    p.omega_cut = omega_cut;
    p.temperature = temperature;
    p.distance = distance;
    return p;
}

// Owns every CSV a command opens, so a failed run can still list what it wrote.
class Files {
public:
    io::CsvWriter& open(const fs::path& path, const std::vector<std::string>& columns, const io::ConfigEcho& echo) {
        writers_.push_back(std::make_unique<io::CsvWriter>(path, columns, echo));
        return *writers_.back();
    }
    std::vector<io::ManifestEntry> entries() const {
        std::vector<io::ManifestEntry> out;
        for (const auto& w : writers_) out.push_back({w->path().filename().string(), w->rows()});
        return out;
    }

private:
    std::vector<std::unique_ptr<io::CsvWriter>> writers_;
};

void asymptotic_sweep(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.omega_cut, g.temperature, g.distance,
               [&](double a, double b, double c, double d) { pts.push_back(make_params(a, b, c, d)); });
    auto& csv = files.open(dir / "fig1.csv", {"gamma", "omega_cut", "T", "r", "E"}, cfg.echo());
    const auto e = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) { return asymptotic_negativity(pts[i]); });
    for (std::size_t i = 0; i < pts.size(); ++i)
        csv.row({pts[i].gamma, pts[i].omega_cut, pts[i].temperature, pts[i].distance, e[i]});
    if (cfg.emit_plot_script)
        io::write_plot_script(dir / "plot_fig1.py", "fig1.csv", "r", "E", "T", "r [c/omega0]", "E");
    io::write_manifest(dir, cfg.command, true, files.entries());
}

void time_trace(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.omega_cut, g.temperature, g.distance,
               [&](double a, double b, double c, double d) { pts.push_back(make_params(a, b, c, d)); });
    auto& csv = files.open(dir / "fig2.csv", {"gamma", "omega_cut", "T", "r", "t", "E", "E_asymptote"}, cfg.echo());
    const auto traces = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) { return trace(pts[i], cfg.t_max, cfg.dt); });
    for (const auto& tr : traces) {
        const auto& p = tr.params;
        const double asym = tr.asymptote.value_or(std::nan(""));
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            csv.row({p.gamma, p.omega_cut, p.temperature, p.distance, tr.times[i], tr.values[i], asym});
    }
    if (cfg.emit_plot_script)
        io::write_plot_script(dir / "plot_fig2.py", "fig2.csv", "t", "E", "r", "t [1/omega0]", "E");
    io::write_manifest(dir, cfg.command, true, files.entries());
}

void critical_distance(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.omega_cut, g.temperature, std::vector<double>{0.0},
               [&](double a, double b, double c, double d) { pts.push_back(make_params(a, b, c, d)); });
    auto& csv = files.open(dir / "critical.csv", {"gamma", "omega_cut", "T", "d0", "d0_lo", "d0_hi", "d1"}, cfg.echo());
    struct Row {
        CriticalDistanceResult d0;
        std::optional<double> d1;
    };
    const auto rows = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) {
        Row r{find_d0(pts[i], 0.0, 1.0, cfg.tol), std::nullopt};
        if (cfg.with_d1) r.d1 = find_d1(pts[i], std::nullopt, std::nullopt, cfg.tol).d1;
        return r;
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& r = rows[i];
        csv.row({pts[i].gamma, pts[i].omega_cut, pts[i].temperature, *r.d0.d0, r.d0.bracket.first,
                 r.d0.bracket.second, r.d1.value_or(std::nan(""))});
    }
    io::write_manifest(dir, cfg.command, true, files.entries());
}

void short_time_check(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    for (double T : g.temperature)
        if (T > 0.0) throw ConfigError("short-time-check is defined at zero temperature only");
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.omega_cut, std::vector<double>{0.0}, g.distance,
               [&](double a, double b, double c, double d) { pts.push_back(make_params(a, b, c, d)); });
    auto& summary = files.open(dir / "short_time.csv",
                          {"gamma", "omega_cut", "r", "slope_fit", "slope_secant", "slope_expansion", "ratio"},
                          cfg.echo());
    auto& detail = files.open(dir / "short_time_trace.csv", {"gamma", "omega_cut", "r", "t", "E", "E_expansion"},
                         cfg.echo());
    const auto slopes = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) { return measure_initial_slope(pts[i]); });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        const auto& s = slopes[i];
        const double lead = short_time_slope(p);
        summary.row({p.gamma, p.omega_cut, p.distance, s.fitted, s.secant, lead, s.fitted / lead});
        for (std::size_t k = 0; k < s.times.size(); ++k)
            detail.row({p.gamma, p.omega_cut, p.distance, s.times[k], s.values[k], short_time_expansion(s.times[k], p)});
    }
    io::write_manifest(dir, cfg.command, true,
                       {{"short_time.csv", summary.rows()}, {"short_time_trace.csv", detail.rows()}});
}

void oracle_compare(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.omega_cut, g.temperature, g.distance,
               [&](double a, double b, double c, double d) { pts.push_back(make_params(a, b, c, d)); });
    auto& csv = files.open(dir / "deviation.csv", {"gamma", "omega_cut", "T", "r", "t", "max_abs_dC", "abs_dE"},
                      cfg.echo());
    struct Dev {
        std::vector<double> t, dc, de;
    };
    const auto devs = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) {
        const auto& p = pts[i];
        const double h = trace_step(p, cfg.dt);
        const auto stride = std::size_t(std::llround(cfg.dt / h));
        const auto n_out = std::size_t(std::llround(cfg.t_max / cfg.dt));
        const auto grid = greens_time(TimeGrid{h, n_out * stride + 1}, p);
        std::vector<std::size_t> idx;
        std::vector<double> times;
        for (std::size_t k = 0; k <= n_out; ++k) {
            idx.push_back(k * stride);
            times.push_back(grid.time(k * stride));
        }
        const auto pipe = covariance_trace(grid, ground_state_covariance(), idx);
        const BathOracle oracle(build_bath(p, cfg.oracle_modes, 20.0 * p.omega_cut, cfg.t_max));
        const auto ref = oracle.reduced_trace(times, ground_state_covariance());
        Dev d;
        for (std::size_t k = 0; k < times.size(); ++k) {
            d.t.push_back(times[k]);
            d.dc.push_back((pipe[k].entries - ref[k].entries).cwiseAbs().maxCoeff());
            d.de.push_back(std::abs(log_negativity(pipe[k]) - log_negativity(ref[k])));
        }
        return d;
    });
    double worst_c = 0.0, worst_e = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        for (std::size_t k = 0; k < devs[i].t.size(); ++k) {
            csv.row({p.gamma, p.omega_cut, p.temperature, p.distance, devs[i].t[k], devs[i].dc[k], devs[i].de[k]});
            worst_c = std::max(worst_c, devs[i].dc[k]);
            worst_e = std::max(worst_e, devs[i].de[k]);
        }
    }
    if (cfg.emit_plot_script)
        io::write_plot_script(dir / "plot_deviation.py", "deviation.csv", "t", "max_abs_dC", "r", "t [1/omega0]",
                              "max |dC|");
    io::write_manifest(dir, cfg.command, true, files.entries());
    if (worst_c > kOracleCovTol || worst_e > kOracleNegTol)
        throw OracleDisagreement("max |dC| = " + io::format_number(worst_c) + ", max |dE| = " +
                                 io::format_number(worst_e) + " (tolerances 1e-3, 2e-3)");
}

void slope_fit(const RunConfig& cfg, const Grid& g, const fs::path& dir, Files& files) {
    auto& d0csv = files.open(dir / "d0.csv", {"gamma", "T", "omega_cut", "inv_omega_cut", "d0"}, cfg.echo());
    auto& fit = files.open(dir / "slope.csv", {"gamma", "T", "slope", "residual", "ill_conditioned", "samples_used"},
                      cfg.echo());
    std::vector<ModelParams> pts;
    for_points(g.gamma, g.temperature, g.omega_cut, std::vector<double>{0.0},
               [&](double a, double c, double b, double d) { pts.push_back(make_params(a, b, c, d)); });
    const auto d0 = parallel_map(pts.size(), cfg.jobs, [&](std::size_t i) { return *find_d0(pts[i], 0.0, 1.0, cfg.tol).d0; });
    std::size_t i = 0;
    for (double gamma : g.gamma)
        for (double T : g.temperature) {
            std::vector<std::pair<double, double>> samples;
            for (double W : g.omega_cut) {
                d0csv.row({gamma, T, W, 1.0 / W, d0[i]});
                samples.emplace_back(1.0 / W, d0[i]);
                ++i;
            }
            const SlopeFit f = fit_slope(samples);
            fit.row({gamma, T, f.slope, f.residual, f.ill_conditioned ? 1.0 : 0.0, double(f.used.size())});
        }
    if (cfg.emit_plot_script)
        io::write_plot_script(dir / "plot_d0.py", "d0.csv", "inv_omega_cut", "d0", "T", "1/Omega [1/omega0]",
                              "d0 [c/omega0]");
    io::write_manifest(dir, cfg.command, true, files.entries());
}

void report(const char* kind, const std::string& detail, const std::string& message) {
    std::cerr << "error kind=" << kind;
    if (!detail.empty()) std::cerr << " failure=" << detail;
    std::cerr << " message=\"" << message << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Entanglement of two oscillators in a common bath"};
    app.set_version_flag("--version", std::string(BATHENT_VERSION));
    app.set_config("--config", "", "key=value file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    // a config line "distance = 0,0.1" arrives as a list; join it back for parse_values
    auto value_list = [&](const std::string& name, std::string& target, const std::string& help) {
        app.add_option(name, target, help)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::Join);
    };
    value_list("--gamma", cfg.gamma, "damping constant (value, list or start:stop:step)");
    value_list("--omega-cut", cfg.omega_cut, "Drude cutoff Omega");
    value_list("--temperature", cfg.temperature, "bath temperature");
    value_list("--distance", cfg.distance, "oscillator separation r");
    app.add_option("--t-max", cfg.t_max, "last output time");
    app.add_option("--dt", cfg.dt, "output spacing");
    app.add_option("--tol", cfg.tol, "bisection tolerance on distances");
    app.add_option("--oracle-modes", cfg.oracle_modes, "bath modes per channel for the oracle");
    app.add_option("--jobs", cfg.jobs, "worker threads");
    app.add_option("--output-dir", cfg.output_dir, "directory for CSV files and MANIFEST");
    app.add_flag("--emit-plot-script", cfg.emit_plot_script, "also write a matplotlib script");
    app.add_flag("--d1", cfg.with_d1, "critical-distance: also locate d1");

    using Command = void (*)(const RunConfig&, const Grid&, const fs::path&, Files&);
    const std::vector<std::pair<std::string, Command>> commands{
        {"asymptotic-sweep", asymptotic_sweep}, {"time-trace", time_trace},
        {"critical-distance", critical_distance}, {"short-time-check", short_time_check},
        {"oracle-compare", oracle_compare}, {"slope-fit", slope_fit}};
    const std::vector<std::string> help{"steady-state E over the parameter grid (fig1.csv)",
                                        "E(t) from the ground state (fig2.csv)",
                                        "critical distance d0, optionally d1 (critical.csv)",
                                        "initial slope against the short-time expansion (short_time.csv)",
                                        "pipeline against the discrete-bath oracle (deviation.csv)",
                                        "d0 against 1/Omega and its slope (d0.csv, slope.csv)"};
    for (std::size_t i = 0; i < commands.size(); ++i) app.add_subcommand(commands[i].first, help[i]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (const auto& [name, fn] : commands)
        if (app.got_subcommand(name)) cfg.command = name;

    Files files;
    fs::path dir;
    try {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec || !fs::is_directory(cfg.output_dir))
            throw ConfigError("output directory not writable: " + cfg.output_dir);
        dir = cfg.output_dir;
        const Grid grid = resolve(cfg);
        for (const auto& [name, fn] : commands)
            if (name == cfg.command) fn(cfg, grid, dir, files);
        return kExitOk;
    } catch (const Error& e) {
        if (!dir.empty() && fs::is_directory(dir)) {
            if (e.kind() != ErrorKind::OracleDisagreement)
                io::write_manifest(dir, cfg.command, false, files.entries(), e.what());
        }
        switch (e.kind()) {
            case ErrorKind::Config: report("config", "", e.what()); return kExitConfig;
            case ErrorKind::Numerical:
                report("numerical", std::string(to_string(static_cast<const NumericalError&>(e).failure())), e.what());
                return kExitNumerical;
            case ErrorKind::OracleDisagreement: report("oracle", "", e.what()); return kExitOracle;
        }
    } catch (const std::exception& e) {
        report("internal", "", e.what());
        return kExitNumerical;
    }
    return kExitNumerical;
}
