#pragma once

// Command-line front end: libracool <command> [--config PATH] [--seed N]
// [--out DIR] [--pressures LIST] [--jobs N].
//
// Environment overrides (flags win): LIBRACOOL_CONFIG, LIBRACOOL_SEED,
// LIBRACOOL_OUT, LIBRACOOL_PRESSURES, LIBRACOOL_JOBS.
//
// Exit codes: 0 success, 1 other failure (I/O, failed selftest), 2 usage or
// configuration error, 3 simulation fault (non-finite state or runaway),
// 4 protocol error (e.g. non-stationary baseline), 5 sweep finished with some
// failed points.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "libracool/analysis.hpp"
#include "libracool/error.hpp"
#include "libracool/experiments.hpp"
#include "libracool/io.hpp"
#include "libracool/selftest.hpp"

#ifndef LIBRACOOL_VERSION
#define LIBRACOOL_VERSION "0.0.0"
#endif

namespace libracool {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_simulation = 3,
    exit_protocol = 4,
    exit_partial = 5,
};

inline int exit_code_for(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::invalid_input:
        case ErrorCategory::config:
            return exit_config;
        case ErrorCategory::integration_fault:
        case ErrorCategory::runaway:
            return exit_simulation;
        case ErrorCategory::protocol:
            return exit_protocol;
    }
    return exit_failure;
}

struct CliOptions {
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> pressures;
    std::optional<std::size_t> jobs;
};

namespace detail {

inline std::vector<double> parse_pressure_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw ConfigError("--pressures: empty entry in '" + text + "'");
        }
        item = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double p = 0.0;
        try {
            p = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(p > 0.0) || !std::isfinite(p)) {
            throw ConfigError("--pressures: '" + item + "' is not a positive number");
        }
        out.push_back(p);
    }
    if (out.empty()) {
        throw ConfigError("--pressures: empty list");
    }
    return out;
}

/// Config with flag and environment overrides applied.
inline RunConfig resolve_config(const CliOptions& opt) {
    if (opt.config_path.empty()) {
        throw ConfigError("--config is required for '" + opt.command + "'");
    }
    RunConfig cfg = load_config(opt.config_path);
    if (opt.seed) {
        cfg.sim.seed = *opt.seed;
    }
    if (opt.out) {
        cfg.output_dir = *opt.out;
    }
    if (opt.jobs) {
        if (*opt.jobs < 1) {
            throw ConfigError("--jobs: must be >= 1");
        }
        cfg.jobs = *opt.jobs;
    }
    if (opt.pressures) {
        const auto list = parse_pressure_list(*opt.pressures);
        if (opt.command == "cool-sweep") {
            cfg.cooling_sweep.pressures = list;
        } else if (opt.command == "heating-sweep") {
            cfg.heating_sweep.pressures = list;
        } else {
            if (list.size() != 1) {
                throw ConfigError("--pressures: '" + opt.command + "' takes a single pressure");
            }
            cfg.env.pressure = list.front();
        }
    }
    return cfg;
}

inline Json summary_header(const std::string& command, const RunConfig& cfg) {
    Json j;
    j["command"] = command;
    j["version"] = LIBRACOOL_VERSION;
    j["seed"] = cfg.sim.seed;
    j["psd_convention"] = psd_convention;
    j["resolved_config"] = config_to_json(cfg);
    return j;
}

/// Replaces psi of every "auto" channel by the auto-tuned value.
inline std::optional<AutotuneResult> tune_if_needed(const RunConfig& cfg, ExperimentSetup& setup) {
    bool any_auto = false;
    for (const auto& ch : cfg.channels) {
        any_auto = any_auto || !ch.phase;
    }
    if (!any_auto) {
        return std::nullopt;
    }
    auto tuned = autotune_phases(setup);
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        if (!cfg.channels[i].phase) {
            setup.channels[i].phase_psi = tuned.psi[i];
        }
    }
    return tuned;
}

inline Json autotune_json(const std::optional<AutotuneResult>& tuned, const ExperimentSetup& setup) {
    Json j = Json::object();
    for (std::size_t i = 0; i < setup.channels.size(); ++i) {
        Json c;
        c["psi"] = setup.channels[i].phase_psi;
        c["psi_unit"] = "rad";
        c["auto_tuned"] = false;
        if (tuned) {
            c["auto_tuned"] = true;
            c["candidates"] = tuned->candidates;
            Json e = Json::array();
            for (double x : tuned->energies[i]) {
                e.push_back(json_number(x));
            }
            c["lockin_energy"] = e;
            c["lockin_energy_unit"] = "V^2";
        }
        j[setup.channels[i].mode_label] = c;
    }
    return j;
}

inline Json temperatures_json(const std::vector<ModeTemperature>& temps, const Plant& plant) {
    Json j = Json::object();
    for (std::size_t k = 0; k < temps.size(); ++k) {
        const auto& t = temps[k];
        j[plant.modes[k].label] = {{"T", json_number(t.T)},         {"T_stderr", json_number(t.T_stderr)},
                                   {"n_bar", json_number(t.n_bar)}, {"area", json_number(t.area)},
                                   {"floor", json_number(t.floor)}, {"floor_clamped", t.clamped}};
    }
    return j;
}

inline CsvTable temperatures_table(const std::vector<ModeTemperature>& temps, const Plant& plant) {
    CsvTable t({{"mode", "-"},
                {"frequency", "Hz"},
                {"T", "K"},
                {"T_stderr", "K"},
                {"n_bar", "1"},
                {"peak_area", "V^2"},
                {"noise_floor", "V^2/Hz"},
                {"area_clamped", "bool"}});
    for (std::size_t k = 0; k < temps.size(); ++k) {
        const auto& m = temps[k];
        t.row()
            .text(plant.modes[k].label)
            .num(plant.modes[k].frequency())
            .num(m.T)
            .num(m.T_stderr)
            .num(m.n_bar)
            .num(m.area)
            .num(m.floor)
            .integer(m.clamped ? 1 : 0);
    }
    return t;
}

inline CsvTable reheat_table(const ReheatResult& r) {
    CsvTable t({{"t", "s"}, {"energy", "V^2"}, {"energy_stderr", "V^2"}, {"fit", "V^2"}});
    for (std::size_t i = 0; i < r.energy.size(); ++i) {
        const double ti = r.energy.time(i);
        t.row().num(ti).num(r.energy.samples[i]).num(r.energy_stderr.samples[i]).num(r.e0 + r.gamma_exp * ti);
    }
    return t;
}

inline Json reheat_json(const ReheatResult& r, const ModeParams& mode) {
    const double c_sq = mode.calibration_c * mode.calibration_c;
    return {{"mode", mode.label},
            {"gamma_exp", json_number(r.gamma_exp)},
            {"gamma_exp_stderr", json_number(r.gamma_stderr)},
            {"gamma_exp_fit_stderr", json_number(r.fit_stderr)},
            {"gamma_exp_unit", "V^2/s"},
            {"e0", json_number(r.e0)},
            {"e0_unit", "V^2"},
            {"cycles", r.cycles},
            {"stationarity_ratio", json_number(r.stationarity_ratio)},
            {"S_tau_from_heating", json_number(torque_psd_from_heating(r.gamma_exp, c_sq, mode))},
            {"S_tau_unit", "N^2 m^2/Hz"}};
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    return std::filesystem::path(cfg.output_dir) / name;
}

// ------------------------------------------------------------- commands

inline int cmd_simulate(const RunConfig& cfg, std::ostream& os) {
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    SimConfig sim = setup.sim;
    const auto rec = run_closed_loop(setup, setup.plant, setup.channels, cfg.schedule, sim);

    std::vector<TraceChannel> chans;
    for (std::size_t k = 0; k < rec.labels.size(); ++k) {
        chans.push_back({"theta_" + rec.labels[k], &rec.angles[k]});
    }
    for (std::size_t k = 0; k < rec.labels.size(); ++k) {
        chans.push_back({"v_" + rec.labels[k], &rec.detectors[k]});
    }
    for (std::size_t k = 0; k < rec.torques.size(); ++k) {
        chans.push_back({"tau_" + rec.labels[k], &rec.torques[k]});
    }
    chans.push_back({"u", &rec.actuator});
    write_traces(out_path(cfg, "traces"), chans);

    Json s = summary_header("simulate", cfg);
    Json r;
    r["timing"] = {{"dt", rec.timing.dt},
                   {"decimation", rec.timing.decimation},
                   {"sample_rate_out", rec.timing.sample_rate_out},
                   {"steps", rec.timing.steps}};
    r["feedback_phases"] = autotune_json(tuned, setup);
    Json fin = Json::object();
    for (std::size_t k = 0; k < rec.labels.size(); ++k) {
        fin[rec.labels[k]] = {{"theta", rec.final_states[k].theta}, {"theta_dot", rec.final_states[k].theta_dot}};
    }
    r["final_states"] = fin;
    s["results"] = r;
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    os << "simulate: " << rec.timing.steps << " steps, " << rec.actuator.size() << " samples per channel -> "
       << out_path(cfg, "traces.f64").string() << "\n";
    return exit_ok;
}

inline int cmd_psd(const RunConfig& cfg, std::ostream& os) {
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    SimConfig sim = setup.sim;
    sim.duration = setup.settle_time + setup.sim.duration;
    sim.record_angles = false;
    sim.record_actuator = false;
    const auto rec = run_closed_loop(setup, setup.plant, setup.channels, {}, sim);
    const auto skip = static_cast<std::size_t>(std::llround(setup.settle_time * rec.timing.sample_rate_out));
    const auto temps = thermometry(rec, setup.plant, setup.analysis, skip);

    std::vector<Psd> psds;
    for (const auto& d : rec.detectors) {
        psds.push_back(welch_psd(::libracool::detail::tail(d, skip), setup.analysis.psd));
    }
    std::vector<CsvTable::Column> cols{{"frequency", "Hz"}};
    for (const auto& m : setup.plant.modes) {
        cols.push_back({"S_v_" + m.label, "V^2/Hz"});
    }
    CsvTable table(cols);
    for (std::size_t b = 0; b < psds.front().values.size(); ++b) {
        auto& row = table.row().num(psds.front().frequency(b));
        for (const auto& p : psds) {
            row.num(p.values[b]);
        }
    }
    table.write(out_path(cfg, "psd.csv"));
    temperatures_table(temps, setup.plant).write(out_path(cfg, "temperatures.csv"));

    Json s = summary_header("psd", cfg);
    s["results"] = {{"feedback_phases", autotune_json(tuned, setup)},
                    {"df", psds.front().df},
                    {"n_segments_averaged", psds.front().n_segments_averaged},
                    {"temperatures", temperatures_json(temps, setup.plant)},
                    {"T_unit", "K"}};
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    for (std::size_t k = 0; k < temps.size(); ++k) {
        os << setup.plant.modes[k].label << ": T = " << format_number(temps[k].T) << " K, n_bar = "
           << format_number(temps[k].n_bar) << "\n";
    }
    return exit_ok;
}

inline int cmd_cool_sweep(const RunConfig& cfg, std::ostream& os) {
    if (cfg.cooling_sweep.pressures.empty()) {
        throw ConfigError("cooling_sweep.pressures: no pressures given (config or --pressures)");
    }
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    const auto rows = run_cooling_sweep(setup, cfg.cooling_sweep.pressures);
    CsvTable table({{"pressure", "mbar"},
                    {"mode", "-"},
                    {"T", "K"},
                    {"T_stderr", "K"},
                    {"n_bar", "1"},
                    {"status", "-"},
                    {"error", "-"}});
    std::size_t failed_points = 0;
    std::size_t n_points = 0;
    double last_p = -1.0;
    bool point_failed = false;
    const auto close_point = [&] {
        if (last_p >= 0.0) {
            ++n_points;
            failed_points += point_failed ? 1 : 0;
        }
    };
    Json jrows = Json::array();
    for (const auto& r : rows) {
        if (r.pressure != last_p) {
            close_point();
            last_p = r.pressure;
            point_failed = false;
        }
        point_failed = point_failed || !r.ok;
        table.row().num(r.pressure).text(r.mode).num(r.T).num(r.T_stderr).num(r.n_bar).text(r.ok ? "ok" : "failed").text(
            r.error);
        jrows.push_back({{"pressure", r.pressure},
                         {"mode", r.mode},
                         {"T", json_number(r.T)},
                         {"T_stderr", json_number(r.T_stderr)},
                         {"n_bar", json_number(r.n_bar)},
                         {"ok", r.ok},
                         {"error", r.error}});
        os << "p = " << format_number(r.pressure) << " mbar  " << r.mode << ": "
           << (r.ok ? "T = " + format_number(r.T) + " K" : "failed (" + r.error + ")") << "\n";
    }
    close_point();
    table.write(out_path(cfg, "cooling_sweep.csv"));
    Json s = summary_header("cool-sweep", cfg);
    s["results"] = {{"feedback_phases", autotune_json(tuned, setup)},
                    {"rows", jrows},
                    {"failed_points", failed_points},
                    {"T_unit", "K"},
                    {"pressure_unit", "mbar"}};
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    if (failed_points == 0) {
        return exit_ok;
    }
    return failed_points == n_points ? exit_simulation : exit_partial;
}

inline int cmd_reheat(const RunConfig& cfg, std::ostream& os) {
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    const auto r = run_reheating(setup, cfg.reheat);
    const auto& mode = setup.plant.modes[setup.plant.index_of(cfg.reheat.mode)];
    reheat_table(r).write(out_path(cfg, "reheat.csv"));
    Json s = summary_header("reheat", cfg);
    s["results"] = reheat_json(r, mode);
    s["results"]["feedback_phases"] = autotune_json(tuned, setup);
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    os << "reheat " << mode.label << ": gamma_exp = " << format_number(r.gamma_exp) << " +- "
       << format_number(r.gamma_stderr) << " V^2/s over " << r.cycles << " cycles\n";
    return exit_ok;
}

inline int cmd_heating_sweep(const RunConfig& cfg, std::ostream& os) {
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    const auto sweep = run_heating_vs_pressure(setup, cfg.heating_sweep.pressures, cfg.reheat);
    const auto& mode = setup.plant.modes[setup.plant.index_of(cfg.reheat.mode)];
    CsvTable table({{"pressure", "mbar"}, {"gamma_exp", "V^2/s"}, {"gamma_exp_stderr", "V^2/s"}, {"e0", "V^2"}});
    Json pts = Json::array();
    for (const auto& p : sweep.points) {
        table.row().num(p.pressure).num(p.gamma_exp).num(p.gamma_stderr).num(p.e0);
        pts.push_back({{"pressure", p.pressure},
                       {"gamma_exp", json_number(p.gamma_exp)},
                       {"gamma_exp_stderr", json_number(p.gamma_stderr)},
                       {"e0", json_number(p.e0)}});
    }
    table.write(out_path(cfg, "heating_sweep.csv"));
    const double c_sq = mode.calibration_c * mode.calibration_c;
    Json s = summary_header("heating-sweep", cfg);
    s["results"] = {{"mode", mode.label},
                    {"points", pts},
                    {"a", json_number(sweep.fit.a)},
                    {"a_stderr", json_number(sweep.fit.a_stderr)},
                    {"a_unit", "V^2/s/mbar"},
                    {"gamma_res", json_number(sweep.fit.res)},
                    {"gamma_res_stderr", json_number(sweep.fit.res_stderr)},
                    {"gamma_res_unit", "V^2/s"},
                    {"S_ba_from_gamma_res", json_number(torque_psd_from_heating(sweep.fit.res, c_sq, mode))},
                    {"S_ba_unit", "N^2 m^2/Hz"},
                    {"feedback_phases", autotune_json(tuned, setup)}};
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    os << "heating sweep " << mode.label << ": a = " << format_number(sweep.fit.a) << " +- "
       << format_number(sweep.fit.a_stderr) << " V^2/s/mbar, gamma_res = " << format_number(sweep.fit.res) << " +- "
       << format_number(sweep.fit.res_stderr) << " V^2/s\n";
    return exit_ok;
}

inline int cmd_efficiency(const RunConfig& cfg, std::ostream& os) {
    auto setup = make_setup(cfg);
    const auto tuned = tune_if_needed(cfg, setup);
    const auto r = run_efficiency(setup, cfg.efficiency, cfg.reheat);
    const auto& mode = setup.plant.modes[setup.plant.index_of(cfg.efficiency.mode)];
    CsvTable table({{"mode", "-"},
                    {"v_cal_sq", "V^2"},
                    {"T_cal", "K"},
                    {"c_sq", "V^2/rad^2"},
                    {"S_imp_exp", "V^2/Hz"},
                    {"gamma_exp", "V^2/s"},
                    {"gamma_exp_stderr", "V^2/s"},
                    {"eta", "1"},
                    {"eta_product_route", "1"},
                    {"n_min", "1"},
                    {"eta_true", "1"},
                    {"cooled_T", "K"},
                    {"cooled_n_bar", "1"}});
    table.row()
        .text(mode.label)
        .num(r.v_cal_sq)
        .num(r.T_cal)
        .num(r.c_sq)
        .num(r.S_imp_exp)
        .num(r.gamma_exp)
        .num(r.gamma_stderr)
        .num(r.eta)
        .num(r.eta_product_route)
        .num(r.n_min)
        .num(r.eta_true)
        .num(r.cooled_T)
        .num(r.cooled_n_bar);
    table.write(out_path(cfg, "efficiency.csv"));
    reheat_table(r.reheat).write(out_path(cfg, "reheat.csv"));
    Json s = summary_header("efficiency", cfg);
    s["results"] = {{"mode", mode.label},
                    {"v_cal_sq", json_number(r.v_cal_sq)},
                    {"T_cal", json_number(r.T_cal)},
                    {"c_sq", json_number(r.c_sq)},
                    {"S_imp_exp", json_number(r.S_imp_exp)},
                    {"gamma_exp", json_number(r.gamma_exp)},
                    {"gamma_exp_stderr", json_number(r.gamma_stderr)},
                    {"eta", json_number(r.eta)},
                    {"eta_product_route", json_number(r.eta_product_route)},
                    {"n_min", json_number(r.n_min)},
                    {"eta_true", json_number(r.eta_true)},
                    {"S_tau_measured", json_number(r.S_tau_measured)},
                    {"S_tau_true", json_number(r.S_tau_true)},
                    {"cooled_T", json_number(r.cooled_T)},
                    {"cooled_n_bar", json_number(r.cooled_n_bar)},
                    {"reheat", reheat_json(r.reheat, mode)},
                    {"feedback_phases", autotune_json(tuned, setup)},
                    {"units",
                     {{"v_cal_sq", "V^2"},
                      {"T_cal", "K"},
                      {"c_sq", "V^2/rad^2"},
                      {"S_imp_exp", "V^2/Hz"},
                      {"gamma_exp", "V^2/s"},
                      {"S_tau", "N^2 m^2/Hz"},
                      {"cooled_T", "K"}}}};
    write_json(out_path(cfg, "summary.json"), s);
    write_json(out_path(cfg, "resolved_config.json"), config_to_json(cfg));
    os << "efficiency " << mode.label << ": eta = " << format_number(r.eta) << " (ground truth "
       << format_number(r.eta_true) << "), n_min = " << format_number(r.n_min) << "\n";
    return exit_ok;
}

inline int cmd_selftest(std::ostream& os) {
    const auto results = run_selftest();
    std::size_t failed = 0;
    for (const auto& r : results) {
        os << (r.ok ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) {
            os << " (" << r.detail << ")";
        }
        os << "\n";
        failed += r.ok ? 0 : 1;
    }
    os << results.size() - failed << "/" << results.size() << " checks passed\n";
    return failed == 0 ? exit_ok : exit_failure;
}

}  // namespace detail

inline int run_command(const CliOptions& opt, std::ostream& os) {
    if (opt.command == "selftest") {
        return detail::cmd_selftest(os);
    }
    const RunConfig cfg = detail::resolve_config(opt);
    if (opt.command == "simulate") {
        return detail::cmd_simulate(cfg, os);
    }
    if (opt.command == "psd") {
        return detail::cmd_psd(cfg, os);
    }
    if (opt.command == "cool-sweep") {
        return detail::cmd_cool_sweep(cfg, os);
    }
    if (opt.command == "reheat") {
        return detail::cmd_reheat(cfg, os);
    }
    if (opt.command == "heating-sweep") {
        return detail::cmd_heating_sweep(cfg, os);
    }
    if (opt.command == "efficiency") {
        return detail::cmd_efficiency(cfg, os);
    }
    throw ConfigError("unknown command '" + opt.command + "'");
}

/// Parses arguments, runs the command and maps failures to exit codes.
inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Libration-mode feedback cooling simulator and analysis toolkit", "libracool"};
    app.set_version_flag("--version", std::string(LIBRACOOL_VERSION));
    app.require_subcommand(1, 1);
    CliOptions opt;
    std::uint64_t seed = 0;
    std::string out;
    std::string pressures;
    std::size_t jobs = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Closed-loop time-domain run; writes binary traces"},
        {"psd", "Steady-state PSDs and per-mode temperatures"},
        {"cool-sweep", "Cooled temperature of every mode versus pressure"},
        {"reheat", "Reheating protocol and heating rate of one mode"},
        {"heating-sweep", "Heating rate versus pressure with the linear pressure-law fit"},
        {"efficiency", "Calibration, noise floor and reheating combined into the measurement efficiency"},
        {"selftest", "Closed-form checks and analytic oracles"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        if (std::string(name) == "selftest") {
            continue;
        }
        sub->add_option("--config", opt.config_path, "Run configuration (JSON)")->envname("LIBRACOOL_CONFIG");
        sub->add_option("--seed", seed, "Master seed")->envname("LIBRACOOL_SEED");
        sub->add_option("--out", out, "Output directory")->envname("LIBRACOOL_OUT");
        sub->add_option("--pressures", pressures, "Comma-separated pressures in mbar")->envname("LIBRACOOL_PRESSURES");
        sub->add_option("--jobs", jobs, "Worker threads")->envname("LIBRACOOL_JOBS");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, os, err);
        return code == 0 ? exit_ok : exit_config;
    }

    for (auto* sub : app.get_subcommands()) {
        opt.command = sub->get_name();
        if (opt.command != "selftest") {
            if (sub->count("--seed") > 0) {
                opt.seed = seed;
            }
            if (sub->count("--out") > 0) {
                opt.out = out;
            }
            if (sub->count("--pressures") > 0) {
                opt.pressures = pressures;
            }
            if (sub->count("--jobs") > 0) {
                opt.jobs = jobs;
            }
        }
    }

    try {
        return run_command(opt, os);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

}  // namespace libracool
