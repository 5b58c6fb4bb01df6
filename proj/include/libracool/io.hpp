#pragma once

// Run configuration (strict JSON), resolved-config serialisation and the
// on-disk formats: CSV tables, little-endian binary traces with a JSON sidecar
// and a JSON run summary. All files are written to a temporary name and
// renamed into place.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "libracool/analysis.hpp"
#include "libracool/error.hpp"
#include "libracool/experiments.hpp"
#include "libracool/feedback.hpp"
#include "libracool/physics.hpp"

namespace libracool {

using Json = nlohmann::ordered_json;

struct ChannelConfig {
    std::string mode;
    double gain = 0.003;
    std::optional<double> phase;  // rad; empty = auto-tune
    bool enabled = true;
    PllConfig pll;

    bool operator==(const ChannelConfig&) const = default;
};

struct SweepConfig {
    std::vector<double> pressures;

    bool operator==(const SweepConfig&) const = default;
};

/// Complete declarative description of a run.
struct RunConfig {
    std::vector<ModeParams> modes;
    std::vector<ModeNoise> noise;
    Environment env;
    DetectorOptions detector;
    double modulation_depth_limit = 0.01;
    std::vector<ChannelConfig> channels;
    Schedule schedule;
    SimConfig sim;
    double settle_time = 0.02;
    AnalysisOptions analysis;
    AutotuneConfig autotune;
    SweepConfig cooling_sweep;
    ReheatConfig reheat;
    SweepConfig heating_sweep;
    EfficiencyConfig efficiency;
    std::size_t jobs = 1;
    std::string output_dir = "out";

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

/// Walks one JSON object, records which keys were read and rejects the rest.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_or_root() + ": expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, double fallback) {
        if (!has(key)) {
            return fallback;
        }
        return to_number(raw(key), key_path(key));
    }

    double number(const std::string& key) {
        require_key(key);
        return to_number(raw(key), key_path(key));
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw ConfigError(key_path(key) + ": expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = raw(key);
        if (!v.is_boolean()) {
            throw ConfigError(key_path(key) + ": expected true or false");
        }
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) {
            return fallback;
        }
        return to_string(raw(key), key_path(key));
    }

    std::string string(const std::string& key) {
        require_key(key);
        return to_string(raw(key), key_path(key));
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        if (!has(key)) {
            return out;
        }
        const auto& v = raw(key);
        if (!v.is_array()) {
            throw ConfigError(key_path(key) + ": expected an array of numbers");
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(to_number(v[i], key_path(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    void require_key(const std::string& key) const {
        if (!has(key)) {
            throw ConfigError(key_path(key) + ": required key missing");
        }
    }

    /// Rejects keys outside `allowed` before any value is read.
    void allow_only(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [key, _] : j_.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                throw ConfigError(key_path(key) + ": unknown key");
            }
        }
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError(key_path(key) + ": unknown key");
            }
        }
    }

private:
    std::string path_or_root() const { return path_.empty() ? "<root>" : path_; }

    static double to_number(const Json& v, const std::string& where) {
        if (!v.is_number()) {
            throw ConfigError(where + ": expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            throw ConfigError(where + ": must be finite");
        }
        return x;
    }

    static std::string to_string(const Json& v, const std::string& where) {
        if (!v.is_string()) {
            throw ConfigError(where + ": expected a string");
        }
        return v.get<std::string>();
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const Json& array_at(ObjectReader& r, const std::string& key) {
    const auto& v = r.raw(key);
    if (!v.is_array()) {
        throw ConfigError(r.key_path(key) + ": expected an array");
    }
    return v;
}

inline void check(bool ok, const std::string& what) {
    if (!ok) {
        throw ConfigError(what);
    }
}

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

/// Builds a RunConfig from parsed JSON, applying defaults and checking every
/// cross-reference. Errors name the offending key path.
inline RunConfig config_from_json(const Json& root) {
    using detail::check;
    using detail::ObjectReader;
    RunConfig cfg;
    ObjectReader r(root, "");
    r.allow_only({"seed", "jobs", "output_dir", "modes", "environment", "detector", "feedback", "schedule",
                  "simulation", "analysis", "autotune", "cooling_sweep", "heating_sweep", "reheat", "efficiency"});

    if (r.has("seed")) {
        cfg.sim.seed = r.integer("seed", 1);
    }
    cfg.jobs = r.integer("jobs", 1);
    check(cfg.jobs >= 1, "jobs: must be >= 1");
    cfg.output_dir = r.string("output_dir", cfg.output_dir);

    r.require_key("modes");
    const auto& modes = detail::array_at(r, "modes");
    check(!modes.empty(), "modes: at least one mode required");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        ObjectReader m(modes[i], detail::at_index("modes", i));
        ModeParams p;
        p.label = m.string("label");
        check(!p.label.empty(), m.key_path("label") + ": must not be empty");
        check(labels.insert(p.label).second, m.key_path("label") + ": duplicate label '" + p.label + "'");
        check(m.has("frequency") != m.has("omega0"), m.key_path("frequency") + ": give exactly one of frequency or omega0");
        p.omega0 = m.has("omega0") ? m.number("omega0") : two_pi * m.number("frequency");
        check(p.omega0 > 0.0, m.key_path(m.has("omega0") ? "omega0" : "frequency") + ": must be > 0");
        p.inertia = m.number("inertia", p.inertia);
        check(p.inertia > 0.0, m.key_path("inertia") + ": must be > 0");
        p.gamma_ref = m.number("gamma_ref", two_pi);
        check(p.gamma_ref >= 0.0, m.key_path("gamma_ref") + ": must be >= 0");
        p.p_ref = m.number("p_ref", 1.0);
        check(p.p_ref > 0.0, m.key_path("p_ref") + ": must be > 0");
        p.calibration_c = m.number("calibration_c", 10.0);
        check(p.calibration_c > 0.0, m.key_path("calibration_c") + ": must be > 0");
        ModeNoise n;
        n.S_ba = m.number("S_ba", 0.0);
        check(n.S_ba >= 0.0, m.key_path("S_ba") + ": must be >= 0");
        n.S_imp_exp = m.number("S_imp_exp", 0.0);
        check(n.S_imp_exp >= 0.0, m.key_path("S_imp_exp") + ": must be >= 0");
        m.finish();
        cfg.modes.push_back(p);
        cfg.noise.push_back(n);
    }

    if (r.has("environment")) {
        ObjectReader e(r.raw("environment"), "environment");
        cfg.env.pressure = e.number("pressure", cfg.env.pressure);
        check(cfg.env.pressure >= 0.0, "environment.pressure: must be >= 0");
        cfg.env.T_bath = e.number("T_bath", cfg.env.T_bath);
        check(cfg.env.T_bath >= 0.0, "environment.T_bath: must be >= 0");
        e.finish();
    }

    if (r.has("detector")) {
        ObjectReader d(r.raw("detector"), "detector");
        cfg.detector.lo_offset = d.number("lo_offset", 0.0);
        cfg.detector.lo_phase = d.number("lo_phase", 0.0);
        d.finish();
    }

    const auto mode_exists = [&](const std::string& label) { return labels.contains(label); };

    if (r.has("feedback")) {
        ObjectReader f(r.raw("feedback"), "feedback");
        cfg.modulation_depth_limit = f.number("modulation_depth_limit", cfg.modulation_depth_limit);
        check(cfg.modulation_depth_limit > 0.0 && cfg.modulation_depth_limit < 1.0,
              "feedback.modulation_depth_limit: must lie in (0, 1)");
        if (f.has("channels")) {
            const auto& chs = detail::array_at(f, "channels");
            std::set<std::string> used;
            for (std::size_t i = 0; i < chs.size(); ++i) {
                ObjectReader c(chs[i], detail::at_index("feedback.channels", i));
                ChannelConfig ch;
                ch.mode = c.string("mode");
                check(mode_exists(ch.mode), c.key_path("mode") + ": unknown mode '" + ch.mode + "'");
                check(used.insert(ch.mode).second, c.key_path("mode") + ": second channel for mode '" + ch.mode + "'");
                ch.gain = c.number("gain", ch.gain);
                check(ch.gain >= 0.0, c.key_path("gain") + ": must be >= 0");
                if (c.has("phase")) {
                    const auto& ph = c.raw("phase");
                    if (ph.is_string()) {
                        check(ph.get<std::string>() == "auto", c.key_path("phase") + ": expected a number or \"auto\"");
                    } else {
                        check(ph.is_number() && std::isfinite(ph.get<double>()),
                              c.key_path("phase") + ": expected a number or \"auto\"");
                        ch.phase = ph.get<double>();
                    }
                }
                ch.enabled = c.boolean("enabled", true);
                double f0 = 0.0;
                for (std::size_t k = 0; k < cfg.modes.size(); ++k) {
                    if (cfg.modes[k].label == ch.mode) {
                        f0 = cfg.modes[k].frequency();
                    }
                }
                ch.pll = default_pll_config(f0);
                if (c.has("pll")) {
                    ObjectReader p(c.raw("pll"), c.key_path("pll"));
                    ch.pll.center_freq = p.number("center_freq", ch.pll.center_freq);
                    ch.pll.loop_bandwidth = p.number("loop_bandwidth", ch.pll.center_freq / 100.0);
                    ch.pll.capture_range = p.number("capture_range", ch.pll.center_freq / 20.0);
                    p.finish();
                }
                try {
                    validate(ch.pll);
                } catch (const Error& e) {
                    throw ConfigError(c.key_path("pll") + ": " + e.what());
                }
                c.finish();
                cfg.channels.push_back(ch);
            }
        }
        f.finish();
    }

    if (r.has("schedule")) {
        const auto& ws = detail::array_at(r, "schedule");
        for (std::size_t i = 0; i < ws.size(); ++i) {
            ObjectReader w(ws[i], detail::at_index("schedule", i));
            ScheduleWindow win;
            win.t_start = w.number("t_start");
            win.t_end = w.number("t_end");
            win.enabled = w.boolean("enabled", false);
            const auto& names = detail::array_at(w, "channels");
            for (std::size_t k = 0; k < names.size(); ++k) {
                check(names[k].is_string(), detail::at_index(w.key_path("channels"), k) + ": expected a string");
                win.channels.push_back(names[k].get<std::string>());
            }
            w.finish();
            cfg.schedule.windows.push_back(win);
        }
    }

    if (r.has("simulation")) {
        ObjectReader s(r.raw("simulation"), "simulation");
        cfg.sim.duration = s.number("duration", cfg.sim.duration);
        check(cfg.sim.duration > 0.0, "simulation.duration: must be > 0");
        cfg.sim.dt = s.number("dt", 0.0);
        check(cfg.sim.dt >= 0.0, "simulation.dt: must be >= 0 (0 = automatic)");
        cfg.sim.sample_rate_out = s.number("sample_rate_out", 0.0);
        check(cfg.sim.sample_rate_out >= 0.0, "simulation.sample_rate_out: must be >= 0 (0 = automatic)");
        cfg.sim.runaway_bound = s.number("runaway_bound", 0.0);
        check(cfg.sim.runaway_bound >= 0.0, "simulation.runaway_bound: must be >= 0 (0 = automatic)");
        const auto init = s.string("initial", "thermal");
        check(init == "thermal" || init == "zero", "simulation.initial: expected \"thermal\" or \"zero\"");
        cfg.sim.initial = init == "thermal" ? InitialState::thermal : InitialState::zero;
        cfg.settle_time = s.number("settle_time", cfg.settle_time);
        check(cfg.settle_time >= 0.0, "simulation.settle_time: must be >= 0");
        cfg.sim.record_torques = s.boolean("record_torques", false);
        s.finish();
    }
    cfg.sim.modulation_depth_limit = cfg.modulation_depth_limit;

    if (r.has("analysis")) {
        ObjectReader a(r.raw("analysis"), "analysis");
        cfg.analysis.psd.segment_length = a.integer("segment_length", cfg.analysis.psd.segment_length);
        check(cfg.analysis.psd.segment_length >= 8, "analysis.segment_length: must be >= 8");
        cfg.analysis.psd.overlap = a.number("overlap", cfg.analysis.psd.overlap);
        check(cfg.analysis.psd.overlap >= 0.0 && cfg.analysis.psd.overlap < 1.0, "analysis.overlap: must lie in [0, 1)");
        try {
            cfg.analysis.psd.window = parse_window(a.string("window", "hann"));
        } catch (const Error& e) {
            throw ConfigError(std::string("analysis.window: ") + e.what());
        }
        cfg.analysis.peak_half_width = a.number("peak_half_width", cfg.analysis.peak_half_width);
        cfg.analysis.noise_inner = a.number("noise_inner", cfg.analysis.noise_inner);
        cfg.analysis.noise_outer = a.number("noise_outer", cfg.analysis.noise_outer);
        check(cfg.analysis.peak_half_width > 0.0 && cfg.analysis.noise_inner > cfg.analysis.peak_half_width &&
                  cfg.analysis.noise_outer > cfg.analysis.noise_inner && cfg.analysis.noise_outer < 1.0,
              "analysis: need 0 < peak_half_width < noise_inner < noise_outer < 1");
        a.finish();
    }

    if (r.has("autotune")) {
        ObjectReader a(r.raw("autotune"), "autotune");
        cfg.autotune.points = a.integer("points", cfg.autotune.points);
        check(cfg.autotune.points >= 2, "autotune.points: must be >= 2");
        cfg.autotune.duration = a.number("duration", cfg.autotune.duration);
        check(cfg.autotune.duration > 0.0, "autotune.duration: must be > 0");
        cfg.autotune.lockin_bandwidth = a.number("lockin_bandwidth", cfg.autotune.lockin_bandwidth);
        check(cfg.autotune.lockin_bandwidth > 0.0, "autotune.lockin_bandwidth: must be > 0");
        a.finish();
    }

    const auto read_sweep = [&](const std::string& key, SweepConfig& out) {
        if (!r.has(key)) {
            return;
        }
        ObjectReader s(r.raw(key), key);
        out.pressures = s.numbers("pressures");
        for (std::size_t i = 0; i < out.pressures.size(); ++i) {
            check(out.pressures[i] > 0.0, detail::at_index(key + ".pressures", i) + ": must be > 0");
        }
        s.finish();
    };
    read_sweep("cooling_sweep", cfg.cooling_sweep);
    read_sweep("heating_sweep", cfg.heating_sweep);

    if (!cfg.modes.empty()) {
        cfg.reheat.mode = cfg.modes.front().label;
        cfg.efficiency.mode = cfg.modes.front().label;
    }
    if (r.has("reheat")) {
        ObjectReader h(r.raw("reheat"), "reheat");
        cfg.reheat.mode = h.string("mode", cfg.reheat.mode);
        cfg.reheat.off_time = h.number("off_time", cfg.reheat.off_time);
        cfg.reheat.on_time = h.number("on_time", cfg.reheat.on_time);
        cfg.reheat.cycles = h.integer("cycles", cfg.reheat.cycles);
        cfg.reheat.lockin_bandwidth = h.number("lockin_bandwidth", cfg.reheat.lockin_bandwidth);
        cfg.reheat.settle_time = h.number("settle_time", cfg.reheat.settle_time);
        cfg.reheat.cycles_per_job = h.integer("cycles_per_job", cfg.reheat.cycles_per_job);
        cfg.reheat.toggle_feedback = h.boolean("toggle_feedback", cfg.reheat.toggle_feedback);
        check(cfg.reheat.off_time > 0.0, "reheat.off_time: must be > 0");
        check(cfg.reheat.on_time > 0.0, "reheat.on_time: must be > 0");
        check(cfg.reheat.cycles >= 1, "reheat.cycles: must be >= 1");
        check(cfg.reheat.lockin_bandwidth > 0.0, "reheat.lockin_bandwidth: must be > 0");
        check(cfg.reheat.settle_time > 0.0, "reheat.settle_time: must be > 0");
        check(cfg.reheat.cycles_per_job >= 1, "reheat.cycles_per_job: must be >= 1");
        h.finish();
    }
    check(mode_exists(cfg.reheat.mode), "reheat.mode: unknown mode '" + cfg.reheat.mode + "'");

    if (r.has("efficiency")) {
        ObjectReader e(r.raw("efficiency"), "efficiency");
        cfg.efficiency.mode = e.string("mode", cfg.efficiency.mode);
        cfg.efficiency.calibration_pressure = e.number("calibration_pressure", cfg.efficiency.calibration_pressure);
        cfg.efficiency.calibration_duration = e.number("calibration_duration", cfg.efficiency.calibration_duration);
        cfg.efficiency.calibration_chunks = e.integer("calibration_chunks", cfg.efficiency.calibration_chunks);
        cfg.efficiency.floor_duration = e.number("floor_duration", cfg.efficiency.floor_duration);
        check(cfg.efficiency.calibration_pressure > 0.0, "efficiency.calibration_pressure: must be > 0");
        check(cfg.efficiency.calibration_duration > 0.0, "efficiency.calibration_duration: must be > 0");
        check(cfg.efficiency.calibration_chunks >= 1, "efficiency.calibration_chunks: must be >= 1");
        check(cfg.efficiency.floor_duration > 0.0, "efficiency.floor_duration: must be > 0");
        e.finish();
    }
    check(mode_exists(cfg.efficiency.mode), "efficiency.mode: unknown mode '" + cfg.efficiency.mode + "'");

    r.finish();

    std::vector<std::string> channel_labels;
    for (const auto& ch : cfg.channels) {
        channel_labels.push_back(ch.mode);
    }
    try {
        validate_schedule(cfg.schedule, channel_labels, cfg.sim.duration);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

/// Parses JSON text; syntax errors report line and column.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte);
        std::string msg = e.what();
        const auto pos = msg.find(": ");
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error" +
                          (pos == std::string::npos ? "" : msg.substr(pos)));
    }
    return config_from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_config(text, path.string());
}

/// Every field with its resolved value; parse(serialize(c)) == c.
inline Json config_to_json(const RunConfig& cfg) {
    Json j;
    j["seed"] = cfg.sim.seed;
    j["jobs"] = cfg.jobs;
    j["output_dir"] = cfg.output_dir;
    j["modes"] = Json::array();
    for (std::size_t k = 0; k < cfg.modes.size(); ++k) {
        const auto& m = cfg.modes[k];
        Json jm;
        jm["label"] = m.label;
        jm["omega0"] = m.omega0;
        jm["inertia"] = m.inertia;
        jm["gamma_ref"] = m.gamma_ref;
        jm["p_ref"] = m.p_ref;
        jm["calibration_c"] = m.calibration_c;
        jm["S_ba"] = cfg.noise[k].S_ba;
        jm["S_imp_exp"] = cfg.noise[k].S_imp_exp;
        j["modes"].push_back(jm);
    }
    j["environment"] = {{"pressure", cfg.env.pressure}, {"T_bath", cfg.env.T_bath}};
    j["detector"] = {{"lo_offset", cfg.detector.lo_offset}, {"lo_phase", cfg.detector.lo_phase}};
    Json fb;
    fb["modulation_depth_limit"] = cfg.modulation_depth_limit;
    fb["channels"] = Json::array();
    for (const auto& ch : cfg.channels) {
        Json jc;
        jc["mode"] = ch.mode;
        jc["gain"] = ch.gain;
        if (ch.phase) {
            jc["phase"] = *ch.phase;
        } else {
            jc["phase"] = "auto";
        }
        jc["enabled"] = ch.enabled;
        jc["pll"] = {{"center_freq", ch.pll.center_freq},
                     {"loop_bandwidth", ch.pll.loop_bandwidth},
                     {"capture_range", ch.pll.capture_range}};
        fb["channels"].push_back(jc);
    }
    j["feedback"] = fb;
    j["schedule"] = Json::array();
    for (const auto& w : cfg.schedule.windows) {
        j["schedule"].push_back(
            {{"t_start", w.t_start}, {"t_end", w.t_end}, {"channels", w.channels}, {"enabled", w.enabled}});
    }
    j["simulation"] = {{"duration", cfg.sim.duration},
                       {"dt", cfg.sim.dt},
                       {"sample_rate_out", cfg.sim.sample_rate_out},
                       {"runaway_bound", cfg.sim.runaway_bound},
                       {"initial", cfg.sim.initial == InitialState::thermal ? "thermal" : "zero"},
                       {"settle_time", cfg.settle_time},
                       {"record_torques", cfg.sim.record_torques}};
    j["analysis"] = {{"segment_length", cfg.analysis.psd.segment_length},
                     {"overlap", cfg.analysis.psd.overlap},
                     {"window", std::string(window_name(cfg.analysis.psd.window))},
                     {"peak_half_width", cfg.analysis.peak_half_width},
                     {"noise_inner", cfg.analysis.noise_inner},
                     {"noise_outer", cfg.analysis.noise_outer}};
    j["autotune"] = {{"points", cfg.autotune.points},
                     {"duration", cfg.autotune.duration},
                     {"lockin_bandwidth", cfg.autotune.lockin_bandwidth}};
    j["cooling_sweep"] = {{"pressures", cfg.cooling_sweep.pressures}};
    j["reheat"] = {{"mode", cfg.reheat.mode},
                   {"off_time", cfg.reheat.off_time},
                   {"on_time", cfg.reheat.on_time},
                   {"cycles", cfg.reheat.cycles},
                   {"lockin_bandwidth", cfg.reheat.lockin_bandwidth},
                   {"settle_time", cfg.reheat.settle_time},
                   {"cycles_per_job", cfg.reheat.cycles_per_job},
                   {"toggle_feedback", cfg.reheat.toggle_feedback}};
    j["heating_sweep"] = {{"pressures", cfg.heating_sweep.pressures}};
    j["efficiency"] = {{"mode", cfg.efficiency.mode},
                       {"calibration_pressure", cfg.efficiency.calibration_pressure},
                       {"calibration_duration", cfg.efficiency.calibration_duration},
                       {"calibration_chunks", cfg.efficiency.calibration_chunks},
                       {"floor_duration", cfg.efficiency.floor_duration}};
    return j;
}

/// Plant and experiment setup described by a config. Channels with
/// phase "auto" carry psi = pi until auto-tuning replaces it.
inline ExperimentSetup make_setup(const RunConfig& cfg) {
    ExperimentSetup s;
    s.plant.modes = cfg.modes;
    s.plant.noise = cfg.noise;
    s.plant.env = cfg.env;
    s.plant.detector = cfg.detector;
    for (const auto& ch : cfg.channels) {
        FeedbackChannel f;
        f.mode_label = ch.mode;
        f.pll = ch.pll;
        f.gain = ch.gain;
        f.phase_psi = ch.phase.value_or(std::numbers::pi);
        f.enabled = ch.enabled;
        s.channels.push_back(f);
    }
    s.sim = cfg.sim;
    s.sim.modulation_depth_limit = cfg.modulation_depth_limit;
    s.settle_time = cfg.settle_time;
    s.analysis = cfg.analysis;
    s.autotune = cfg.autotune;
    s.threads = cfg.jobs;
    return s;
}

// ---------------------------------------------------------------- output

/// printf("%.9g"); non-finite values print as nan / inf / -inf.
inline std::string format_number(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

/// Writes `content` to `path` via a temporary file in the same directory.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

/// Table with a header row and a units row; cells are text or numbers.
class CsvTable {
public:
    struct Column {
        std::string name;
        std::string unit;
    };

    explicit CsvTable(std::vector<Column> columns) : columns_(std::move(columns)) {}

    class Row {
    public:
        Row& num(double x) {
            cells_.push_back(format_number(x));
            return *this;
        }
        Row& text(std::string s) {
            cells_.push_back(std::move(s));
            return *this;
        }
        Row& integer(long long v) {
            cells_.push_back(std::to_string(v));
            return *this;
        }

    private:
        friend class CsvTable;
        std::vector<std::string> cells_;
    };

    Row& row() { return rows_.emplace_back(); }

    std::string str() const {
        std::ostringstream os;
        os << "# psd_convention: " << psd_convention << "\n";
        write_line(os, [&](std::size_t i) { return columns_[i].name; });
        write_line(os, [&](std::size_t i) { return columns_[i].unit; });
        for (const auto& r : rows_) {
            if (r.cells_.size() != columns_.size()) {
                throw std::logic_error("csv: row width does not match the header");
            }
            write_line(os, [&](std::size_t i) { return r.cells_[i]; });
        }
        return os.str();
    }

    void write(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string out = "\"";
        for (char c : s) {
            out += c == '"' ? std::string("\"\"") : std::string(1, c);
        }
        return out + "\"";
    }

    template <class F>
    void write_line(std::ostringstream& os, F&& cell) const {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            os << (i ? "," : "") << quote(cell(i));
        }
        os << "\n";
    }

    std::vector<Column> columns_;
    std::vector<Row> rows_;
};

struct TraceChannel {
    std::string name;
    const Timetrace* trace;
};

/// Interleaved float64 little-endian samples (sample-major) at `<stem>.f64`
/// plus a JSON sidecar `<stem>.json` describing channels, units and timing.
inline void write_traces(const std::filesystem::path& stem, const std::vector<TraceChannel>& channels) {
    detail::require(!channels.empty(), "write_traces: no channels");
    const auto& first = *channels.front().trace;
    for (const auto& c : channels) {
        detail::require(c.trace->size() == first.size() && c.trace->sample_rate == first.sample_rate,
                        "write_traces: channels must share length and sample rate");
    }
    std::string bytes;
    bytes.reserve(first.size() * channels.size() * 8);
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (const auto& c : channels) {
            auto bits = std::bit_cast<std::uint64_t>(c.trace->samples[i]);
            for (int b = 0; b < 8; ++b) {
                bytes.push_back(static_cast<char>(bits & 0xffu));
                bits >>= 8;
            }
        }
    }
    const std::filesystem::path data = stem.string() + ".f64";
    write_file_atomic(data, bytes);

    Json meta;
    meta["format"] = "float64 little-endian, interleaved (sample-major)";
    meta["data_file"] = data.filename().string();
    meta["n_samples"] = first.size();
    meta["n_channels"] = channels.size();
    meta["sample_rate"] = first.sample_rate;
    meta["sample_rate_unit"] = "Hz";
    meta["start_time"] = first.start_time;
    meta["start_time_unit"] = "s";
    meta["psd_convention"] = psd_convention;
    meta["channels"] = Json::array();
    for (const auto& c : channels) {
        meta["channels"].push_back({{"name", c.name}, {"unit", c.trace->unit}});
    }
    write_file_atomic(stem.string() + ".json", meta.dump(2) + "\n");
}

/// Reads back a trace pair written by write_traces.
inline std::vector<Timetrace> read_traces(const std::filesystem::path& stem) {
    std::ifstream meta_in(stem.string() + ".json");
    detail::require(static_cast<bool>(meta_in), "read_traces: missing sidecar");
    const Json meta = Json::parse(meta_in);
    const auto n = meta.at("n_samples").get<std::size_t>();
    const auto nc = meta.at("n_channels").get<std::size_t>();
    std::ifstream in(stem.string() + ".f64", std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    detail::require(bytes.size() == n * nc * 8, "read_traces: data size does not match sidecar");
    std::vector<Timetrace> out(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        out[c].sample_rate = meta.at("sample_rate").get<double>();
        out[c].start_time = meta.at("start_time").get<double>();
        out[c].unit = meta.at("channels")[c].at("unit").get<std::string>();
        out[c].samples.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < nc; ++c) {
            std::uint64_t bits = 0;
            const std::size_t off = (i * nc + c) * 8;
            for (int b = 7; b >= 0; --b) {
                bits = (bits << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(b)]);
            }
            out[c].samples[i] = std::bit_cast<double>(bits);
        }
    }
    return out;
}

/// Numbers in JSON summaries: finite values as-is, others as strings.
inline Json json_number(double x) {
    if (std::isfinite(x)) {
        return x;
    }
    return format_number(x);
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace libracool
