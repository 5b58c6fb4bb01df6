#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "libracool/cli.hpp"
#include "libracool/io.hpp"

using namespace libracool;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"modes": [{"label": "a", "frequency": 33000}]})";

std::string desk_config(const std::string& extra) {
    return R"({"seed": 3,
  "modes": [{"label": "desk", "frequency": 33000, "inertia": 1e-30, "gamma_ref": 5,
             "calibration_c": 10, "S_imp_exp": 1e-9}],
  "environment": {"pressure": 1},
  "feedback": {"channels": [{"mode": "desk", "gain": 0.009, "phase": 3.141592653589793}]},
  "simulation": {"duration": 0.02, "settle_time": 0.005},
  "analysis": {"segment_length": 1024})" +
           extra + "}";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("libracool_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

int cli(std::vector<std::string> args, std::string* err_out = nullptr) {
    args.insert(args.begin(), "libracool");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream os;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), os, err);
    if (err_out) {
        *err_out = err.str();
    }
    return code;
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
    const auto cfg = parse_config(kMinimal);
    ASSERT_EQ(cfg.modes.size(), 1u);
    EXPECT_NEAR(cfg.modes[0].frequency(), 33000.0, 1e-9);
    EXPECT_EQ(cfg.env, Environment{});
    EXPECT_EQ(cfg.jobs, 1u);
    EXPECT_TRUE(cfg.channels.empty());
    const auto echoed = config_to_json(cfg);
    EXPECT_TRUE(echoed.contains("simulation"));
    EXPECT_TRUE(echoed.contains("analysis"));
    EXPECT_TRUE(echoed["modes"][0].contains("omega0"));
}

TEST(Config, RoundTripIsExact) {
    for (const char* name : {"default.json", "reheat_desk.json", "efficiency_demo.json"}) {
        const auto cfg = load_config(fs::path(LIBRACOOL_CONFIG_DIR) / name);
        const auto again = config_from_json(config_to_json(cfg));
        EXPECT_TRUE(again == cfg) << name;
        EXPECT_EQ(config_to_json(again).dump(), config_to_json(cfg).dump()) << name;
    }
}

TEST(Config, UnknownKeysAreNamed) {
    EXPECT_NE(config_error(R"({"modess": []})").find("modess"), std::string::npos);
    const auto nested = config_error(R"({"modes": [{"label": "a", "frequency": 1e3, "inertai": 1}]})");
    EXPECT_NE(nested.find("modes[0].inertai"), std::string::npos) << nested;
}

TEST(Config, ParseErrorReportsLineAndColumn) {
    const auto msg = config_error("{\n  \"modes\": [\n    {\"label\": \"a\",, }\n  ]\n}");
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("parse error"), std::string::npos) << msg;
}

TEST(Config, SemanticErrors) {
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": 1e3, "omega0": 5}]})").empty());
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": -1}]})").empty());
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": 1e3}, {"label": "a", "frequency": 2e3}]})").empty());
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": 1e3}],
        "feedback": {"channels": [{"mode": "b"}]}})").empty());
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": 1e3}],
        "feedback": {"channels": [{"mode": "a", "phase": "later"}]}})").empty());
    const auto overlap = config_error(R"({"modes": [{"label": "a", "frequency": 1e3}],
        "feedback": {"channels": [{"mode": "a"}]},
        "schedule": [{"t_start": 0, "t_end": 1, "channels": ["a"]},
                     {"t_start": 0.5, "t_end": 2, "channels": ["a"], "enabled": true}]})");
    EXPECT_FALSE(overlap.empty());
    EXPECT_NE(overlap.find("schedule"), std::string::npos) << overlap;
    EXPECT_FALSE(config_error(R"({"modes": [{"label": "a", "frequency": 1e3}], "environment": {"pressure": "high"}})").empty());
}

TEST(Config, AutoPhaseIsEmpty) {
    const auto cfg = parse_config(R"({"modes": [{"label": "a", "frequency": 1e3}, {"label": "b", "frequency": 2e3}],
        "feedback": {"channels": [{"mode": "a", "phase": "auto"}, {"mode": "b", "phase": 1.5}]}})");
    EXPECT_FALSE(cfg.channels[0].phase.has_value());
    EXPECT_EQ(cfg.channels[1].phase.value(), 1.5);
}

TEST(Output, NumberFormatting) {
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(format_number(123456789012.0), "1.23456789e+11");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Output, CsvLayout) {
    CsvTable t({{"pressure", "mbar"}, {"mode", ""}, {"T", "K"}});
    t.row().num(0.1).text("alpha").num(295.123456789123);
    const auto s = t.str();
    std::istringstream in(s);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# psd_convention: single-sided", 0), 0u);
    std::getline(in, line);
    EXPECT_EQ(line, "pressure,mode,T");
    std::getline(in, line);
    EXPECT_EQ(line, "mbar,,K");
    std::getline(in, line);
    EXPECT_EQ(line, "0.1,alpha,295.123457");
    CsvTable bad(std::vector<CsvTable::Column>{{"a", ""}});
    bad.row().num(1).num(2);
    EXPECT_THROW(bad.str(), std::logic_error);
}

TEST(Output, BinaryTracesRoundTrip) {
    const auto dir = temp_dir("traces");
    Timetrace a{1000.0, 0.5, {1.0, -2.5, 3.25e-300}, "V"};
    Timetrace b{1000.0, 0.5, {0.0, 1e300, -0.125}, "V"};
    write_traces(dir / "tr", {{"a", &a}, {"b", &b}});
    EXPECT_EQ(fs::file_size(dir / "tr.f64"), 6u * sizeof(double));
    const auto side = Json::parse(read_file(dir / "tr.json"));
    EXPECT_NE(side["format"].get<std::string>().find("little-endian"), std::string::npos);
    const auto back = read_traces(dir / "tr");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].samples, a.samples);
    EXPECT_EQ(back[1].samples, b.samples);
    EXPECT_EQ(back[1].sample_rate, 1000.0);
    EXPECT_EQ(back[1].start_time, 0.5);
}

TEST(Cli, ConfigErrorsExitWithConfigCode) {
    const auto dir = temp_dir("cli_cfg");
    EXPECT_EQ(cli({"psd"}), exit_config);
    EXPECT_EQ(cli({"psd", "--config", (dir / "missing.json").string()}), exit_config);
    std::string err;
    EXPECT_EQ(cli({"psd", "--config", write_config(dir, R"({"modess": []})").string()}, &err), exit_config);
    EXPECT_NE(err.find("modess"), std::string::npos);
    EXPECT_EQ(cli({"unknown-command"}), exit_config);
    EXPECT_EQ(cli({"psd", "--config", write_config(dir, desk_config("")).string(), "--pressures", "1,x"}),
              exit_config);
}

TEST(Cli, SelftestPasses) { EXPECT_EQ(cli({"selftest"}), exit_ok); }

TEST(Cli, PsdWritesTablesAndSummary) {
    const auto dir = temp_dir("cli_psd");
    const auto cfg = write_config(dir, desk_config(""));
    ASSERT_EQ(cli({"psd", "--config", cfg.string(), "--out", (dir / "out").string()}), exit_ok);
    for (const char* f : {"psd.csv", "temperatures.csv", "summary.json", "resolved_config.json"}) {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }
    const auto summary = Json::parse(read_file(dir / "out" / "summary.json"));
    EXPECT_EQ(summary["command"], "psd");
    EXPECT_EQ(summary["seed"], 3);
    const auto resolved = config_from_json(summary["resolved_config"]);
    EXPECT_TRUE(resolved == config_from_json(Json::parse(read_file(dir / "out" / "resolved_config.json"))));
}

TEST(Cli, SimulateWritesBinaryTraces) {
    const auto dir = temp_dir("cli_sim");
    const auto cfg = write_config(dir, desk_config(""));
    ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--out", (dir / "out").string()}), exit_ok);
    const auto traces = read_traces(dir / "out" / "traces");
    ASSERT_FALSE(traces.empty());
    EXPECT_GT(traces[0].samples.size(), 100u);
}

TEST(Cli, EnvironmentOverridesSeed) {
    const auto dir = temp_dir("cli_env");
    const auto cfg = write_config(dir, desk_config(""));
    ::setenv("LIBRACOOL_SEED", "77", 1);
    const int code = cli({"psd", "--config", cfg.string(), "--out", (dir / "env").string()});
    ::unsetenv("LIBRACOOL_SEED");
    ASSERT_EQ(code, exit_ok);
    EXPECT_EQ(Json::parse(read_file(dir / "env" / "summary.json"))["seed"], 77);
    ASSERT_EQ(cli({"psd", "--config", cfg.string(), "--out", (dir / "flag").string(), "--seed", "78"}), exit_ok);
    EXPECT_EQ(Json::parse(read_file(dir / "flag" / "summary.json"))["seed"], 78);
}

TEST(Cli, RunawayIsSimulationError) {
    const auto dir = temp_dir("cli_runaway");
    auto text = desk_config("");
    text.replace(text.find("3.141592653589793"), 17, "0");
    const auto cfg = write_config(dir, text);
    EXPECT_EQ(cli({"simulate", "--config", cfg.string(), "--out", (dir / "out").string()}), exit_simulation);
}

TEST(Cli, ShortSettleIsProtocolError) {
    const auto dir = temp_dir("cli_protocol");
    const auto cfg = write_config(
        dir, desk_config(R"(, "reheat": {"mode": "desk", "off_time": 0.01, "on_time": 0.005, "cycles": 40,
                            "cycles_per_job": 1, "settle_time": 0.006})"));
    EXPECT_EQ(cli({"reheat", "--config", cfg.string(), "--out", (dir / "out").string()}), exit_protocol);
}

TEST(Cli, PartialSweepFailure) {
    const auto dir = temp_dir("cli_partial");
    auto text = desk_config("");
    text.replace(text.find("3.141592653589793"), 17, "0");
    const auto cfg = write_config(dir, text);
    const auto out = dir / "out";
    EXPECT_EQ(cli({"cool-sweep", "--config", cfg.string(), "--out", out.string(), "--pressures", "400,1"}),
              exit_partial);
    const auto csv = read_file(out / "cooling_sweep.csv");
    EXPECT_NE(csv.find("400"), std::string::npos);
    EXPECT_EQ(cli({"cool-sweep", "--config", cfg.string(), "--out", out.string(), "--pressures", "1,0.5"}),
              exit_simulation);
}
