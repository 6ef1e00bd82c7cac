#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vrmcast/config.hpp"
#include "vrmcast/errors.hpp"
#include "vrmcast/simcore.hpp"
#include "vrmcast/sweep.hpp"

namespace fs = std::filesystem;
using namespace vrmcast;

namespace {

struct Common {
    std::string config_path;
    std::string preset_name;
    std::string scheme;
    std::int64_t seed = -1;
    std::string out = "out";
    std::vector<std::string> params;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "JSON config file");
    app->add_option("--preset", c.preset_name, "scenario preset the config file and params apply on top of");
    app->add_option("--scheme", c.scheme, "UREAC, MREAC, MPROAC or MPROAC+");
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--param", c.params, "key=value override (repeatable)");
}

SimConfig effective(const Common& c) {
    SimConfig base = c.preset_name.empty() ? SimConfig{} : preset(c.preset_name);
    std::vector<std::string> overrides = c.params;
    if (!c.scheme.empty()) overrides.push_back("scheme=\"" + c.scheme + "\"");
    if (c.seed >= 0) overrides.push_back("seed=" + std::to_string(c.seed));
    return parse_config(base, c.config_path, overrides);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

int cmd_run(const Common& c) {
    const SimConfig cfg = effective(c);
    const Scheme scheme = parse_scheme(cfg.scheme);
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "effective_config.json", to_json(cfg).dump(2) + "\n");
    const auto result = sim::run(cfg, scheme, cfg.seed);
    std::ostringstream csv;
    sim::write_frames_csv(csv, result.frames, scheme_name(scheme));
    write_file(fs::path(c.out) / "frames.csv", csv.str());
    write_file(fs::path(c.out) / "summary.json", result.report.to_json().dump(2) + "\n");
    const auto& r = result.report;
    std::cout << scheme_name(scheme) << " seed=" << r.seed << " users=" << r.users << " frames=" << r.frames
              << " avg_delay_ms=" << r.avg_delay_ms << " p99_delay_ms=" << r.p99_delay_ms
              << " hd_rate=" << r.hd_delivery_rate << " jaccard=" << r.delivered_jaccard
              << " violation=" << r.violation_fraction << " invariant_failures=" << r.invariants.total() << "\n";
    return 0;
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& values,
              const std::vector<std::string>& schemes, const std::vector<std::uint64_t>& seeds, int workers) {
    const SimConfig cfg = effective(c);
    sweep::SweepSpec spec;
    spec.param = param;
    for (const auto& v : values) {
        try {
            spec.values.push_back(nlohmann::json::parse(v));
        } catch (const nlohmann::json::parse_error&) {
            spec.values.emplace_back(v);
        }
    }
    if (schemes.empty())
        spec.schemes = all_schemes();
    else
        for (const auto& s : schemes) spec.schemes.push_back(parse_scheme(s));
    spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
    spec.workers = workers;
    for (const auto& v : spec.values) (void)sweep::sweep_point(cfg, param, v);

    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "effective_config.json", to_json(cfg).dump(2) + "\n");
    const auto rows = sweep::run_sweep(cfg, spec);
    std::ostringstream csv;
    sweep::write_sweep_csv(csv, rows);
    write_file(fs::path(c.out) / "sweep.csv", csv.str());
    std::istringstream in(csv.str());
    const auto table = sweep::read_sweep_csv(in);
    for (const auto& m : sweep::chart_metrics()) write_file(fs::path(c.out) / (m + ".svg"), sweep::render_svg(table, m));
    std::cout << rows.size() << " runs written to " << (fs::path(c.out) / "sweep.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multicast VR streaming simulator"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts;
    auto* run = app.add_subcommand("run", "simulate one (config, scheme, seed)");
    add_common(run, run_opts);

    auto* sw = app.add_subcommand("sweep", "run a parameter sweep and chart it");
    add_common(sw, sweep_opts);
    std::string sweep_param;
    std::vector<std::string> sweep_values, sweep_schemes;
    std::vector<std::uint64_t> sweep_seeds;
    int workers = 0;
    sw->add_option("--sweep-param", sweep_param, "config key to vary, or 'preset'")->required();
    sw->add_option("--values", sweep_values, "values of the swept key")->required()->delimiter(',');
    sw->add_option("--schemes", sweep_schemes, "schemes to run (default: all)")->delimiter(',');
    sw->add_option("--seeds", sweep_seeds, "seeds to run (default: the config seed)")->delimiter(',');
    sw->add_option("--workers", workers, "parallel runs (default: hardware threads)");

    auto* list = app.add_subcommand("preset-list", "print the scenario presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*list) {
            for (const auto& name : preset_names()) {
                const auto p = preset(name);
                std::cout << name << "  " << p.theater_rows << "x" << p.theater_cols << " seats, " << p.num_videos
                          << " video(s), " << p.num_users() << " users, " << p.total_clusters() << " clusters\n";
            }
            return 0;
        }
        if (*run) return cmd_run(run_opts);
        return cmd_sweep(sweep_opts, sweep_param, sweep_values, sweep_schemes, sweep_seeds, workers);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
