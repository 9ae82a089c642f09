// Command-line front end: run a scenario config, validate one, or list the
// available scenarios. Exit codes: 0 all checks passed, 1 a numeric check
// failed, 2 usage or configuration error.

#include "klab/scenarios.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

int load_config(const std::string& path, klab::Json& out) {
    std::ifstream f(path);
    if (!f) {
        std::cerr << "cannot open config file: " << path << "\n";
        return 2;
    }
    try {
        f >> out;
    } catch (const std::exception& e) {
        std::cerr << "config is not valid JSON: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"form transport experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    long long seed_override = -1;
    int threads = 0;
    bool dump_paths = false;

    CLI::App* run = app.add_subcommand("run", "execute a scenario config");
    run->add_option("config", config_path, "JSON config file")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_override, "override the output directory");
    run->add_option("--threads", threads, "worker threads for path loops");
    run->add_flag("--dump-paths", dump_paths, "also write the Brownian increments");

    std::string val_path;
    CLI::App* val = app.add_subcommand("validate", "check a config without running");
    val->add_option("config", val_path, "JSON config file")->required();

    CLI::App* list = app.add_subcommand("list", "print the available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        for (const auto& name : klab::scenario_names()) std::cout << name << "\n";
        return 0;
    }

    if (val->parsed()) {
        klab::Json doc;
        if (int rc = load_config(val_path, doc)) return rc;
        auto problems = klab::validate_config(doc);
        if (problems.empty()) {
            std::cout << "ok\n";
            return 0;
        }
        for (const auto& p : problems) std::cout << p << "\n";
        return 2;
    }

    klab::Json doc;
    if (int rc = load_config(config_path, doc)) return rc;
    if (seed_override >= 0) doc["seed"] = seed_override;
    if (!out_override.empty())
        doc["out"] = out_override;
    else if (const char* env = std::getenv("KLAB_OUT"); env && *env && !doc.contains("out"))
        doc["out"] = env;
    if (threads > 0) doc["threads"] = threads;
    if (dump_paths) doc["dump_paths"] = true;

    try {
        klab::ScenarioConfig cfg = klab::parse_config(doc);
        klab::RunManifest m = klab::run_scenario(cfg);
        for (const auto& c : m.checks)
            std::printf("[%s] %s: %.6g (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                        c.value, c.detail.c_str());
        std::printf("manifest: %s/manifest.json (config %s, %.2fs)\n", cfg.out_dir.c_str(),
                    m.config_hash.c_str(), m.wall_seconds);
        return m.all_pass() ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 2;
    }
}
