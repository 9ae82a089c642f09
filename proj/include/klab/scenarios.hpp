#pragma once

// Scenario orchestration: parse a config document, run the named experiment,
// emit CSV reports plus a JSON manifest. Everything numeric that lands in a
// file goes through the %.17g writer and a fixed reduction order, so a rerun
// of the same config (at any worker count) reproduces the CSVs byte for
// byte. The manifest additionally records wall time, which is the one field
// allowed to differ between reruns.

#include "klab/registry.hpp"
#include "klab/report.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace klab {

struct ScenarioConfig {
    std::string scenario;
    int n = 2;
    int k = 1;
    std::uint64_t seed = 0;
    int n_paths = 64;
    Vec eps_list;          // defaults to {0.2, 0.1, 0.05, 0.025} when empty
    double horizon = 0.0;  // 0 = scenario default
    int base_steps = 0;    // 0 = scenario default
    int level = 0;
    int threads = 1;
    bool dump_paths = false;
    bool allow_large_n = false;
    std::string out_dir = "out";
    Json fields;  // optional overrides: drift, noise (array), initial, test
    Json params;  // scenario-specific knobs, all optional
    Json raw;     // full document as given, fingerprinted into the manifest
};

std::vector<std::string> scenario_names();

// All invariant checks without running anything: unknown keys, missing seed,
// unknown scenario, k > n, absent registry primitives, malformed field
// specs. Returns every problem found; empty means runnable.
std::vector<std::string> validate_config(const Json& doc);

// validate + build; throws std::invalid_argument with the first diagnostic.
ScenarioConfig parse_config(const Json& doc);

struct CheckVerdict {
    std::string name;
    bool pass = false;
    double value = 0.0;  // the number the verdict was decided on
    std::string detail;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    double wall_seconds = 0.0;
    std::vector<CheckVerdict> checks;
    std::vector<std::string> outputs;  // files written, relative to out_dir

    bool all_pass() const;
};

// Executes the scenario, writes its reports under cfg.out_dir, writes
// manifest.json, and returns the manifest. Throws on unusable configs or an
// unwritable output directory; numeric check failures are reported through
// the verdicts, not exceptions.
RunManifest run_scenario(const ScenarioConfig& cfg);

std::string config_digest(const Json& doc);
std::string tool_version_string();
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace klab
