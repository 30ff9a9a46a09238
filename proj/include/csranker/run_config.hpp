#pragma once

// Key = value run configuration (archived artifact; flags override file
// values) and the per-run manifest with phase timings and output digests.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csranker/batch_solver.hpp"
#include "csranker/evaluation.hpp"
#include "csranker/online_solver.hpp"
#include "csranker/psm_dataset.hpp"

namespace csranker {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
    // data source: a TSV path or a synthetic spec
    std::string data_path;
    bool use_synth = false;
    SynthSpec synth{1000, 1000, 0.35, 8.0, 1};
    std::string synth_preset;  // "", "normal", "hard"

    int train_parts = 2;
    int test_parts = 1;
    std::uint64_t seed = 1;

    ModelParams model;
    SolverKind solver = SolverKind::online;
    OnlineConfig online;
    BatchConfig batch;
    // Accepted for forward compatibility; no pseudocode line consumes them.
    double mu_safe = 0.0;
    double mu_safe_target = 0.0;

    std::vector<double> target_fdrs = {0.05};

    int bench_trials = 10;
    bool subset_mode = false;
    long subset_size = 16000;
    int subset_count = 5;

    std::string out_dir = ".";
    std::size_t cache_rows = 512;
    bool log_progress = false;

    // Derived solver/synth seeds so one master seed drives the whole run.
    std::uint64_t split_seed() const { return seed; }
    std::uint64_t solver_seed() const { return seed + 1; }
    std::uint64_t synth_seed() const { return use_synth ? synth.seed : seed; }

    void validate() const;
    std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

// Strict schema: every key must be known, every value well formed; errors
// carry the offending line. `#` starts a comment.
RunConfig parse_config_file(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

void write_config_file(const RunConfig& cfg, const std::filesystem::path& path);

class RunManifest {
  public:
    RunManifest(const std::string& command, const RunConfig& cfg);

    void set_timing(const std::string& phase, double seconds);
    void set_number(const std::string& key, double value);
    void set_flag(const std::string& key, bool value);
    void set_text(const std::string& key, const std::string& value);
    // Records the file with its FNV-1a digest.
    void add_output(const std::filesystem::path& path);

    const nlohmann::json& json() const { return j_; }
    void write(const std::filesystem::path& path) const;

  private:
    nlohmann::json j_;
};

}  // namespace csranker
