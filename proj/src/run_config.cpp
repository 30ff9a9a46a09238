#include "csranker/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "csranker/errors.hpp"
#include "csranker/text_util.hpp"

namespace csranker {

void RunConfig::validate() const {
    if (use_synth) synth.validate();
    if (!use_synth && data_path.empty() && !synth_preset.empty())
        throw ConfigError("synth.preset given without synth counts");
    if (train_parts <= 0 || test_parts <= 0)
        throw ConfigError("split ratio parts must be positive");
    model.validate();
    online.validate();
    batch.validate();
    for (double f : target_fdrs)
        if (!(f >= 0.0 && f < 1.0))
            throw ConfigError("eval.fdr values must lie in [0, 1)");
    if (target_fdrs.empty()) throw ConfigError("eval.fdr must not be empty");
    if (bench_trials < 1) throw ConfigError("bench.trials must be >= 1");
    if (subset_size < 1) throw ConfigError("bench.subset_size must be >= 1");
    if (subset_count < 1) throw ConfigError("bench.subsets must be >= 1");
    if (cache_rows == 0) throw ConfigError("cache.rows must be positive");
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct KeyValue {
    std::string value;
    std::size_t line;
};

double to_double(const std::string& v, const std::string& key, std::size_t line) {
    try {
        return parse_double(v, key);
    } catch (const DataError& e) {
        throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
    }
}

long to_long(const std::string& v, const std::string& key, std::size_t line) {
    try {
        return parse_long(v, key);
    } catch (const DataError& e) {
        throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& key,
                     std::size_t line) {
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config line " + std::to_string(line) + ": bad " + key +
                          " value '" + v + "'");
    return out;
}

bool to_bool(const std::string& v, const std::string& key, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config line " + std::to_string(line) + ": bad " + key +
                      " value '" + v + "' (expected true/false)");
}

std::vector<double> to_fdr_list(const std::string& v, std::size_t line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(to_double(tok, "eval.fdr", line));
    }
    if (out.empty())
        throw ConfigError("config line " + std::to_string(line) +
                          ": eval.fdr list is empty");
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, KeyValue> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value, got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": empty key");
        if (kv.count(key))
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": duplicate key '" + key + "'");
        kv[key] = {value, line_no};
    }

    RunConfig cfg;
    auto take = [&](const char* key) -> std::optional<KeyValue> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        KeyValue out = it->second;
        kv.erase(it);
        return out;
    };

    if (auto v = take("data")) cfg.data_path = v->value;
    bool any_synth = false;
    if (auto v = take("synth.n_target")) {
        cfg.synth.n_target = to_long(v->value, "synth.n_target", v->line);
        any_synth = true;
    }
    if (auto v = take("synth.n_decoy")) {
        cfg.synth.n_decoy = to_long(v->value, "synth.n_decoy", v->line);
        any_synth = true;
    }
    if (auto v = take("synth.preset")) {
        cfg.synth_preset = v->value;
        any_synth = true;
        SynthSpec preset = synth_preset(cfg.synth_preset, cfg.synth.n_target,
                                        cfg.synth.n_decoy, cfg.synth.seed);
        cfg.synth.pi_correct = preset.pi_correct;
        cfg.synth.separation = preset.separation;
    }
    if (auto v = take("synth.pi_correct")) {
        cfg.synth.pi_correct = to_double(v->value, "synth.pi_correct", v->line);
        any_synth = true;
    }
    if (auto v = take("synth.separation")) {
        cfg.synth.separation = to_double(v->value, "synth.separation", v->line);
        any_synth = true;
    }
    cfg.use_synth = any_synth && cfg.data_path.empty();
    if (any_synth && !cfg.data_path.empty())
        throw ConfigError("config: give either data or synth.*, not both");

    if (auto v = take("seed")) {
        cfg.seed = to_u64(v->value, "seed", v->line);
        cfg.synth.seed = cfg.seed;
    }
    if (auto v = take("split.train"))
        cfg.train_parts = static_cast<int>(to_long(v->value, "split.train", v->line));
    if (auto v = take("split.test"))
        cfg.test_parts = static_cast<int>(to_long(v->value, "split.test", v->line));

    if (auto v = take("model.c1")) cfg.model.c1 = to_double(v->value, "model.c1", v->line);
    if (auto v = take("model.c2")) cfg.model.c2 = to_double(v->value, "model.c2", v->line);
    if (auto v = take("model.lambda"))
        cfg.model.lambda = to_double(v->value, "model.lambda", v->line);
    if (auto v = take("model.sigma"))
        cfg.model.kernel.sigma = to_double(v->value, "model.sigma", v->line);
    if (auto v = take("model.allow_negative_s"))
        cfg.model.allow_negative_s =
            to_bool(v->value, "model.allow_negative_s", v->line);

    if (auto v = take("solver")) {
        if (v->value == "online")
            cfg.solver = SolverKind::online;
        else if (v->value == "batch")
            cfg.solver = SolverKind::batch;
        else
            throw ConfigError("config line " + std::to_string(v->line) +
                              ": solver must be online or batch");
    }

    if (auto v = take("online.min_active"))
        cfg.online.min_active = static_cast<std::size_t>(
            to_long(v->value, "online.min_active", v->line));
    if (auto v = take("online.tau"))
        cfg.online.tau = to_double(v->value, "online.tau", v->line);
    if (auto v = take("online.clean_period"))
        cfg.online.clean_period = to_long(v->value, "online.clean_period", v->line);
    if (auto v = take("online.clean_max_removed"))
        cfg.online.clean_max_removed =
            to_long(v->value, "online.clean_max_removed", v->line);
    if (auto v = take("online.finishing_sweeps"))
        cfg.online.finishing_sweeps =
            to_long(v->value, "online.finishing_sweeps", v->line);
    if (auto v = take("online.epochs"))
        cfg.online.epochs = static_cast<int>(to_long(v->value, "online.epochs", v->line));
    if (auto v = take("online.clean_by_abs_gradient"))
        cfg.online.clean_by_abs_gradient =
            to_bool(v->value, "online.clean_by_abs_gradient", v->line);
    if (auto v = take("online.mu_safe"))
        cfg.mu_safe = to_double(v->value, "online.mu_safe", v->line);
    if (auto v = take("online.mu_safe_target"))
        cfg.mu_safe_target = to_double(v->value, "online.mu_safe_target", v->line);

    if (auto v = take("batch.tol_inner"))
        cfg.batch.tol_inner = to_double(v->value, "batch.tol_inner", v->line);
    if (auto v = take("batch.max_outer"))
        cfg.batch.max_outer = static_cast<int>(to_long(v->value, "batch.max_outer", v->line));
    if (auto v = take("batch.max_inner_sweeps"))
        cfg.batch.max_inner_sweeps =
            to_long(v->value, "batch.max_inner_sweeps", v->line);

    if (auto v = take("eval.fdr")) cfg.target_fdrs = to_fdr_list(v->value, v->line);

    if (auto v = take("bench.trials"))
        cfg.bench_trials = static_cast<int>(to_long(v->value, "bench.trials", v->line));
    if (auto v = take("bench.subset_mode"))
        cfg.subset_mode = to_bool(v->value, "bench.subset_mode", v->line);
    if (auto v = take("bench.subset_size"))
        cfg.subset_size = to_long(v->value, "bench.subset_size", v->line);
    if (auto v = take("bench.subsets"))
        cfg.subset_count = static_cast<int>(to_long(v->value, "bench.subsets", v->line));

    if (auto v = take("out")) cfg.out_dir = v->value;
    if (auto v = take("cache.rows"))
        cfg.cache_rows = static_cast<std::size_t>(to_long(v->value, "cache.rows", v->line));
    if (auto v = take("log.progress"))
        cfg.log_progress = to_bool(v->value, "log.progress", v->line);

    if (!kv.empty()) {
        const auto& [key, rest] = *kv.begin();
        throw ConfigError("config line " + std::to_string(rest.line) +
                          ": unknown key '" + key + "'");
    }

    cfg.online.cache_rows = cfg.cache_rows;
    cfg.batch.cache_rows = cfg.cache_rows;
    cfg.online.seed = cfg.solver_seed();
    cfg.batch.seed = cfg.solver_seed();
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_key_values() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto add = [&](const std::string& k, const std::string& v) {
        kv.emplace_back(k, v);
    };
    if (!data_path.empty()) add("data", data_path);
    if (use_synth) {
        add("synth.n_target", std::to_string(synth.n_target));
        add("synth.n_decoy", std::to_string(synth.n_decoy));
        add("synth.pi_correct", format_double(synth.pi_correct));
        add("synth.separation", format_double(synth.separation));
    }
    add("seed", std::to_string(seed));
    add("split.train", std::to_string(train_parts));
    add("split.test", std::to_string(test_parts));
    add("model.c1", format_double(model.c1));
    add("model.c2", format_double(model.c2));
    add("model.lambda", format_double(model.lambda));
    add("model.sigma", format_double(model.kernel.sigma));
    add("model.allow_negative_s", model.allow_negative_s ? "true" : "false");
    add("solver", solver == SolverKind::online ? "online" : "batch");
    add("online.min_active", std::to_string(online.min_active));
    add("online.tau", format_double(online.tau));
    add("online.clean_period", std::to_string(online.clean_period));
    add("online.clean_max_removed", std::to_string(online.clean_max_removed));
    add("online.finishing_sweeps", std::to_string(online.finishing_sweeps));
    add("online.epochs", std::to_string(online.epochs));
    add("online.clean_by_abs_gradient",
        online.clean_by_abs_gradient ? "true" : "false");
    add("batch.tol_inner", format_double(batch.tol_inner));
    add("batch.max_outer", std::to_string(batch.max_outer));
    add("batch.max_inner_sweeps", std::to_string(batch.max_inner_sweeps));
    std::string fdrs;
    for (double f : target_fdrs) {
        if (!fdrs.empty()) fdrs += ",";
        fdrs += format_double(f);
    }
    add("eval.fdr", fdrs);
    add("bench.trials", std::to_string(bench_trials));
    add("bench.subset_mode", subset_mode ? "true" : "false");
    add("bench.subset_size", std::to_string(subset_size));
    add("bench.subsets", std::to_string(subset_count));
    add("out", out_dir);
    add("cache.rows", std::to_string(cache_rows));
    add("log.progress", log_progress ? "true" : "false");
    return kv;
}

void write_config_file(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path.string());
    for (const auto& [k, v] : cfg.to_key_values()) out << k << " = " << v << '\n';
}

RunManifest::RunManifest(const std::string& command, const RunConfig& cfg) {
    j_["version"] = std::string("csranker ") + kVersion;
    j_["command"] = command;
    nlohmann::json resolved = nlohmann::json::object();
    for (const auto& [k, v] : cfg.to_key_values()) resolved[k] = v;
    j_["resolved_config"] = resolved;
    j_["seeds"] = {{"master", cfg.seed},
                   {"split", cfg.split_seed()},
                   {"solver", cfg.solver_seed()},
                   {"synth", cfg.synth_seed()}};
    j_["timings_s"] = nlohmann::json::object();
    j_["outputs"] = nlohmann::json::object();
}

void RunManifest::set_timing(const std::string& phase, double seconds) {
    j_["timings_s"][phase] = seconds;
}

void RunManifest::set_number(const std::string& key, double value) {
    j_[key] = value;
}

void RunManifest::set_flag(const std::string& key, bool value) { j_[key] = value; }

void RunManifest::set_text(const std::string& key, const std::string& value) {
    j_[key] = value;
}

void RunManifest::add_output(const std::filesystem::path& path) {
    j_["outputs"][path.filename().string()] = to_hex(fnv1a64_file(path));
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << j_.dump(2) << '\n';
}

}  // namespace csranker
