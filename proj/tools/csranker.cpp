// csranker: train, score and evaluate the cost-sensitive ramp-loss kernel
// ranker on PSM feature tables; includes a synthetic-data generator and a
// stability/timing bench. Runs are archived as key = value configs plus a
// JSON manifest with phase timings and output digests.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "csranker/errors.hpp"
#include "csranker/evaluation.hpp"
#include "csranker/run_config.hpp"
#include "csranker/text_util.hpp"

namespace fs = std::filesystem;
using namespace csranker;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumericWarning = 4;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
            .count();
    }
};

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string solver;
    std::string fdr_list;
    std::uint64_t seed = 0;
    bool seed_set = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value run config file");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--solver", solver, "online or batch")
            ->check(CLI::IsMember({"online", "batch"}));
        cmd->add_option("--fdr", fdr_list, "comma-separated target FDR list");
        cmd->add_option("--seed", seed, "master seed")
            ->each([this](const std::string&) { seed_set = true; });
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? RunConfig{}
                                            : parse_config_file(config_path);
        if (seed_set) {
            cfg.seed = seed;
            cfg.synth.seed = seed;
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!solver.empty())
            cfg.solver = solver == "batch" ? SolverKind::batch : SolverKind::online;
        if (!fdr_list.empty()) {
            RunConfig tmp = parse_config_text("eval.fdr = " + fdr_list);
            cfg.target_fdrs = tmp.target_fdrs;
        }
        cfg.online.seed = cfg.solver_seed();
        cfg.batch.seed = cfg.solver_seed();
        cfg.online.cache_rows = cfg.cache_rows;
        cfg.batch.cache_rows = cfg.cache_rows;
        cfg.validate();
        return cfg;
    }
};

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir.string());
    return dir;
}

Dataset load_input(const RunConfig& cfg, double* load_seconds) {
    Timer timer;
    Dataset d;
    if (cfg.use_synth) {
        SynthSpec spec = cfg.synth;
        spec.seed = cfg.synth_seed();
        d = generate_synthetic(spec);
    } else {
        if (cfg.data_path.empty())
            throw ConfigError("no data source: set data or synth.* keys");
        d = load_tsv(cfg.data_path);
    }
    if (!d.has_split())
        d = split_train_test(std::move(d), cfg.train_parts, cfg.test_parts,
                             cfg.split_seed());
    d = normalize_and_weight(std::move(d));
    if (load_seconds) *load_seconds = timer.seconds();
    return d;
}

int cmd_synth(const CommonFlags& flags) {
    RunConfig cfg = flags.resolve();
    if (!cfg.use_synth)
        throw ConfigError("synth command needs synth.* keys in the config");
    const fs::path dir = ensure_out_dir(cfg);
    Timer total;

    SynthSpec spec = cfg.synth;
    spec.seed = cfg.synth_seed();
    Timer gen;
    Dataset d = generate_synthetic(spec);
    d = split_train_test(std::move(d), cfg.train_parts, cfg.test_parts,
                         cfg.split_seed());
    const double gen_s = gen.seconds();

    const fs::path out = dir / "dataset.tsv";
    write_tsv(d, out);

    RunManifest manifest("synth", cfg);
    manifest.set_timing("generate", gen_s);
    manifest.set_timing("total", total.seconds());
    manifest.set_number("n_target", static_cast<double>(d.target_count()));
    manifest.set_number("n_decoy", static_cast<double>(d.decoy_count()));
    manifest.add_output(out);
    manifest.write(dir / "manifest.json");
    std::cout << "wrote " << out.string() << " (" << d.size() << " records)\n";
    return kExitOk;
}

int cmd_train(const CommonFlags& flags) {
    RunConfig cfg = flags.resolve();
    const fs::path dir = ensure_out_dir(cfg);
    Timer total;

    double load_s = 0.0;
    Dataset d = load_input(cfg, &load_s);

    std::ofstream progress;
    OnlineConfig online_cfg = cfg.online;
    if (cfg.log_progress && cfg.solver == SolverKind::online) {
        progress.open(dir / "train_progress.log");
        online_cfg.progress = &progress;
    }

    const TrainOutcome run =
        train_with(d, cfg.model, cfg.solver, cfg.batch, online_cfg);

    const fs::path model_path = dir / "model.tsv";
    save_model(run.model, model_path);

    RunManifest manifest("train", cfg);
    manifest.set_timing("load", load_s);
    manifest.set_timing("train", run.train_seconds);
    manifest.set_timing("total", total.seconds());
    manifest.set_number("final_kkt_violation", run.final_violation);
    manifest.set_flag("converged", run.converged);
    manifest.set_number("support_vectors",
                        static_cast<double>(run.model.alpha.size()));
    manifest.add_output(model_path);
    if (online_cfg.progress) {
        progress.close();
        manifest.add_output(dir / "train_progress.log");
    }
    manifest.write(dir / "manifest.json");

    std::cout << "trained " << (cfg.solver == SolverKind::batch ? "batch" : "online")
              << " model: " << run.model.alpha.size() << " support vectors, "
              << "train " << run.train_seconds << " s\n";
    if (!run.converged) {
        std::cerr << "warning: solver hit its iteration cap before convergence\n";
        return kExitNumericWarning;
    }
    return kExitOk;
}

int cmd_score(const CommonFlags& flags, const std::string& model_path,
              const std::string& data_path) {
    RunConfig cfg = flags.resolve();
    const fs::path dir = ensure_out_dir(cfg);
    Timer total;

    const TrainedModel model = load_model(model_path);
    Dataset d = load_tsv(data_path);
    if (d.size() == 0) throw DataError("score data file has no records");
    if (!d.has_split())
        d = split_train_test(std::move(d), cfg.train_parts, cfg.test_parts,
                             cfg.split_seed());
    d.apply_normalization(model.feature_means, model.feature_stds,
                          model.feature_weights);

    Timer score_timer;
    const ScoreTable scores = score_all(d, model.discriminant());
    const double score_s = score_timer.seconds();

    const fs::path out = dir / "scores.tsv";
    write_scores(scores, out);

    RunManifest manifest("score", cfg);
    manifest.set_timing("score", score_s);
    manifest.set_timing("total", total.seconds());
    manifest.set_text("model", model_path);
    manifest.set_text("data", data_path);
    manifest.add_output(out);
    manifest.write(dir / "manifest.json");
    std::cout << "wrote " << out.string() << " (" << scores.rows.size()
              << " rows)\n";
    return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::vector<std::string>& score_paths) {
    RunConfig cfg = flags.resolve();
    if (score_paths.empty()) throw ConfigError("eval needs at least one --scores file");
    if (score_paths.size() > 3)
        throw ConfigError("eval accepts at most three score files for overlap");
    const fs::path dir = ensure_out_dir(cfg);
    Timer total;

    std::vector<ScoreTable> tables;
    for (const auto& p : score_paths) tables.push_back(load_scores(p));
    const ScoreTable& primary = tables.front();

    RunManifest manifest("eval", cfg);

    // FDR report over the requested list.
    const fs::path report_path = dir / "fdr_report.tsv";
    {
        std::ofstream out(report_path);
        out << "target_fdr\tthreshold\taccepted_targets\taccepted_decoys\t"
               "estimated_fdr\ttest_total_ratio\n";
        for (double f : cfg.target_fdrs) {
            const FdrResult r = fdr_threshold(primary, f);
            const auto ratio = test_total_ratio(r);
            out << format_double(f) << '\t' << format_double(r.threshold) << '\t'
                << r.accepted_targets << '\t' << r.accepted_decoys << '\t'
                << format_double(r.estimated_fdr) << '\t'
                << (ratio ? format_double(*ratio) : "NA") << '\n';
            if (!r.attained)
                std::cerr << "note: no cutoff attains FDR " << f
                          << "; accepting nothing\n";
        }
    }
    manifest.add_output(report_path);

    // Accepted flags at the first (reporting) FDR.
    const FdrResult reporting = fdr_threshold(primary, cfg.target_fdrs.front());
    const fs::path accepted_path = dir / "scores_accepted.tsv";
    {
        std::ofstream out(accepted_path);
        out << "id\tlabel\tsplit\tscore\taccepted\n";
        for (std::size_t i = 0; i < primary.rows.size(); ++i) {
            const auto& r = primary.rows[i];
            out << r.id << '\t' << (r.label == 1 ? "target" : "decoy") << '\t'
                << (r.split == Split::train ? "train" : "test") << '\t'
                << format_double(r.score) << '\t'
                << (reporting.accepted[i] ? 1 : 0) << '\n';
        }
    }
    manifest.add_output(accepted_path);

    const fs::path roc_path = dir / "roc.tsv";
    const RocCurve roc = roc_curve(primary);
    write_roc(roc, roc_path);
    manifest.add_output(roc_path);
    manifest.set_number("auc", roc.auc);
    if (primary.has_oracle()) {
        const fs::path oracle_path = dir / "roc_oracle.tsv";
        write_roc(roc_curve_oracle(primary), oracle_path);
        manifest.add_output(oracle_path);
    }

    if (tables.size() > 1) {
        auto accepted_ids = [&](const ScoreTable& t) {
            const FdrResult r = fdr_threshold(t, cfg.target_fdrs.front());
            std::vector<std::string> ids;
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                if (r.accepted[i] && t.rows[i].label == 1)
                    ids.push_back(t.rows[i].id);
            return ids;
        };
        const auto ids_a = accepted_ids(tables[0]);
        const auto ids_b = accepted_ids(tables[1]);
        std::vector<std::string> ids_c;
        OverlapCounts counts;
        if (tables.size() == 3) {
            ids_c = accepted_ids(tables[2]);
            counts = overlap(ids_a, ids_b, &ids_c);
        } else {
            counts = overlap(ids_a, ids_b);
        }
        const fs::path overlap_path = dir / "overlap.tsv";
        std::ofstream out(overlap_path);
        out << "set\tcount\n";
        out << "a\t" << counts.a << "\nb\t" << counts.b << '\n';
        if (counts.has_c) out << "c\t" << counts.c << '\n';
        out << "ab\t" << counts.ab << '\n';
        if (counts.has_c)
            out << "ac\t" << counts.ac << "\nbc\t" << counts.bc << "\nabc\t"
                << counts.abc << '\n';
        out.close();
        manifest.add_output(overlap_path);
    }

    manifest.set_timing("total", total.seconds());
    manifest.write(dir / "manifest.json");
    std::cout << "accepted " << reporting.accepted_targets << " targets at FDR "
              << cfg.target_fdrs.front() << " (est. " << reporting.estimated_fdr
              << ")\n";
    return kExitOk;
}

int cmd_bench(const CommonFlags& flags, int trials_flag) {
    RunConfig cfg = flags.resolve();
    if (trials_flag > 0) cfg.bench_trials = trials_flag;
    const fs::path dir = ensure_out_dir(cfg);
    Timer total;

    double load_s = 0.0;
    Dataset base = load_input(cfg, &load_s);

    RunManifest manifest("bench", cfg);
    manifest.set_timing("load", load_s);

    const std::pair<SolverKind, const char*> solvers[] = {
        {SolverKind::online, "online"}, {SolverKind::batch, "batch"}};
    for (const auto& [kind, name] : solvers) {
        StabilityOptions opt;
        opt.solver = kind;
        opt.batch = cfg.batch;
        opt.online = cfg.online;
        opt.train_parts = cfg.train_parts;
        opt.test_parts = cfg.test_parts;
        opt.target_fdr = cfg.target_fdrs.front();
        opt.base_seed = cfg.seed;
        const StabilityReport report =
            stability_trials(base, cfg.model, opt, cfg.bench_trials);

        const fs::path stab_path =
            dir / (std::string("stability_") + name + ".tsv");
        std::ofstream out(stab_path);
        out << "trial\tseed\taccepted_total\n";
        for (const auto& t : report.trials)
            out << t.trial << '\t' << t.seed << '\t' << t.accepted_total << '\n';
        out.close();
        manifest.add_output(stab_path);

        const fs::path time_path = dir / (std::string("timing_") + name + ".tsv");
        std::ofstream tout(time_path);
        tout << "trial\tseed\ttrain_seconds\n";
        for (const auto& t : report.trials)
            tout << t.trial << '\t' << t.seed << '\t'
                 << format_double(t.train_seconds) << '\n';
        tout.close();
        manifest.add_output(time_path);

        manifest.set_number(std::string(name) + "_mean_accepted", report.mean);
        manifest.set_number(std::string(name) + "_min_accepted",
                            static_cast<double>(report.min));
        manifest.set_number(std::string(name) + "_max_accepted",
                            static_cast<double>(report.max));
        std::cout << name << ": mean accepted " << report.mean << " (min "
                  << report.min << ", max " << report.max << ") over "
                  << report.trials.size() << " trials\n";
    }

    if (cfg.subset_mode) {
        // Subset-averaging protocol: train on fixed-size random subsets of
        // the training split and average the per-PSM scores.
        manifest.set_flag("subset_mode", true);
        manifest.set_number("subset_size", static_cast<double>(cfg.subset_size));
        manifest.set_number("subsets", static_cast<double>(cfg.subset_count));

        const std::vector<int> train = base.train_rows();
        if (static_cast<long>(train.size()) < cfg.subset_size)
            throw ConfigError("bench.subset_size exceeds the training split");
        std::vector<double> avg(base.size(), 0.0);
        std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
        for (int k = 0; k < cfg.subset_count; ++k) {
            std::vector<int> pool(train);
            for (std::size_t i = pool.size() - 1; i > 0; --i) {
                std::uniform_int_distribution<std::size_t> pick(0, i);
                std::swap(pool[i], pool[pick(rng)]);
            }
            pool.resize(static_cast<std::size_t>(cfg.subset_size));
            std::vector<PsmRecord> subset;
            subset.reserve(pool.size());
            for (int row : pool)
                subset.push_back(base.records()[static_cast<std::size_t>(row)]);
            Dataset sub(std::move(subset));
            sub = mark_all_train(std::move(sub));
            sub = normalize_and_weight(std::move(sub));
            BatchConfig bc = cfg.batch;
            bc.seed = cfg.seed + static_cast<std::uint64_t>(k);
            OnlineConfig oc = cfg.online;
            oc.seed = cfg.seed + static_cast<std::uint64_t>(k);
            const TrainOutcome run =
                train_with(sub, cfg.model, cfg.solver, bc, oc);
            Dataset scored = base;
            scored.apply_normalization(run.model.feature_means,
                                       run.model.feature_stds,
                                       run.model.feature_weights);
            const ScoreTable t = score_all(scored, run.model.discriminant());
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                avg[i] += t.rows[i].score / cfg.subset_count;
        }
        ScoreTable averaged = score_all(base, Discriminant{cfg.model.kernel});
        for (std::size_t i = 0; i < averaged.rows.size(); ++i)
            averaged.rows[i].score = avg[i];
        const fs::path avg_path = dir / "scores_subset_avg.tsv";
        write_scores(averaged, avg_path);
        manifest.add_output(avg_path);
    }

    manifest.set_timing("total", total.seconds());
    manifest.write(dir / "manifest.json");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cost-sensitive ramp-loss kernel ranker for PSM rescoring"};
    app.require_subcommand(1);

    CommonFlags synth_flags, train_flags, score_flags, eval_flags, bench_flags;
    std::string model_path, data_path;
    std::vector<std::string> score_paths;
    int trials_flag = 0;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_flags.attach(synth);
    CLI::App* train = app.add_subcommand("train", "train a model");
    train_flags.attach(train);
    CLI::App* score = app.add_subcommand("score", "score a dataset with a model");
    score_flags.attach(score);
    score->add_option("--model", model_path, "model TSV path")->required();
    score->add_option("--data", data_path, "dataset TSV path")->required();
    CLI::App* eval = app.add_subcommand("eval", "FDR/ROC reports from scores");
    eval_flags.attach(eval);
    eval->add_option("--scores", score_paths, "score TSV file(s), up to three");
    CLI::App* bench = app.add_subcommand("bench", "stability and timing trials");
    bench_flags.attach(bench);
    bench->add_option("--trials", trials_flag, "number of trials per solver")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_flags);
        if (train->parsed()) return cmd_train(train_flags);
        if (score->parsed()) return cmd_score(score_flags, model_path, data_path);
        if (eval->parsed()) return cmd_eval(eval_flags, score_paths);
        if (bench->parsed()) return cmd_bench(bench_flags, trials_flag);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitConfig;
}
