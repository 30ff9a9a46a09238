#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "csranker/errors.hpp"
#include "csranker/run_config.hpp"
#include "csranker/text_util.hpp"
#include "test_util.hpp"

using namespace csranker;
using csranker::testing::TempDir;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CSRANKER_CLI_PATH) + " " + args +
                            " > /dev/null 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config files parse with overrides and strict schema") {
    const std::string text =
        "# comment line\n"
        "synth.n_target = 120\n"
        "synth.n_decoy = 100   # inline comment\n"
        "synth.pi_correct = 0.3\n"
        "synth.separation = 6\n"
        "seed = 9\n"
        "model.c1 = 4\n"
        "model.c2 = 2\n"
        "model.lambda = 1\n"
        "solver = batch\n"
        "eval.fdr = 0.01, 0.05\n"
        "online.mu_safe = 0.5\n"
        "online.mu_safe_target = 0.25\n"
        "out = /tmp/somewhere\n";
    const RunConfig cfg = parse_config_text(text);
    CHECK(cfg.use_synth);
    CHECK(cfg.synth.n_target == 120);
    CHECK(cfg.synth.seed == 9);
    CHECK(cfg.model.c1 == 4.0);
    CHECK(cfg.solver == SolverKind::batch);
    REQUIRE(cfg.target_fdrs.size() == 2);
    CHECK(cfg.target_fdrs[1] == 0.05);
    CHECK(cfg.mu_safe == 0.5);  // accepted and carried, never consumed
    CHECK(cfg.online.seed == cfg.seed + 1);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config rejection names the offending line") {
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\nnot_a_key = 2\n"),
                         doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("model.c1 = abc\n"),
                         doctest::Contains("line 1"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\nseed = 2\n"),
                         doctest::Contains("duplicate"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("just some words\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("data = x\nsynth.n_target = 5\n"),
                    ConfigError);
}

TEST_CASE("fuzzed configs always fail structurally, never crash") {
    std::mt19937_64 rng(13);
    const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyz.=# _0123456789-\t\n";
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const std::size_t len = rng() % 200;
        for (std::size_t i = 0; i < len; ++i)
            text += alphabet[rng() % alphabet.size()];
        try {
            const RunConfig cfg = parse_config_text(text);
            cfg.validate();  // parsed fine; must validate or throw ConfigError
        } catch (const ConfigError&) {
            // structured rejection is the expected outcome
        }
    }
}

TEST_CASE("config round trip through write_config_file") {
    RunConfig cfg;
    cfg.use_synth = true;
    cfg.synth = {300, 250, 0.2, 5.0, 42};
    cfg.seed = 42;
    cfg.model.c1 = 3.0;
    cfg.model.c2 = 1.5;
    cfg.model.lambda = 0.75;
    cfg.target_fdrs = {0.02, 0.1};
    TempDir dir("cfg");
    write_config_file(cfg, dir.file("run.cfg"));
    const RunConfig back = parse_config_file(dir.file("run.cfg"));
    CHECK(back.synth.n_target == 300);
    CHECK(back.model.lambda == 0.75);
    CHECK(back.target_fdrs == cfg.target_fdrs);
    CHECK(back.seed == 42);
}

TEST_CASE("cli pipeline: synth, train, score, eval") {
    TempDir dir("pipeline");
    const auto cfg_path = dir.file("run.cfg");
    {
        std::ofstream out(cfg_path);
        out << "synth.n_target = 150\nsynth.n_decoy = 150\n"
            << "synth.pi_correct = 0.4\nsynth.separation = 6\n"
            << "seed = 3\nmodel.c1 = 2\nmodel.c2 = 1\nmodel.lambda = 0.5\n"
            << "online.min_active = 30\neval.fdr = 0.05,0.1\n";
    }
    const std::string base = "--config " + cfg_path.string();

    CHECK(run_cli("synth " + base + " --out " + dir.file("s").string()) == 0);
    CHECK(std::filesystem::exists(dir.file("s") / "dataset.tsv"));
    CHECK(std::filesystem::exists(dir.file("s") / "manifest.json"));

    CHECK(run_cli("train " + base + " --out " + dir.file("t").string() +
                  " --solver online") == 0);
    const auto model = dir.file("t") / "model.tsv";
    CHECK(std::filesystem::exists(model));

    CHECK(run_cli("score " + base + " --model " + model.string() + " --data " +
                  (dir.file("s") / "dataset.tsv").string() + " --out " +
                  dir.file("sc").string()) == 0);
    const auto scores = dir.file("sc") / "scores.tsv";
    CHECK(std::filesystem::exists(scores));

    CHECK(run_cli("eval " + base + " --scores " + scores.string() + " --out " +
                  dir.file("e").string()) == 0);
    CHECK(std::filesystem::exists(dir.file("e") / "fdr_report.tsv"));
    CHECK(std::filesystem::exists(dir.file("e") / "roc.tsv"));
    CHECK(std::filesystem::exists(dir.file("e") / "scores_accepted.tsv"));
    // synthetic provenance: oracle-truth roc emitted as well
    CHECK(std::filesystem::exists(dir.file("e") / "roc_oracle.tsv"));

    // overlap of a score file with itself is total
    CHECK(run_cli("eval " + base + " --scores " + scores.string() + " --scores " +
                  scores.string() + " --out " + dir.file("e2").string()) == 0);
    std::ifstream overlap_in(dir.file("e2") / "overlap.tsv");
    std::string line;
    long a = -1, ab = -2;
    while (std::getline(overlap_in, line)) {
        auto cells = split_tabs(line);
        if (cells[0] == "a") a = parse_long(cells[1], "a");
        if (cells[0] == "ab") ab = parse_long(cells[1], "ab");
    }
    CHECK(a == ab);
}

TEST_CASE("cli exit codes distinguish config and data failures") {
    TempDir dir("exitcodes");
    // unknown key -> config error
    std::ofstream(dir.file("bad.cfg")) << "bogus = 1\n";
    CHECK(run_cli("train --config " + dir.file("bad.cfg").string()) == 2);

    // missing data file -> data error, before any compute
    std::ofstream(dir.file("nodata.cfg")) << "data = /nonexistent/file.tsv\n";
    CHECK(run_cli("train --config " + dir.file("nodata.cfg").string()) == 3);

    // empty score data -> data error
    std::ofstream(dir.file("empty.tsv")) << "";
    CHECK(run_cli("score --model /nope --data " + dir.file("empty.tsv").string()) ==
          3);

    // synth without synth keys -> config error
    CHECK(run_cli("synth --out " + dir.file("x").string()) == 2);

    // usage errors map to the config exit code
    CHECK(run_cli("unknown-subcommand") == 2);
}

TEST_CASE("seed and fdr flags override config file values") {
    TempDir dir("flags");
    std::ofstream(dir.file("run.cfg"))
        << "synth.n_target = 60\nsynth.n_decoy = 60\n"
        << "synth.pi_correct = 0.4\nsynth.separation = 6\nseed = 1\n";
    const std::string base = "--config " + dir.file("run.cfg").string();
    REQUIRE(run_cli("synth " + base + " --out " + dir.file("a").string()) == 0);
    REQUIRE(run_cli("synth " + base + " --seed 99 --out " +
                    dir.file("b").string()) == 0);
    REQUIRE(run_cli("synth " + base + " --seed 99 --out " +
                    dir.file("c").string()) == 0);
    const auto digest = [&](const std::string& tag) {
        return fnv1a64_file(dir.file(tag) / "dataset.tsv");
    };
    CHECK(digest("a") != digest("b"));  // flag overrides the file seed
    CHECK(digest("b") == digest("c"));  // and stays deterministic

    // --fdr replaces the config list; a bad list is a config error
    REQUIRE(run_cli("eval " + base + " --fdr 1.5 --scores nowhere.tsv") == 2);
}

TEST_CASE("unconverged batch runs warn via the numeric exit code") {
    TempDir dir("unconverged");
    std::ofstream(dir.file("run.cfg"))
        << "synth.n_target = 120\nsynth.n_decoy = 120\n"
        << "synth.pi_correct = 0.3\nsynth.separation = 5\nseed = 2\n"
        << "model.c1 = 2\nmodel.c2 = 1\nmodel.lambda = 0.5\n"
        << "batch.max_outer = 1\nbatch.max_inner_sweeps = 1\n";
    CHECK(run_cli("train --config " + dir.file("run.cfg").string() +
                  " --solver batch --out " + dir.file("t").string()) == 4);
    // outputs still written
    CHECK(std::filesystem::exists(dir.file("t") / "model.tsv"));
    CHECK(std::filesystem::exists(dir.file("t") / "manifest.json"));
}

TEST_CASE("synth presets land in the manifest") {
    TempDir dir("preset");
    std::ofstream(dir.file("run.cfg"))
        << "synth.preset = hard\nsynth.n_target = 200\nsynth.n_decoy = 200\n"
        << "seed = 4\n";
    REQUIRE(run_cli("synth --config " + dir.file("run.cfg").string() +
                    " --out " + dir.file("s").string()) == 0);
    const std::string manifest =
        csranker::testing::read_file(dir.file("s") / "manifest.json");
    CHECK(manifest.find("\"synth.pi_correct\": \"0.065\"") != std::string::npos);
}

TEST_CASE("manifests list every output with a digest") {
    TempDir dir("completeness");
    std::ofstream(dir.file("run.cfg"))
        << "synth.n_target = 80\nsynth.n_decoy = 80\n"
        << "synth.pi_correct = 0.4\nsynth.separation = 6\nseed = 6\n"
        << "model.c1 = 2\nmodel.c2 = 1\nmodel.lambda = 0.5\n"
        << "online.min_active = 20\nlog.progress = true\n";
    REQUIRE(run_cli("train --config " + dir.file("run.cfg").string() +
                    " --out " + dir.file("t").string()) == 0);
    const std::string manifest =
        csranker::testing::read_file(dir.file("t") / "manifest.json");
    for (const auto& entry :
         std::filesystem::directory_iterator(dir.file("t"))) {
        const auto name = entry.path().filename().string();
        if (name == "manifest.json") continue;
        CAPTURE(name);
        CHECK(manifest.find("\"" + name + "\"") != std::string::npos);
        // recorded digest matches the file on disk
        CHECK(manifest.find(to_hex(fnv1a64_file(entry.path()))) !=
              std::string::npos);
    }
}

TEST_CASE("cli bench emits per-solver stability and timing tables") {
    TempDir dir("bench");
    const auto cfg_path = dir.file("run.cfg");
    {
        std::ofstream out(cfg_path);
        out << "synth.n_target = 90\nsynth.n_decoy = 90\n"
            << "synth.pi_correct = 0.5\nsynth.separation = 7\n"
            << "seed = 5\nmodel.c1 = 2\nmodel.c2 = 1\nmodel.lambda = 0.5\n"
            << "online.min_active = 20\nbench.trials = 2\n"
            << "bench.subset_mode = true\nbench.subset_size = 60\n"
            << "bench.subsets = 2\n";
    }
    CHECK(run_cli("bench --config " + cfg_path.string() + " --out " +
                  dir.file("b").string()) == 0);
    for (const char* name : {"stability_online.tsv", "stability_batch.tsv",
                             "timing_online.tsv", "timing_batch.tsv",
                             "scores_subset_avg.tsv"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(dir.file("b") / name));
    }
    // two trials -> header + 2 rows per solver
    std::ifstream stab(dir.file("b") / "stability_online.tsv");
    std::string line;
    int rows = 0;
    while (std::getline(stab, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);

    // manifest records the subset protocol
    std::ifstream manifest(dir.file("b") / "manifest.json");
    std::stringstream buf;
    buf << manifest.rdbuf();
    CHECK(buf.str().find("subset_size") != std::string::npos);
}
