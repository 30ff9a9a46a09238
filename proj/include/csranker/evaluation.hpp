#pragma once

// Scoring and target-decoy evaluation: arctan scores, q-value style FDR
// thresholding, ROC curves, test/total and overlap statistics, and the
// multi-trial stability harness.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csranker/batch_solver.hpp"
#include "csranker/model.hpp"
#include "csranker/online_solver.hpp"

namespace csranker {

struct ScoreRow {
    std::string id;
    int label = 0;
    Split split = Split::train;
    double score = 0.0;  // (2/pi) atan(f), strictly increasing in f
    std::optional<bool> oracle_correct;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    bool has_oracle() const;
};

ScoreTable score_all(const Dataset& d, const Discriminant& f);

// `id label split score [oracle_correct]` TSV.
void write_scores(const ScoreTable& t, const std::filesystem::path& path);
ScoreTable load_scores(const std::filesystem::path& path);

struct FdrResult {
    double target_fdr = 0.0;
    double threshold = 0.0;  // smallest accepted score
    long accepted_targets = 0;
    long accepted_decoys = 0;
    double estimated_fdr = 0.0;  // decoys / max(1, targets) at the threshold
    bool attained = false;       // false: no cutoff met the target, empty set
    long accepted_targets_train = 0;
    long accepted_targets_test = 0;
    std::vector<std::uint8_t> accepted;  // per score-table row
};

// Sweeps distinct score cutoffs descending and reports the largest accepted
// set whose monotonized (running-minimum, q-value style) decoy/target ratio
// stays at or below target_fdr. Tied scores are accepted or rejected
// together.
FdrResult fdr_threshold(const ScoreTable& t, double target_fdr);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // threshold descending, (0,0) to (1,1)
    double auc = 0.0;
};

// Negatives are decoys. Throws DataError on a single-class table.
RocCurve roc_curve(const ScoreTable& t);
// Synthetic data only: negatives are oracle-incorrect PSMs (decoys and
// incorrect targets).
RocCurve roc_curve_oracle(const ScoreTable& t);

void write_roc(const RocCurve& c, const std::filesystem::path& path);

// Accepted-on-test / accepted-total among targets; empty when nothing was
// accepted.
std::optional<double> test_total_ratio(const FdrResult& r);

struct OverlapCounts {
    long a = 0, b = 0, c = 0;
    long ab = 0, ac = 0, bc = 0;
    long abc = 0;
    bool has_c = false;
};

OverlapCounts overlap(const std::vector<std::string>& a,
                      const std::vector<std::string>& b,
                      const std::vector<std::string>* c = nullptr);

enum class SolverKind { online, batch };

// Trains with the chosen solver; returns the model plus solver diagnostics.
struct TrainOutcome {
    TrainedModel model;
    bool converged = true;          // batch: eta fixed point reached
    double final_violation = 0.0;
    double train_seconds = 0.0;     // solver call only
};

TrainOutcome train_with(const Dataset& d, const ModelParams& p,
                        SolverKind kind, const BatchConfig& batch_cfg,
                        const OnlineConfig& online_cfg);

struct StabilityTrial {
    int trial = 0;
    std::uint64_t seed = 0;
    long accepted_total = 0;
    double train_seconds = 0.0;
};

struct StabilityReport {
    std::vector<StabilityTrial> trials;
    double mean = 0.0;
    long min = 0;
    long max = 0;
};

struct StabilityOptions {
    SolverKind solver = SolverKind::online;
    BatchConfig batch;
    OnlineConfig online;
    int train_parts = 2;
    int test_parts = 1;
    double target_fdr = 0.05;
    std::uint64_t base_seed = 1;
};

// Independent seeded runs, each with a fresh split and sample order; reports
// the accepted-target dispersion used to spot bad local minima.
StabilityReport stability_trials(const Dataset& d, const ModelParams& p,
                                 const StabilityOptions& opt, int trials);

}  // namespace csranker
