#include "csranker/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <unordered_set>

#include "csranker/errors.hpp"
#include "csranker/text_util.hpp"

namespace csranker {

bool ScoreTable::has_oracle() const {
    return !rows.empty() && rows.front().oracle_correct.has_value();
}

ScoreTable score_all(const Dataset& d, const Discriminant& f) {
    ScoreTable t;
    t.rows.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        ScoreRow r;
        const auto& rec = d.records()[i];
        r.id = rec.id;
        r.label = rec.label;
        r.split = d.split_of(i);
        r.score = (2.0 / std::numbers::pi) *
                  std::atan(f.evaluate(d.weighted_row(i)));
        r.oracle_correct = rec.oracle_correct;
        t.rows.push_back(std::move(r));
    }
    return t;
}

void write_scores(const ScoreTable& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write score file: " + path.string());
    const bool oracle = t.has_oracle();
    out << "id\tlabel\tsplit\tscore";
    if (oracle) out << "\toracle_correct";
    out << '\n';
    for (const auto& r : t.rows) {
        out << r.id << '\t' << (r.label == 1 ? "target" : "decoy") << '\t'
            << (r.split == Split::train ? "train" : "test") << '\t'
            << format_double(r.score);
        if (oracle) out << '\t' << (r.oracle_correct.value_or(false) ? "true" : "false");
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

ScoreTable load_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty score file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_tabs(line);
    const bool oracle = header.size() == 5 && header[4] == "oracle_correct";
    if (!(header.size() == 4 || oracle) || header[0] != "id" ||
        header[1] != "label" || header[2] != "split" || header[3] != "score")
        throw DataError("bad score file header: " + path.string());

    ScoreTable t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != header.size())
            throw DataError("score line " + std::to_string(line_no) +
                            ": wrong column count");
        ScoreRow r;
        r.id = std::string(cells[0]);
        if (cells[1] == "target")
            r.label = 1;
        else if (cells[1] == "decoy")
            r.label = -1;
        else
            throw DataError("score line " + std::to_string(line_no) +
                            ": bad label '" + std::string(cells[1]) + "'");
        if (cells[2] == "train")
            r.split = Split::train;
        else if (cells[2] == "test")
            r.split = Split::test;
        else
            throw DataError("score line " + std::to_string(line_no) +
                            ": bad split '" + std::string(cells[2]) + "'");
        r.score = parse_double(cells[3], "score on line " + std::to_string(line_no));
        if (oracle) r.oracle_correct = cells[4] == "true" || cells[4] == "1";
        t.rows.push_back(std::move(r));
    }
    return t;
}

FdrResult fdr_threshold(const ScoreTable& t, double target_fdr) {
    if (t.rows.empty()) throw DataError("fdr_threshold: empty score table");
    if (!(target_fdr >= 0.0 && target_fdr < 1.0))
        throw ConfigError("target_fdr must lie in [0, 1)");

    // Group by distinct score, descending; ties move together.
    std::vector<std::size_t> order(t.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return t.rows[a].score > t.rows[b].score;
    });

    struct Cut {
        double threshold;
        long targets;  // cumulative at or above
        long decoys;
        std::size_t end;  // one past the last sorted index of this group
    };
    std::vector<Cut> cuts;
    long targets = 0, decoys = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        const double score = t.rows[order[k]].score;
        while (k < order.size() && t.rows[order[k]].score == score) {
            (t.rows[order[k]].label == 1 ? targets : decoys) += 1;
            ++k;
        }
        cuts.push_back({score, targets, decoys, k});
    }

    // Monotonize: q(cut) = min raw ratio over this cut and all larger sets.
    std::vector<double> q(cuts.size());
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t c = cuts.size(); c-- > 0;) {
        const double raw = static_cast<double>(cuts[c].decoys) /
                           static_cast<double>(std::max(1L, cuts[c].targets));
        running = std::min(running, raw);
        q[c] = running;
    }

    FdrResult res;
    res.target_fdr = target_fdr;
    res.accepted.assign(t.rows.size(), 0);
    long best = -1;
    for (std::size_t c = 0; c < cuts.size(); ++c)
        if (q[c] <= target_fdr) best = static_cast<long>(c);

    if (best < 0) {
        res.attained = false;
        res.threshold = std::numeric_limits<double>::infinity();
        return res;
    }
    const Cut& chosen = cuts[static_cast<std::size_t>(best)];
    res.attained = true;
    res.threshold = chosen.threshold;
    res.accepted_targets = chosen.targets;
    res.accepted_decoys = chosen.decoys;
    res.estimated_fdr = static_cast<double>(chosen.decoys) /
                        static_cast<double>(std::max(1L, chosen.targets));
    for (std::size_t i = 0; i < chosen.end; ++i) {
        const auto& row = t.rows[order[i]];
        res.accepted[order[i]] = 1;
        if (row.label == 1) {
            if (row.split == Split::train)
                ++res.accepted_targets_train;
            else
                ++res.accepted_targets_test;
        }
    }
    return res;
}

namespace {

RocCurve roc_from_flags(const std::vector<double>& scores,
                        const std::vector<bool>& positive) {
    long pos = 0, neg = 0;
    for (bool p : positive) (p ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw DataError("roc_curve: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long tp = 0, fp = 0;
    std::size_t k = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    while (k < order.size()) {
        const double score = scores[order[k]];
        while (k < order.size() && scores[order[k]] == score) {
            (positive[order[k]] ? tp : fp) += 1;
            ++k;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        curve.points.push_back({score, fpr, tpr});
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

}  // namespace

RocCurve roc_curve(const ScoreTable& t) {
    std::vector<double> scores;
    std::vector<bool> positive;
    scores.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        scores.push_back(r.score);
        positive.push_back(r.label == 1);
    }
    return roc_from_flags(scores, positive);
}

RocCurve roc_curve_oracle(const ScoreTable& t) {
    if (!t.has_oracle())
        throw DataError("oracle ROC requires oracle_correct annotations");
    std::vector<double> scores;
    std::vector<bool> positive;
    for (const auto& r : t.rows) {
        scores.push_back(r.score);
        positive.push_back(r.oracle_correct.value_or(false));
    }
    return roc_from_flags(scores, positive);
}

void write_roc(const RocCurve& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write roc file: " + path.string());
    out << "threshold\tfpr\ttpr\n";
    for (const auto& p : c.points)
        out << format_double(p.threshold) << '\t' << format_double(p.fpr) << '\t'
            << format_double(p.tpr) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

std::optional<double> test_total_ratio(const FdrResult& r) {
    const long total = r.accepted_targets_train + r.accepted_targets_test;
    if (total == 0) return std::nullopt;
    return static_cast<double>(r.accepted_targets_test) /
           static_cast<double>(total);
}

OverlapCounts overlap(const std::vector<std::string>& a,
                      const std::vector<std::string>& b,
                      const std::vector<std::string>* c) {
    const std::unordered_set<std::string> sa(a.begin(), a.end());
    const std::unordered_set<std::string> sb(b.begin(), b.end());
    OverlapCounts out;
    out.a = static_cast<long>(sa.size());
    out.b = static_cast<long>(sb.size());
    for (const auto& id : sa) out.ab += sb.count(id) ? 1 : 0;
    if (c) {
        out.has_c = true;
        const std::unordered_set<std::string> sc(c->begin(), c->end());
        out.c = static_cast<long>(sc.size());
        for (const auto& id : sa) {
            const bool in_b = sb.count(id) > 0, in_c = sc.count(id) > 0;
            out.ac += in_c ? 1 : 0;
            out.abc += (in_b && in_c) ? 1 : 0;
        }
        for (const auto& id : sb) out.bc += sc.count(id) ? 1 : 0;
    }
    return out;
}

TrainOutcome train_with(const Dataset& d, const ModelParams& p, SolverKind kind,
                        const BatchConfig& batch_cfg,
                        const OnlineConfig& online_cfg) {
    TrainOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    if (kind == SolverKind::batch) {
        BatchResult r = cccp_solve(d, p, batch_cfg);
        out.model = std::move(r.model);
        out.converged = r.converged;
        out.final_violation = r.final_violation;
    } else {
        OnlineResult r = run_online(d, p, online_cfg);
        out.model = std::move(r.model);
        out.converged = true;
        out.final_violation = r.final_violation;
    }
    const auto t1 = std::chrono::steady_clock::now();
    out.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    return out;
}

StabilityReport stability_trials(const Dataset& d, const ModelParams& p,
                                 const StabilityOptions& opt, int trials) {
    if (trials < 1) throw ConfigError("stability_trials requires trials >= 1");
    StabilityReport report;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t seed = opt.base_seed + static_cast<std::uint64_t>(t);
        Dataset trial_data =
            normalize_and_weight(split_train_test(d, opt.train_parts,
                                                  opt.test_parts, seed));
        BatchConfig bc = opt.batch;
        bc.seed = seed;
        OnlineConfig oc = opt.online;
        oc.seed = seed;
        const TrainOutcome run = train_with(trial_data, p, opt.solver, bc, oc);
        const ScoreTable scores =
            score_all(trial_data, run.model.discriminant());
        const FdrResult fdr = fdr_threshold(scores, opt.target_fdr);
        StabilityTrial row;
        row.trial = t + 1;
        row.seed = seed;
        row.accepted_total = fdr.accepted_targets;
        row.train_seconds = run.train_seconds;
        report.trials.push_back(row);
    }
    double sum = 0.0;
    report.min = report.trials.front().accepted_total;
    report.max = report.min;
    for (const auto& row : report.trials) {
        sum += static_cast<double>(row.accepted_total);
        report.min = std::min(report.min, row.accepted_total);
        report.max = std::max(report.max, row.accepted_total);
    }
    report.mean = sum / static_cast<double>(report.trials.size());
    return report;
}

}  // namespace csranker
