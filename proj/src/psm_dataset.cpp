#include "csranker/psm_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "csranker/errors.hpp"
#include "csranker/text_util.hpp"

namespace csranker {

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "xcorr", "deltacn", "sprank",  "ions",     "hit_mass",
        "enzN",  "enzC",    "numProt", "deltacnR"};
    return names;
}

const std::array<double, kFeatureCount>& default_feature_weights() {
    static const std::array<double, kFeatureCount> w = {1.0, 1.0, 0.5, 0.5, 0.5,
                                                        0.5, 0.5, 0.5, 0.5};
    return w;
}

void SynthSpec::validate() const {
    if (n_target <= 0 || n_decoy <= 0)
        throw ConfigError("synthetic spec: counts must be positive");
    if (!(pi_correct >= 0.0 && pi_correct <= 1.0))
        throw ConfigError("synthetic spec: pi_correct must lie in [0,1]");
    if (!(separation >= 0.0))
        throw ConfigError("synthetic spec: separation must be >= 0");
}

SynthSpec synth_preset(const std::string& name, long n_target, long n_decoy,
                       std::uint64_t seed) {
    SynthSpec s;
    s.n_target = n_target;
    s.n_decoy = n_decoy;
    s.seed = seed;
    if (name == "normal") {
        s.pi_correct = 0.35;
        s.separation = 8.0;
    } else if (name == "hard") {
        // Mirrors the 6.5% identified-to-total target ratio of the hardest
        // real search results.
        s.pi_correct = 0.065;
        s.separation = 8.0;
    } else {
        throw ConfigError("unknown synthetic preset '" + name +
                          "' (expected normal or hard)");
    }
    return s;
}

Dataset::Dataset(std::vector<PsmRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.label != 1 && r.label != -1)
            throw DataError("record " + r.id + ": label must be +1 or -1");
        for (double v : r.features)
            if (!std::isfinite(v))
                throw DataError("record " + r.id + ": non-finite feature value");
    }
}

Split Dataset::split_of(std::size_t i) const {
    if (!has_split_) throw DataError("dataset has no train/test split assigned");
    return split_[i];
}

std::vector<int> Dataset::train_rows() const {
    std::vector<int> out;
    if (!has_split_) throw DataError("dataset has no train/test split assigned");
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (split_[i] == Split::train) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> Dataset::test_rows() const {
    std::vector<int> out;
    if (!has_split_) throw DataError("dataset has no train/test split assigned");
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (split_[i] == Split::test) out.push_back(static_cast<int>(i));
    return out;
}

const std::array<double, kFeatureCount>& Dataset::feature_means() const {
    if (!normalized_) throw DataError("dataset is not normalized");
    return means_;
}

const std::array<double, kFeatureCount>& Dataset::feature_stds() const {
    if (!normalized_) throw DataError("dataset is not normalized");
    return stds_;
}

const std::array<double, kFeatureCount>& Dataset::feature_weights() const {
    if (!normalized_) throw DataError("dataset is not normalized");
    return weights_;
}

std::span<const double> Dataset::weighted_row(std::size_t i) const {
    if (!normalized_) throw DataError("dataset is not normalized");
    return {weighted_.data() + i * kFeatureCount, kFeatureCount};
}

const std::vector<double>& Dataset::weighted_matrix() const {
    if (!normalized_) throw DataError("dataset is not normalized");
    return weighted_;
}

long Dataset::target_count() const {
    long n = 0;
    for (const auto& r : records_) n += (r.label == 1);
    return n;
}

long Dataset::decoy_count() const {
    long n = 0;
    for (const auto& r : records_) n += (r.label == -1);
    return n;
}

bool Dataset::has_oracle() const {
    return !records_.empty() && records_.front().oracle_correct.has_value();
}

void Dataset::apply_normalization(
    const std::array<double, kFeatureCount>& means,
    const std::array<double, kFeatureCount>& stds,
    const std::array<double, kFeatureCount>& weights) {
    for (double s : stds)
        if (!(s > 0.0)) throw DataError("imposed feature stds must be positive");
    means_ = means;
    stds_ = stds;
    weights_ = weights;
    normalized_ = true;
    rebuild_weighted();
}

void Dataset::rebuild_weighted() {
    weighted_.assign(records_.size() * kFeatureCount, 0.0);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& f = records_[i].features;
        double* out = weighted_.data() + i * kFeatureCount;
        for (int q = 0; q < kFeatureCount; ++q)
            out[q] = weights_[q] * (f[q] - means_[q]) / stds_[q];
    }
}

namespace {

int parse_label(std::string_view tok, std::size_t line_no) {
    if (tok == "target") return 1;
    if (tok == "decoy") return -1;
    throw DataError("line " + std::to_string(line_no) +
                    ": unknown label token '" + std::string(tok) +
                    "' (expected target or decoy)");
}

bool parse_bool(std::string_view tok, std::size_t line_no,
                const std::string& column) {
    if (tok == "true" || tok == "1") return true;
    if (tok == "false" || tok == "0") return false;
    throw DataError("line " + std::to_string(line_no) + ": bad " + column +
                    " value '" + std::string(tok) + "'");
}

}  // namespace

Dataset load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty dataset file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_tabs(line);
    std::map<std::string, int, std::less<>> col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (col.count(std::string(header[c])))
            throw DataError("line 1: duplicate column '" + std::string(header[c]) +
                            "'");
        col.emplace(std::string(header[c]), static_cast<int>(c));
    }

    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end())
            throw DataError("line 1: missing column '" + name + "'");
        return it->second;
    };
    const int id_col = require("id");
    const int label_col = require("label");
    std::array<int, kFeatureCount> feat_col{};
    for (int q = 0; q < kFeatureCount; ++q) feat_col[q] = require(feature_names()[q]);

    int split_col = -1, oracle_col = -1;
    if (auto it = col.find("split"); it != col.end()) split_col = it->second;
    if (auto it = col.find("oracle_correct"); it != col.end())
        oracle_col = it->second;

    std::size_t known = 2 + kFeatureCount + (split_col >= 0) + (oracle_col >= 0);
    if (header.size() != known) {
        for (const auto& [name, c] : col) {
            (void)c;
            bool ok = name == "id" || name == "label" || name == "split" ||
                      name == "oracle_correct";
            for (const auto& f : feature_names()) ok = ok || name == f;
            if (!ok) throw DataError("line 1: unknown column '" + name + "'");
        }
    }

    std::vector<PsmRecord> records;
    std::vector<Split> splits;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()));
        PsmRecord r;
        r.id = std::string(cells[static_cast<std::size_t>(id_col)]);
        r.label = parse_label(cells[static_cast<std::size_t>(label_col)], line_no);
        for (int q = 0; q < kFeatureCount; ++q)
            r.features[static_cast<std::size_t>(q)] =
                parse_double(cells[static_cast<std::size_t>(feat_col[q])],
                             feature_names()[q] + " on line " +
                                 std::to_string(line_no));
        if (oracle_col >= 0)
            r.oracle_correct = parse_bool(
                cells[static_cast<std::size_t>(oracle_col)], line_no,
                "oracle_correct");
        if (split_col >= 0) {
            auto tok = cells[static_cast<std::size_t>(split_col)];
            if (tok == "train")
                splits.push_back(Split::train);
            else if (tok == "test")
                splits.push_back(Split::test);
            else
                throw DataError("line " + std::to_string(line_no) +
                                ": bad split value '" + std::string(tok) + "'");
        }
        records.push_back(std::move(r));
    }

    Dataset d(std::move(records));
    if (split_col >= 0) {
        d.split_ = std::move(splits);
        d.has_split_ = true;
    }
    return d;
}

void write_tsv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file: " + path.string());
    out << "id\tlabel";
    for (const auto& f : feature_names()) out << '\t' << f;
    const bool with_split = d.has_split();
    const bool with_oracle = d.has_oracle();
    if (with_split) out << "\tsplit";
    if (with_oracle) out << "\toracle_correct";
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d.records()[i];
        out << r.id << '\t' << (r.label == 1 ? "target" : "decoy");
        for (double v : r.features) out << '\t' << format_double(v);
        if (with_split)
            out << '\t' << (d.split_of(i) == Split::train ? "train" : "test");
        if (with_oracle)
            out << '\t' << (r.oracle_correct.value_or(false) ? "true" : "false");
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Dataset split_train_test(Dataset d, int train_parts, int test_parts,
                         std::uint64_t seed) {
    if (train_parts <= 0 || test_parts <= 0)
        throw ConfigError("split ratio parts must be positive");
    const std::size_t n = d.size();
    if (n < static_cast<std::size_t>(train_parts + test_parts))
        throw DataError("fewer records than split ratio parts");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
    }

    const double frac = static_cast<double>(train_parts) /
                        static_cast<double>(train_parts + test_parts);
    const auto train_count =
        static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n)));

    d.split_.assign(n, Split::test);
    for (std::size_t k = 0; k < train_count; ++k) d.split_[perm[k]] = Split::train;
    d.has_split_ = true;
    if (d.normalized_) d.normalized_ = false;  // stats belong to the old split
    return d;
}

Dataset mark_all_train(Dataset d) {
    d.split_.assign(d.size(), Split::train);
    d.has_split_ = true;
    d.normalized_ = false;
    return d;
}

Dataset normalize_and_weight(Dataset d,
                             const std::array<double, kFeatureCount>& weights) {
    if (!d.has_split_)
        throw DataError("normalize_and_weight requires an assigned split");

    std::array<double, kFeatureCount> mean{}, var{};
    std::size_t n_train = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.split_[i] != Split::train) continue;
        ++n_train;
        for (int q = 0; q < kFeatureCount; ++q)
            mean[static_cast<std::size_t>(q)] +=
                d.records_[i].features[static_cast<std::size_t>(q)];
    }
    if (n_train == 0) throw DataError("training split is empty");
    for (auto& m : mean) m /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.split_[i] != Split::train) continue;
        for (int q = 0; q < kFeatureCount; ++q) {
            double c = d.records_[i].features[static_cast<std::size_t>(q)] -
                       mean[static_cast<std::size_t>(q)];
            var[static_cast<std::size_t>(q)] += c * c;
        }
    }
    d.means_ = mean;
    for (int q = 0; q < kFeatureCount; ++q) {
        // Population convention (divide by n); constant columns fall back to
        // std 1.0 and center to zero.
        double s = std::sqrt(var[static_cast<std::size_t>(q)] /
                             static_cast<double>(n_train));
        d.stds_[static_cast<std::size_t>(q)] = s > 0.0 ? s : 1.0;
    }
    d.weights_ = weights;
    d.normalized_ = true;
    d.rebuild_weighted();
    return d;
}

Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double half = spec.separation / 2.0;

    const long n_correct = std::lround(spec.pi_correct * static_cast<double>(
                                                             spec.n_target));
    std::vector<PsmRecord> records;
    records.reserve(static_cast<std::size_t>(spec.n_target + spec.n_decoy));
    for (long t = 0; t < spec.n_target; ++t) {
        PsmRecord r;
        r.id = "t" + std::to_string(t + 1);
        r.label = 1;
        const bool correct = t < n_correct;
        r.features[0] = (correct ? half : -half) + unit(rng);
        for (int q = 1; q < kFeatureCount; ++q)
            r.features[static_cast<std::size_t>(q)] = unit(rng);
        r.oracle_correct = correct;
        records.push_back(std::move(r));
    }
    for (long t = 0; t < spec.n_decoy; ++t) {
        PsmRecord r;
        r.id = "d" + std::to_string(t + 1);
        r.label = -1;
        r.features[0] = -half + unit(rng);
        for (int q = 1; q < kFeatureCount; ++q)
            r.features[static_cast<std::size_t>(q)] = unit(rng);
        r.oracle_correct = false;
        records.push_back(std::move(r));
    }
    return Dataset(std::move(records));
}

}  // namespace csranker
