#pragma once

// PSM feature tables: TSV ingestion, train/test splitting, z-score
// normalization with per-feature weights, and the synthetic generator used
// by the desk-scale experiments.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csranker {

inline constexpr int kFeatureCount = 9;

// SEQUEST-derived attribute names, in canonical column order.
const std::array<std::string, kFeatureCount>& feature_names();

// Weight 1.0 for xcorr and deltacn, 0.5 for the other seven.
const std::array<double, kFeatureCount>& default_feature_weights();

struct PsmRecord {
    std::string id;
    int label = 0;  // +1 target, -1 decoy
    std::array<double, kFeatureCount> features{};
    // Ground truth for synthetic data only; decoys carry false.
    std::optional<bool> oracle_correct;
};

enum class Split : std::uint8_t { train, test };

struct SynthSpec {
    long n_target = 0;
    long n_decoy = 0;
    double pi_correct = 0.0;  // fraction of targets from the correct-match component
    double separation = 0.0;  // distance between correct and incorrect class means
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
};

// Regimes calibrated to the identified-to-total target ratios seen on real
// search results: "normal" datasets identify >20% of targets, "hard" ones
// around 6.5%.
SynthSpec synth_preset(const std::string& name, long n_target, long n_decoy,
                       std::uint64_t seed);

// Immutable after construction by the free functions below. Normalization
// statistics always come from the training split (or are imposed from a
// stored model).
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::vector<PsmRecord> records);

    const std::vector<PsmRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    bool has_split() const { return has_split_; }
    Split split_of(std::size_t i) const;
    std::vector<int> train_rows() const;
    std::vector<int> test_rows() const;

    bool normalized() const { return normalized_; }
    const std::array<double, kFeatureCount>& feature_means() const;
    const std::array<double, kFeatureCount>& feature_stds() const;
    const std::array<double, kFeatureCount>& feature_weights() const;

    // weight_q * (raw_q - mean_q) / std_q for each feature q.
    std::span<const double> weighted_row(std::size_t i) const;
    const std::vector<double>& weighted_matrix() const;

    long target_count() const;
    long decoy_count() const;
    bool has_oracle() const;

    // Imposes stored statistics (model scoring path) instead of computing
    // them from the training split.
    void apply_normalization(const std::array<double, kFeatureCount>& means,
                             const std::array<double, kFeatureCount>& stds,
                             const std::array<double, kFeatureCount>& weights);

  private:
    friend Dataset split_train_test(Dataset d, int train_parts, int test_parts,
                                    std::uint64_t seed);
    friend Dataset mark_all_train(Dataset d);
    friend Dataset normalize_and_weight(
        Dataset d, const std::array<double, kFeatureCount>& weights);
    friend Dataset load_tsv(const std::filesystem::path& path);

    void rebuild_weighted();

    std::vector<PsmRecord> records_;
    std::vector<Split> split_;
    bool has_split_ = false;
    std::array<double, kFeatureCount> means_{};
    std::array<double, kFeatureCount> stds_{};
    std::array<double, kFeatureCount> weights_{};
    bool normalized_ = false;
    std::vector<double> weighted_;  // row-major, size() * kFeatureCount
};

// Tab-separated, header `id label <nine features>` in any column order,
// optional `split` and `oracle_correct` columns. Labels are the tokens
// `target` / `decoy`. Throws DataError with the offending line number.
Dataset load_tsv(const std::filesystem::path& path);

// Mirrors the input format; emits `split` / `oracle_correct` columns when
// the dataset carries them. Numbers are written in shortest round-trip form.
void write_tsv(const Dataset& d, const std::filesystem::path& path);

// Seeded Fisher-Yates shuffle; the first ceil(n * train/(train+test))
// records of the shuffled order become the training split.
Dataset split_train_test(Dataset d, int train_parts, int test_parts,
                         std::uint64_t seed);

// Degenerate split with every record in the training split (subset-training
// protocols).
Dataset mark_all_train(Dataset d);

// Population z-score per feature over the training split, then multiplied by
// the per-feature weight. Zero-variance columns get std 1.0.
Dataset normalize_and_weight(
    Dataset d,
    const std::array<double, kFeatureCount>& weights = default_feature_weights());

// Spherical unit-variance Gaussians; the correct-match component sits at
// +separation/2 on the first feature axis, the incorrect one (decoys and
// incorrect targets) at -separation/2. Deterministic for a fixed seed.
Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace csranker
