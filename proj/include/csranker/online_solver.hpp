#pragma once

// Online active-set solver: one randomly chosen training PSM is inserted per
// round, followed by an eta/bounds refresh, PROCESS, a REPROCESS loop to the
// KKT tolerance, and periodic CLEAN eviction of non-support vectors.

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "csranker/model.hpp"

namespace csranker {

struct OnlineConfig {
    std::size_t min_active = 200;  // |S| must exceed this before eta activates
    double tau = 1e-3;             // REPROCESS KKT tolerance
    long clean_period = 500;       // insertions between CLEAN calls
    long clean_max_removed = 300;  // max non-support vectors removed per CLEAN
    long finishing_sweeps = -1;    // < 0: 10 * |S| at finish time
    int epochs = 1;
    // CLEAN ranks over-budget evictions by largest raw gradient; set this to
    // rank by |g| instead.
    bool clean_by_abs_gradient = false;
    std::uint64_t seed = 0;  // sample-order seed
    std::size_t cache_rows = 512;
    std::ostream* progress = nullptr;  // optional line-delimited round log

    void validate() const;
};

struct OnlineResult {
    TrainedModel model;
    double final_violation = 0.0;
    std::size_t final_active_size = 0;
    std::size_t support_count = 0;
    std::uint64_t rounds = 0;
    std::uint64_t reprocess_steps = 0;
    std::uint64_t kernel_rows = 0;
    std::uint64_t kernel_values = 0;
};

// One training session. The subroutines are public so tests can drive and
// fuzz them directly; run_online() composes them in algorithm order.
class OnlineSession {
  public:
    OnlineSession(const Dataset& d, const ModelParams& p, const OnlineConfig& cfg);

    // Lines 3-7 + PROCESS + REPROCESS loop + periodic CLEAN for one sample.
    void round(int dataset_row);

    // Insert a training row into S with alpha = 0 and a fresh gradient.
    // Returns its position (or the existing one on a repeat visit).
    int insert(int dataset_row);
    // Eta refresh over targets in S with the |S| > min_active guard.
    std::vector<int> refresh_eta();
    // Zeroes the new coordinate and every coordinate whose bounds changed,
    // restoring gradient consistency incrementally.
    void process(int i0_pos);
    // One direction search; returns true when the tau-KKT test passes
    // (exitFlag = 1) and false after taking a step.
    bool reprocess();
    // Evict up to clean_max_removed zero-alpha vectors (largest gradients
    // first when over budget).
    void clean();

    // Runs the finishing REPROCESS sweeps and assembles the result.
    OnlineResult finish();

    const DualState& state() const { return st_; }
    DualState& mutable_state() { return st_; }
    double kkt() const { return kkt_violation(st_); }
    std::uint64_t insertions() const { return insertions_; }

  private:
    std::span<const double> row_of(int pos);
    void log_round();

    const Dataset& d_;
    ModelParams p_;
    OnlineConfig cfg_;
    DualState st_;
    FeatureMatrixView x_;
    KernelCache cache_;
    std::uint64_t insertions_ = 0;
    std::uint64_t rounds_ = 0;
    std::uint64_t steps_ = 0;
};

OnlineResult run_online(const Dataset& d, const ModelParams& p,
                        const OnlineConfig& cfg);

}  // namespace csranker
