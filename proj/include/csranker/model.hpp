#pragma once

// Cost-sensitive ramp-loss ranker core: parameters, loss functions, the dual
// state with eta-shifted box bounds shared by both solvers, objectives, and
// the kernel-expansion discriminant with its serialization.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "csranker/kernel.hpp"
#include "csranker/psm_dataset.hpp"

namespace csranker {

struct ModelParams {
    double c1 = 1.0;      // decoy loss weight
    double c2 = 1.0;      // target loss weight
    double lambda = 0.5;  // selection weight
    KernelParams kernel;
    // Permits lambda > c2 (ramp shift s < 0); by default lambda is
    // restricted to (0, c2] so s stays in [0, 1).
    bool allow_negative_s = false;

    double ramp_s() const { return 1.0 - lambda / c2; }
    void validate() const;
};

double hinge(double t);                    // max(0, 1 - t)
double shifted_hinge(double t, double s);  // max(0, s - t)
double ramp_loss(double t, double s);      // min(1 - s, max(0, 1 - t))

struct BoxBounds {
    double lo = 0.0;
    double hi = 0.0;
};

// Decoys: [-c1, 0]. Targets: [0, c2] at eta=0, [-c2, 0] at eta=1. Zero is
// always feasible.
BoxBounds compute_bounds(int label, int eta, const ModelParams& p);

// Kernel expansion f(x) = sum_j alpha_j k(x_j, x), offset fixed at zero.
struct Discriminant {
    KernelParams kernel;
    std::vector<double> alpha;
    std::vector<int> support_rows;  // training row indices (provenance)
    std::vector<std::array<double, kFeatureCount>> support_x;  // weighted

    double evaluate(std::span<const double> x) const;
    double squared_norm() const;  // |w|^2 = sum alpha_i alpha_j k(x_i, x_j)
};

// Mutable dual state over an active index set S of dataset rows. Parallel
// arrays are indexed by position in S; `pos_of_row` maps dataset rows back
// (-1 when absent). Single-owner mutable.
struct DualState {
    std::vector<int> rows;
    std::vector<double> alpha;
    std::vector<double> lo, hi;
    std::vector<double> grad;           // g_i = y_i - sum_j alpha_j K_ij
    std::vector<double> diag;           // K_ii
    std::vector<std::int8_t> y;
    std::vector<std::uint8_t> eta;      // meaningful for targets; decoys 0
    std::vector<int> pos_of_row;
    std::vector<int> pending_resets;    // positions whose bounds changed
    std::uint64_t version = 0;          // bumped on any change to S

    std::size_t size() const { return rows.size(); }
    int position_of(int row) const {
        return row < static_cast<int>(pos_of_row.size()) ? pos_of_row[row] : -1;
    }

    // Appends a row with alpha = 0, eta = 0 bounds, gradient left unset.
    int append(int row, int label, double k_self, const ModelParams& p);
    // Swap-erase; positions must be sorted ascending and alpha zero there.
    void remove_positions(const std::vector<int>& positions);
};

// f(x_i) = y_i - g_i for every active position.
double discriminant_value_at(const DualState& st, int pos);

// Recomputes eta for target positions: eta = 1 iff y f(x) < s, with the
// additional |S| > min_active guard when `online` is set (otherwise eta is
// forced to 0). Updates bounds of flipped positions and records them in
// pending_resets. Returns the flipped positions.
std::vector<int> update_eta(DualState& st, const ModelParams& p,
                            std::size_t min_active, bool online);

// Largest movable-direction gradient magnitudes: i = argmin g over
// {alpha > lo}, j = argmax g over {alpha < hi}.
struct ExtremePair {
    int i_pos = -1;
    int j_pos = -1;
    double violation = 0.0;  // max(g_j, -g_i) over the existing extremes
};
ExtremePair select_extremes(const DualState& st);
double kkt_violation(const DualState& st);

// G(alpha) = -1/2 sum alpha_i alpha_j K_ij + <alpha, y> + sum C2 s eta_i,
// computed densely (test/diagnostic path).
double dual_objective(const DualState& st, const ModelParams& p,
                      const FeatureMatrixView& x);

// Eq-style training objective: 1/2 |w|^2 + C1 sum hinge over decoys +
// C2 sum ramp over targets, over the training split (all rows when no
// split is assigned).
double primal_objective(const Dataset& d, const Discriminant& f,
                        const ModelParams& p);

// A trained model plus everything needed to score new data without the
// training run: normalization statistics and the support vectors' raw
// features.
struct TrainedModel {
    ModelParams params;
    std::array<double, kFeatureCount> feature_means{};
    std::array<double, kFeatureCount> feature_stds{};
    std::array<double, kFeatureCount> feature_weights{};
    std::vector<int> support_rows;
    std::vector<double> alpha;
    std::vector<std::array<double, kFeatureCount>> support_raw;

    Discriminant discriminant() const;
};

TrainedModel make_trained_model(const Dataset& d, const ModelParams& p,
                                const DualState& st);

// Versioned TSV: a `#`-prefixed header block (sigma, c1, c2, lambda, feature
// statistics) followed by one `index alpha <raw features>` row per support
// vector.
void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace csranker
