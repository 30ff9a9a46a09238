#pragma once

// Batch solver: CCCP outer loop over an inner box-constrained dual QP solved
// by coordinate ascent, plus a projected-gradient brute-force oracle used as
// an independent reference in tests.

#include <cstdint>
#include <random>

#include "csranker/model.hpp"

namespace csranker {

struct BatchConfig {
    double tol_inner = 1e-3;      // KKT tolerance for the inner QP
    int max_outer = 20;           // CCCP iteration cap
    long max_inner_sweeps = -1;   // < 0: 10 * n
    std::uint64_t seed = 0;       // sweep permutation seed
    std::size_t cache_rows = 512;
    bool track_primal = false;    // record the per-outer primal objective

    void validate() const;
};

struct InnerQpResult {
    bool converged = false;
    long sweeps = 0;
    double final_violation = 0.0;
};

// Cyclic coordinate ascent on G(alpha) with a seeded random permutation per
// sweep: alpha_i <- clip(alpha_i + g_i / K_ii, [lo_i, hi_i]), gradients
// updated incrementally. Stops when no coordinate's violation exceeds
// tol_inner or the sweep cap is hit (soft "not converged" flag).
InnerQpResult solve_inner_qp(DualState& st, const BatchConfig& cfg,
                             KernelCache& cache, const FeatureMatrixView& x,
                             const KernelParams& kp, std::mt19937_64& rng);

struct BatchOuterTrace {
    double primal = 0.0;  // only when track_primal
    int eta_flips = 0;
    long inner_sweeps = 0;
    bool inner_converged = false;
};

struct BatchResult {
    TrainedModel model;
    bool converged = false;  // eta reached a fixed point within max_outer
    int outer_iterations = 0;
    double final_violation = 0.0;
    std::vector<BatchOuterTrace> trace;
    std::uint64_t kernel_rows = 0;
    std::uint64_t kernel_values = 0;
};

// Algorithm: initialize eta = 0; repeat { solve the QP, recompute eta from
// the margins, shift the bounds } until eta stops changing (a fixed point
// implies the alphas are already optimal for the final bounds).
BatchResult cccp_solve(const Dataset& d, const ModelParams& p,
                       const BatchConfig& cfg);

// Projected gradient ascent on G with fixed step 1/(trace bound), dense
// gradient recomputation each iteration. Reference solution for small
// problems (n <= 200); independent of the coordinate-ascent path.
void brute_qp_oracle(DualState& st, const FeatureMatrixView& x,
                     const KernelParams& kp, long max_iters = 200000,
                     double step_tol = 1e-13);

}  // namespace csranker
