#include "csranker/batch_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csranker/errors.hpp"

namespace csranker {

void BatchConfig::validate() const {
    if (!(tol_inner > 0.0)) throw ConfigError("batch tol_inner must be positive");
    if (max_outer <= 0) throw ConfigError("batch max_outer must be positive");
    if (max_inner_sweeps == 0)
        throw ConfigError("batch max_inner_sweeps must be positive (or <0 for 10n)");
    if (cache_rows == 0) throw ConfigError("batch cache_rows must be positive");
}

InnerQpResult solve_inner_qp(DualState& st, const BatchConfig& cfg,
                             KernelCache& cache, const FeatureMatrixView& x,
                             const KernelParams& kp, std::mt19937_64& rng) {
    const std::size_t n = st.size();
    InnerQpResult res;
    if (n == 0) {
        res.converged = true;
        return res;
    }
    const long max_sweeps = cfg.max_inner_sweeps > 0
                                ? cfg.max_inner_sweeps
                                : 10 * static_cast<long>(n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (res.sweeps = 0; res.sweeps < max_sweeps; ++res.sweeps) {
        for (std::size_t i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        double max_viol = 0.0;
        bool moved = false;
        for (std::size_t pos : order) {
            const double g = st.grad[pos];
            double viol = 0.0;
            if (st.alpha[pos] > st.lo[pos]) viol = std::max(viol, -g);
            if (st.alpha[pos] < st.hi[pos]) viol = std::max(viol, g);
            max_viol = std::max(max_viol, viol);
            if (viol <= cfg.tol_inner) continue;
            const double next = std::clamp(st.alpha[pos] + g / st.diag[pos],
                                           st.lo[pos], st.hi[pos]);
            const double delta = next - st.alpha[pos];
            if (delta == 0.0) continue;
            st.alpha[pos] = next;
            moved = true;
            const auto krow = cache.row(st.rows[pos], x, kp);
            double* gr = st.grad.data();
            const double* kr = krow.data();
            for (std::size_t s = 0; s < n; ++s) gr[s] -= delta * kr[s];
        }
        if (!moved) {
            res.converged = true;
            res.final_violation = max_viol;
            return res;
        }
    }
    res.final_violation = kkt_violation(st);
    res.converged = res.final_violation <= cfg.tol_inner;
    return res;
}

namespace {

DualState make_full_state(const std::vector<int>& train_rows, const Dataset& d,
                          const ModelParams& p) {
    DualState st;
    st.pos_of_row.assign(d.size(), -1);
    for (int row : train_rows) {
        const int label = d.records()[static_cast<std::size_t>(row)].label;
        const double k_self = kernel_value(
            d.weighted_row(static_cast<std::size_t>(row)),
            d.weighted_row(static_cast<std::size_t>(row)), p.kernel);
        const int pos = st.append(row, label, k_self, p);
        st.grad[static_cast<std::size_t>(pos)] = label;  // alpha = 0
    }
    return st;
}

Discriminant state_discriminant(const Dataset& d, const ModelParams& p,
                                const DualState& st) {
    Discriminant f;
    f.kernel = p.kernel;
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        if (st.alpha[pos] == 0.0) continue;
        f.alpha.push_back(st.alpha[pos]);
        f.support_rows.push_back(st.rows[pos]);
        std::array<double, kFeatureCount> xv{};
        const auto wr = d.weighted_row(static_cast<std::size_t>(st.rows[pos]));
        std::copy(wr.begin(), wr.end(), xv.begin());
        f.support_x.push_back(xv);
    }
    return f;
}

}  // namespace

BatchResult cccp_solve(const Dataset& d, const ModelParams& p,
                       const BatchConfig& cfg) {
    p.validate();
    cfg.validate();
    const auto train_rows = d.train_rows();
    if (train_rows.empty()) throw DataError("training split is empty");

    DualState st = make_full_state(train_rows, d, p);
    FeatureMatrixView x{d.weighted_matrix().data(), d.size(), kFeatureCount};
    KernelCache cache(cfg.cache_rows);
    cache.set_index_set(st.rows);
    std::mt19937_64 rng(cfg.seed);

    BatchResult res;
    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        const InnerQpResult inner = solve_inner_qp(st, cfg, cache, x, p.kernel, rng);
        res.outer_iterations = outer + 1;
        res.final_violation = inner.final_violation;

        const std::vector<int> flipped = update_eta(st, p, 0, false);
        st.pending_resets.clear();

        BatchOuterTrace tr;
        tr.eta_flips = static_cast<int>(flipped.size());
        tr.inner_sweeps = inner.sweeps;
        tr.inner_converged = inner.converged;
        if (cfg.track_primal)
            tr.primal = primal_objective(d, state_discriminant(d, p, st), p);
        res.trace.push_back(tr);

        if (flipped.empty()) {
            res.converged = true;
            break;
        }
        // Flipped coordinates are infeasible for the shifted box; restart
        // them at zero (always feasible) and patch the gradients.
        for (int pos : flipped) {
            const auto upos = static_cast<std::size_t>(pos);
            const double a = st.alpha[upos];
            if (a == 0.0) continue;
            st.alpha[upos] = 0.0;
            const auto krow = cache.row(st.rows[upos], x, p.kernel);
            for (std::size_t s = 0; s < st.size(); ++s)
                st.grad[s] += a * krow[s];
        }
    }

    res.model = make_trained_model(d, p, st);
    res.kernel_rows = cache.rows_computed();
    res.kernel_values = cache.values_computed();
    return res;
}

void brute_qp_oracle(DualState& st, const FeatureMatrixView& x,
                     const KernelParams& kp, long max_iters, double step_tol) {
    const std::size_t n = st.size();
    if (n == 0) return;
    if (n > 200) throw ConfigError("brute_qp_oracle expects n <= 200");

    // Dense Gram.
    std::vector<double> K(n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            K[a * n + b] = kernel_value(
                x.row(static_cast<std::size_t>(st.rows[a])),
                x.row(static_cast<std::size_t>(st.rows[b])), kp);

    double trace = 0.0;
    for (std::size_t a = 0; a < n; ++a) trace += K[a * n + a];
    const double step = 1.0 / trace;

    std::vector<double> g(n);
    for (long it = 0; it < max_iters; ++it) {
        for (std::size_t a = 0; a < n; ++a) {
            double dot = 0.0;
            for (std::size_t b = 0; b < n; ++b) dot += K[a * n + b] * st.alpha[b];
            g[a] = st.y[a] - dot;
        }
        double max_move = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            const double next =
                std::clamp(st.alpha[a] + step * g[a], st.lo[a], st.hi[a]);
            max_move = std::max(max_move, std::abs(next - st.alpha[a]));
            st.alpha[a] = next;
        }
        if (max_move <= step_tol) break;
    }
    for (std::size_t a = 0; a < n; ++a) {
        double dot = 0.0;
        for (std::size_t b = 0; b < n; ++b) dot += K[a * n + b] * st.alpha[b];
        st.grad[a] = st.y[a] - dot;
    }
}

}  // namespace csranker
