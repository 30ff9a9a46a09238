#include "csranker/online_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "csranker/errors.hpp"

namespace csranker {

void OnlineConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("online tau must be positive");
    if (clean_period < 1) throw ConfigError("online clean_period must be >= 1");
    if (clean_max_removed < 0)
        throw ConfigError("online clean_max_removed must be >= 0");
    if (epochs < 1) throw ConfigError("online epochs must be >= 1");
    if (cache_rows == 0) throw ConfigError("online cache_rows must be positive");
}

OnlineSession::OnlineSession(const Dataset& d, const ModelParams& p,
                             const OnlineConfig& cfg)
    : d_(d), p_(p), cfg_(cfg),
      x_{d.weighted_matrix().data(), d.size(), kFeatureCount},
      cache_(cfg.cache_rows) {
    p_.validate();
    cfg_.validate();
    st_.pos_of_row.assign(d.size(), -1);
}

std::span<const double> OnlineSession::row_of(int pos) {
    cache_.set_index_set(st_.rows);
    return cache_.row(st_.rows[static_cast<std::size_t>(pos)], x_, p_.kernel);
}

int OnlineSession::insert(int dataset_row) {
    if (int pos = st_.position_of(dataset_row); pos >= 0) return pos;
    const auto urow = static_cast<std::size_t>(dataset_row);
    const int label = d_.records()[urow].label;
    const double k_self =
        kernel_value(d_.weighted_row(urow), d_.weighted_row(urow), p_.kernel);
    const int pos = st_.append(dataset_row, label, k_self, p_);
    ++insertions_;
    // g = y - sum_s alpha_s k(x, x_s); the new coordinate itself contributes
    // nothing (alpha = 0).
    const auto krow = row_of(pos);
    double dot = 0.0;
    for (std::size_t s = 0; s < st_.size(); ++s) dot += st_.alpha[s] * krow[s];
    st_.grad[static_cast<std::size_t>(pos)] = label - dot;
    return pos;
}

std::vector<int> OnlineSession::refresh_eta() {
    return update_eta(st_, p_, cfg_.min_active, true);
}

void OnlineSession::process(int i0_pos) {
    if (i0_pos >= 0) st_.alpha[static_cast<std::size_t>(i0_pos)] = 0.0;
    // Remove the contributions of every reset coordinate from all gradients,
    // then recompute the reset gradients from scratch.
    for (int pos : st_.pending_resets) {
        const auto upos = static_cast<std::size_t>(pos);
        const double a = st_.alpha[upos];
        if (a == 0.0) continue;
        st_.alpha[upos] = 0.0;
        const auto krow = row_of(pos);
        for (std::size_t s = 0; s < st_.size(); ++s) st_.grad[s] += a * krow[s];
    }
    for (int pos : st_.pending_resets) {
        const auto upos = static_cast<std::size_t>(pos);
        const auto krow = row_of(pos);
        double dot = 0.0;
        for (std::size_t s = 0; s < st_.size(); ++s) dot += st_.alpha[s] * krow[s];
        st_.grad[upos] = st_.y[upos] - dot;
    }
    st_.pending_resets.clear();
}

bool OnlineSession::reprocess() {
    const ExtremePair e = select_extremes(st_);
    if (e.violation <= cfg_.tau) return true;  // exitFlag = 1

    // Direction choice: prefer i when its violation dominates.
    int t;
    double g;
    const double gi = e.i_pos >= 0 ? st_.grad[static_cast<std::size_t>(e.i_pos)]
                                   : 0.0;
    const double gj = e.j_pos >= 0 ? st_.grad[static_cast<std::size_t>(e.j_pos)]
                                   : 0.0;
    if (e.i_pos >= 0 &&
        (-gi > cfg_.tau && (e.j_pos < 0 || gj < cfg_.tau || -gi > gj))) {
        t = e.i_pos;
        g = gi;
    } else {
        t = e.j_pos;
        g = gj;
    }
    const auto ut = static_cast<std::size_t>(t);

    double step = g / st_.diag[ut];
    step = std::clamp(step, st_.lo[ut] - st_.alpha[ut],
                      st_.hi[ut] - st_.alpha[ut]);
    st_.alpha[ut] += step;
    const auto krow = row_of(t);
    double* gr = st_.grad.data();
    const double* kr = krow.data();
    const std::size_t n = st_.size();
    for (std::size_t s = 0; s < n; ++s) gr[s] -= step * kr[s];
    ++steps_;
    return false;
}

void OnlineSession::clean() {
    std::vector<int> victims;
    for (std::size_t pos = 0; pos < st_.size(); ++pos)
        if (st_.alpha[pos] == 0.0) victims.push_back(static_cast<int>(pos));

    const auto m = static_cast<std::size_t>(cfg_.clean_max_removed);
    if (victims.size() > m) {
        // Over budget: evict the m with the largest gradients.
        auto grade = [&](int pos) {
            const double g = st_.grad[static_cast<std::size_t>(pos)];
            return cfg_.clean_by_abs_gradient ? std::abs(g) : g;
        };
        std::stable_sort(victims.begin(), victims.end(),
                         [&](int a, int b) { return grade(a) > grade(b); });
        victims.resize(m);
        std::sort(victims.begin(), victims.end());
    }
    st_.remove_positions(victims);
}

void OnlineSession::round(int dataset_row) {
    ++rounds_;
    const bool fresh = st_.position_of(dataset_row) < 0;
    const int pos = insert(dataset_row);
    refresh_eta();
    process(fresh ? pos : -1);
    while (!reprocess()) {
    }
    if (fresh && cfg_.clean_max_removed > 0 &&
        insertions_ % static_cast<std::uint64_t>(cfg_.clean_period) == 0)
        clean();
    if (cfg_.progress) log_round();
}

void OnlineSession::log_round() {
    std::size_t n_eta = 0;
    for (std::size_t pos = 0; pos < st_.size(); ++pos) n_eta += st_.eta[pos];
    (*cfg_.progress) << rounds_ << '\t' << st_.size() << '\t' << n_eta << '\t'
                     << kkt_violation(st_) << '\t' << cache_.values_computed()
                     << '\n';
}

OnlineResult OnlineSession::finish() {
    const long budget = cfg_.finishing_sweeps >= 0
                            ? cfg_.finishing_sweeps
                            : 10 * static_cast<long>(st_.size());
    for (long k = 0; k < budget; ++k)
        if (reprocess()) break;

    OnlineResult res;
    res.model = make_trained_model(d_, p_, st_);
    res.final_violation = kkt_violation(st_);
    res.final_active_size = st_.size();
    res.support_count = res.model.alpha.size();
    res.rounds = rounds_;
    res.reprocess_steps = steps_;
    res.kernel_rows = cache_.rows_computed();
    res.kernel_values = cache_.values_computed();
    return res;
}

OnlineResult run_online(const Dataset& d, const ModelParams& p,
                        const OnlineConfig& cfg) {
    OnlineSession session(d, p, cfg);
    const std::vector<int> train = d.train_rows();
    if (train.empty()) throw DataError("training split is empty");

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(train);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        for (int row : order) session.round(row);
    }
    return session.finish();
}

}  // namespace csranker
