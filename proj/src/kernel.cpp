#include "csranker/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "csranker/errors.hpp"

namespace csranker {

void KernelParams::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
}

double kernel_value(std::span<const double> a, std::span<const double> b,
                    const KernelParams& p) {
    double d2 = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        const double diff = a[q] - b[q];
        d2 += diff * diff;
    }
    return std::exp(-d2 / (2.0 * p.sigma * p.sigma));
}

KernelCache::KernelCache(std::size_t capacity_rows)
    : capacity_(std::max<std::size_t>(1, capacity_rows)) {}

void KernelCache::set_index_set(std::span<const int> ids) {
    if (ids.size() == ids_.size() &&
        std::equal(ids.begin(), ids.end(), ids_.begin()))
        return;
    ids_.assign(ids.begin(), ids.end());
    ++version_;
    map_.clear();
    lru_.clear();
}

void KernelCache::set_enabled(bool enabled) {
    enabled_ = enabled;
    if (!enabled_) {
        map_.clear();
        lru_.clear();
    }
}

void KernelCache::compute_row(int id, const FeatureMatrixView& x,
                              const KernelParams& p, std::vector<double>& out) {
    out.resize(ids_.size());
    const auto xi = x.row(static_cast<std::size_t>(id));
    const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
    const double* xd = xi.data();
    const std::size_t cols = x.cols;
    for (std::size_t s = 0; s < ids_.size(); ++s) {
        const double* xs = x.data + static_cast<std::size_t>(ids_[s]) * cols;
        double d2 = 0.0;
        for (std::size_t q = 0; q < cols; ++q) {
            const double diff = xd[q] - xs[q];
            d2 += diff * diff;
        }
        out[s] = std::exp(-d2 * inv);
    }
    ++rows_computed_;
    values_computed_ += ids_.size();
}

std::span<const double> KernelCache::row(int id, const FeatureMatrixView& x,
                                         const KernelParams& p) {
    if (!enabled_) {
        compute_row(id, x, p, scratch_);
        return scratch_;
    }
    if (auto it = map_.find(id); it != map_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.lru_it);
        return it->second.values;
    }
    if (map_.size() >= capacity_) {
        map_.erase(lru_.back());
        lru_.pop_back();
    }
    lru_.push_front(id);
    Entry e;
    e.lru_it = lru_.begin();
    compute_row(id, x, p, e.values);
    auto [it, inserted] = map_.emplace(id, std::move(e));
    (void)inserted;
    return it->second.values;
}

std::span<const double> kernel_row(int id, std::span<const int> S,
                                   KernelCache& cache,
                                   const FeatureMatrixView& x,
                                   const KernelParams& p) {
    cache.set_index_set(S);
    return cache.row(id, x, p);
}

}  // namespace csranker
