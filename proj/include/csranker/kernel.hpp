#pragma once

// Gaussian kernel on weighted feature vectors and an LRU cache of kernel
// rows against an active index set.

#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

namespace csranker {

struct KernelParams {
    double sigma = 1.0;
    void validate() const;  // sigma > 0
};

// Non-owning view of row-major feature rows.
struct FeatureMatrixView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const double> row(std::size_t i) const {
        return {data + i * cols, cols};
    }
};

// exp(-|a-b|^2 / (2 sigma^2)), in (0, 1].
double kernel_value(std::span<const double> a, std::span<const double> b,
                    const KernelParams& p);

// Caches kernel rows k(x_id, x_s) for s in the current index set. Rows are
// invalidated whenever the index set changes; eviction is least recently
// used. Single-writer; the solvers are single-threaded.
class KernelCache {
  public:
    explicit KernelCache(std::size_t capacity_rows = 512);

    // Replaces the active index set; bumps the version (staling all rows)
    // if it differs from the current one.
    void set_index_set(std::span<const int> ids);
    const std::vector<int>& index_set() const { return ids_; }
    std::uint64_t version() const { return version_; }

    // Row of kernel values for record `id` against the current index set,
    // aligned with the set's order. The span is valid until the next call.
    std::span<const double> row(int id, const FeatureMatrixView& x,
                                const KernelParams& p);

    void set_enabled(bool enabled);
    std::size_t capacity() const { return capacity_; }
    std::size_t cached_rows() const { return map_.size(); }
    std::uint64_t rows_computed() const { return rows_computed_; }
    std::uint64_t values_computed() const { return values_computed_; }

  private:
    void compute_row(int id, const FeatureMatrixView& x, const KernelParams& p,
                     std::vector<double>& out);

    struct Entry {
        std::vector<double> values;
        std::list<int>::iterator lru_it;
    };

    std::size_t capacity_;
    bool enabled_ = true;
    std::vector<int> ids_;
    std::uint64_t version_ = 0;
    std::unordered_map<int, Entry> map_;
    std::list<int> lru_;  // front = most recently used
    std::vector<double> scratch_;
    std::uint64_t rows_computed_ = 0;
    std::uint64_t values_computed_ = 0;
};

// Spec-shaped convenience: kernel row of `id` against S, routed through the
// cache (resets the cache's index set when S differs).
std::span<const double> kernel_row(int id, std::span<const int> S,
                                   KernelCache& cache,
                                   const FeatureMatrixView& x,
                                   const KernelParams& p);

}  // namespace csranker
