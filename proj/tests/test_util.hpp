#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "csranker/psm_dataset.hpp"

namespace csranker::testing {

// Self-deleting scratch directory for file-based tests.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("csranker_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const {
        return path_ / name;
    }

  private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

// A ready-to-train dataset: synthetic, split 2:1, normalized.
inline Dataset make_training_data(const SynthSpec& spec, std::uint64_t split_seed) {
    return normalize_and_weight(
        split_train_test(generate_synthetic(spec), 2, 1, split_seed));
}

}  // namespace csranker::testing

#include "csranker/model.hpp"

namespace csranker::testing {

// Independent oracle: gradients recomputed densely from the definition
// g_i = y_i - sum_j alpha_j k(x_i, x_j).
inline std::vector<double> recompute_gradients(const DualState& st,
                                               const FeatureMatrixView& x,
                                               const KernelParams& p) {
    std::vector<double> g(st.size());
    for (std::size_t a = 0; a < st.size(); ++a) {
        double dot = 0.0;
        for (std::size_t b = 0; b < st.size(); ++b) {
            if (st.alpha[b] == 0.0) continue;
            dot += st.alpha[b] *
                   kernel_value(x.row(static_cast<std::size_t>(st.rows[a])),
                                x.row(static_cast<std::size_t>(st.rows[b])), p);
        }
        g[a] = st.y[a] - dot;
    }
    return g;
}

inline double max_gradient_drift(const DualState& st, const FeatureMatrixView& x,
                                 const KernelParams& p) {
    const auto fresh = recompute_gradients(st, x, p);
    double worst = 0.0;
    for (std::size_t i = 0; i < fresh.size(); ++i)
        worst = std::max(worst, std::abs(fresh[i] - st.grad[i]));
    return worst;
}

}  // namespace csranker::testing
