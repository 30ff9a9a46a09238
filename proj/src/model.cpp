#include "csranker/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csranker/errors.hpp"
#include "csranker/text_util.hpp"

namespace csranker {

void ModelParams::validate() const {
    if (!(c2 > 0.0)) throw ConfigError("model c2 must be positive");
    if (!(c1 >= c2)) throw ConfigError("model requires c1 >= c2 > 0");
    if (!(lambda > 0.0)) throw ConfigError("model lambda must be positive");
    if (!allow_negative_s && lambda > c2)
        throw ConfigError(
            "model lambda must lie in (0, c2] so the ramp shift s stays in "
            "[0, 1); pass allow_negative_s to lift this");
    kernel.validate();
}

double hinge(double t) { return std::max(0.0, 1.0 - t); }

double shifted_hinge(double t, double s) { return std::max(0.0, s - t); }

double ramp_loss(double t, double s) {
    return std::min(1.0 - s, std::max(0.0, 1.0 - t));
}

BoxBounds compute_bounds(int label, int eta, const ModelParams& p) {
    const double y = label;
    BoxBounds b;
    if (label == -1) {
        b.lo = std::min(0.0, p.c1 * y);
        b.hi = std::max(0.0, p.c1 * y);
    } else {
        b.lo = std::min(0.0, p.c2 * y) - p.c2 * eta * y;
        b.hi = std::max(0.0, p.c2 * y) - p.c2 * eta * y;
    }
    return b;
}

double Discriminant::evaluate(std::span<const double> x) const {
    double f = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j)
        f += alpha[j] * kernel_value(support_x[j], x, kernel);
    return f;
}

double Discriminant::squared_norm() const {
    double w2 = 0.0;
    for (std::size_t a = 0; a < alpha.size(); ++a)
        for (std::size_t b = 0; b < alpha.size(); ++b)
            w2 += alpha[a] * alpha[b] *
                  kernel_value(support_x[a], support_x[b], kernel);
    return w2;
}

int DualState::append(int row, int label, double k_self, const ModelParams& p) {
    const int pos = static_cast<int>(rows.size());
    rows.push_back(row);
    alpha.push_back(0.0);
    const BoxBounds b = compute_bounds(label, 0, p);
    lo.push_back(b.lo);
    hi.push_back(b.hi);
    grad.push_back(0.0);
    diag.push_back(k_self);
    y.push_back(static_cast<std::int8_t>(label));
    eta.push_back(0);
    if (row >= static_cast<int>(pos_of_row.size()))
        pos_of_row.resize(static_cast<std::size_t>(row) + 1, -1);
    pos_of_row[static_cast<std::size_t>(row)] = pos;
    ++version;
    return pos;
}

void DualState::remove_positions(const std::vector<int>& positions) {
    if (positions.empty()) return;
    // Swap-erase from the back so earlier positions stay valid.
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        const auto pos = static_cast<std::size_t>(*it);
        const auto last = rows.size() - 1;
        pos_of_row[static_cast<std::size_t>(rows[pos])] = -1;
        if (pos != last) {
            rows[pos] = rows[last];
            alpha[pos] = alpha[last];
            lo[pos] = lo[last];
            hi[pos] = hi[last];
            grad[pos] = grad[last];
            diag[pos] = diag[last];
            y[pos] = y[last];
            eta[pos] = eta[last];
            pos_of_row[static_cast<std::size_t>(rows[pos])] =
                static_cast<int>(pos);
        }
        rows.pop_back();
        alpha.pop_back();
        lo.pop_back();
        hi.pop_back();
        grad.pop_back();
        diag.pop_back();
        y.pop_back();
        eta.pop_back();
    }
    ++version;
}

double discriminant_value_at(const DualState& st, int pos) {
    return st.y[static_cast<std::size_t>(pos)] -
           st.grad[static_cast<std::size_t>(pos)];
}

std::vector<int> update_eta(DualState& st, const ModelParams& p,
                            std::size_t min_active, bool online) {
    const double s = p.ramp_s();
    const bool big_enough = !online || st.size() > min_active;
    std::vector<int> flipped;
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        if (st.y[pos] != 1) continue;
        const double margin = st.y[pos] * discriminant_value_at(
                                              st, static_cast<int>(pos));
        const std::uint8_t want = (big_enough && margin < s) ? 1 : 0;
        if (want == st.eta[pos]) continue;
        st.eta[pos] = want;
        const BoxBounds b = compute_bounds(1, want, p);
        st.lo[pos] = b.lo;
        st.hi[pos] = b.hi;
        flipped.push_back(static_cast<int>(pos));
        st.pending_resets.push_back(static_cast<int>(pos));
    }
    return flipped;
}

ExtremePair select_extremes(const DualState& st) {
    ExtremePair e;
    double gmin = 0.0, gmax = 0.0;
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        const double g = st.grad[pos];
        if (st.alpha[pos] > st.lo[pos] && (e.i_pos < 0 || g < gmin)) {
            gmin = g;
            e.i_pos = static_cast<int>(pos);
        }
        if (st.alpha[pos] < st.hi[pos] && (e.j_pos < 0 || g > gmax)) {
            gmax = g;
            e.j_pos = static_cast<int>(pos);
        }
    }
    double v = 0.0;
    if (e.i_pos >= 0) v = std::max(v, -gmin);
    if (e.j_pos >= 0) v = std::max(v, gmax);
    e.violation = v;
    return e;
}

double kkt_violation(const DualState& st) { return select_extremes(st).violation; }

double dual_objective(const DualState& st, const ModelParams& p,
                      const FeatureMatrixView& x) {
    const double s = p.ramp_s();
    double quad = 0.0, lin = 0.0, cst = 0.0;
    for (std::size_t a = 0; a < st.size(); ++a) {
        if (st.alpha[a] != 0.0) {
            const auto xa = x.row(static_cast<std::size_t>(st.rows[a]));
            for (std::size_t b = 0; b < st.size(); ++b) {
                if (st.alpha[b] == 0.0) continue;
                quad += st.alpha[a] * st.alpha[b] *
                        kernel_value(xa,
                                     x.row(static_cast<std::size_t>(st.rows[b])),
                                     p.kernel);
            }
        }
        lin += st.alpha[a] * st.y[a];
        if (st.y[a] == 1 && st.eta[a]) cst += p.c2 * s;
    }
    return -0.5 * quad + lin + cst;
}

double primal_objective(const Dataset& d, const Discriminant& f,
                        const ModelParams& p) {
    const double s = p.ramp_s();
    double loss = 0.0;
    const bool split = d.has_split();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (split && d.split_of(i) != Split::train) continue;
        const double fx = f.evaluate(d.weighted_row(i));
        const int label = d.records()[i].label;
        if (label == -1)
            loss += p.c1 * hinge(label * fx);
        else
            loss += p.c2 * ramp_loss(label * fx, s);
    }
    return 0.5 * f.squared_norm() + loss;
}

Discriminant TrainedModel::discriminant() const {
    Discriminant f;
    f.kernel = params.kernel;
    f.alpha = alpha;
    f.support_rows = support_rows;
    f.support_x.resize(support_raw.size());
    for (std::size_t j = 0; j < support_raw.size(); ++j)
        for (int q = 0; q < kFeatureCount; ++q) {
            const auto uq = static_cast<std::size_t>(q);
            f.support_x[j][uq] = feature_weights[uq] *
                                 (support_raw[j][uq] - feature_means[uq]) /
                                 feature_stds[uq];
        }
    return f;
}

TrainedModel make_trained_model(const Dataset& d, const ModelParams& p,
                                const DualState& st) {
    TrainedModel m;
    m.params = p;
    m.feature_means = d.feature_means();
    m.feature_stds = d.feature_stds();
    m.feature_weights = d.feature_weights();
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        if (st.alpha[pos] == 0.0) continue;
        m.support_rows.push_back(st.rows[pos]);
        m.alpha.push_back(st.alpha[pos]);
        m.support_raw.push_back(
            d.records()[static_cast<std::size_t>(st.rows[pos])].features);
    }
    return m;
}

namespace {
constexpr const char* kModelMagic = "# csranker-model v1";

void write_stat_line(std::ofstream& out, const char* key,
                     const std::array<double, kFeatureCount>& v) {
    out << "# " << key;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
}
}  // namespace

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << kModelMagic << '\n';
    out << "# sigma " << format_double(m.params.kernel.sigma) << '\n';
    out << "# c1 " << format_double(m.params.c1) << '\n';
    out << "# c2 " << format_double(m.params.c2) << '\n';
    out << "# lambda " << format_double(m.params.lambda) << '\n';
    write_stat_line(out, "feature_means", m.feature_means);
    write_stat_line(out, "feature_stds", m.feature_stds);
    write_stat_line(out, "feature_weights", m.feature_weights);
    out << "index\talpha";
    for (const auto& f : feature_names()) out << '\t' << f;
    out << '\n';
    for (std::size_t j = 0; j < m.alpha.size(); ++j) {
        out << m.support_rows[j] << '\t' << format_double(m.alpha[j]);
        for (double v : m.support_raw[j]) out << '\t' << format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kModelMagic)
        throw DataError("not a csranker model file: " + path.string());

    TrainedModel m;
    bool have_sigma = false, have_c1 = false, have_c2 = false,
         have_lambda = false, have_means = false, have_stds = false,
         have_weights = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] != '#') break;  // column header reached
        std::istringstream ss(line.substr(1));
        std::string key;
        ss >> key;
        auto read_stats = [&](std::array<double, kFeatureCount>& v) {
            for (auto& x : v) {
                std::string tok;
                if (!(ss >> tok))
                    throw DataError("model line " + std::to_string(line_no) +
                                    ": expected " +
                                    std::to_string(kFeatureCount) + " values");
                x = parse_double(tok, key);
            }
        };
        std::string tok;
        if (key == "sigma") {
            ss >> tok;
            m.params.kernel.sigma = parse_double(tok, key);
            have_sigma = true;
        } else if (key == "c1") {
            ss >> tok;
            m.params.c1 = parse_double(tok, key);
            have_c1 = true;
        } else if (key == "c2") {
            ss >> tok;
            m.params.c2 = parse_double(tok, key);
            have_c2 = true;
        } else if (key == "lambda") {
            ss >> tok;
            m.params.lambda = parse_double(tok, key);
            have_lambda = true;
        } else if (key == "feature_means") {
            read_stats(m.feature_means);
            have_means = true;
        } else if (key == "feature_stds") {
            read_stats(m.feature_stds);
            have_stds = true;
        } else if (key == "feature_weights") {
            read_stats(m.feature_weights);
            have_weights = true;
        } else {
            throw DataError("model line " + std::to_string(line_no) +
                            ": unknown header key '" + key + "'");
        }
    }
    if (!(have_sigma && have_c1 && have_c2 && have_lambda && have_means &&
          have_stds && have_weights))
        throw DataError("model file missing header entries: " + path.string());

    // `line` now holds the column header.
    {
        auto cells = split_tabs(line);
        if (cells.size() != 2 + kFeatureCount || cells[0] != "index" ||
            cells[1] != "alpha")
            throw DataError("model line " + std::to_string(line_no) +
                            ": bad column header");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != 2 + kFeatureCount)
            throw DataError("model line " + std::to_string(line_no) +
                            ": expected " + std::to_string(2 + kFeatureCount) +
                            " columns");
        m.support_rows.push_back(
            static_cast<int>(parse_long(cells[0], "support index")));
        m.alpha.push_back(parse_double(cells[1], "alpha"));
        std::array<double, kFeatureCount> raw{};
        for (int q = 0; q < kFeatureCount; ++q)
            raw[static_cast<std::size_t>(q)] = parse_double(
                cells[static_cast<std::size_t>(2 + q)], feature_names()[q]);
        m.support_raw.push_back(raw);
    }
    return m;
}

}  // namespace csranker
