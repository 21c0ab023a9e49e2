#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/rng.hpp"

namespace voiceprobe {

struct OlsFit {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    double rss = 0.0;
};

// Least squares with intercept via column-pivoted QR.
inline OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (y.size() != n) throw RangeError("ols_fit: row count mismatch");
    if (n <= p + 1) throw DegenerateError("ols_fit: need more rows than parameters");

    Eigen::MatrixXd a(n, p + 1);
    a.col(0).setOnes();
    a.rightCols(p) = x;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < p + 1) throw SingularError("ols_fit: rank-deficient design matrix");
    const Eigen::VectorXd beta = qr.solve(y);

    OlsFit fit;
    fit.intercept = beta(0);
    fit.coefficients = beta.tail(p);
    fit.rss = (y - a * beta).squaredNorm();
    return fit;
}

// Upper-tail probability of the chi-square distribution with integer df,
// via the closed forms for half-integer shape (erfc plus a finite series).
inline double chi_square_upper_tail(double x, int df) {
    if (df < 1) throw RangeError("chi_square_upper_tail: df must be >= 1");
    if (x <= 0.0) return 1.0;
    const double half = 0.5 * x;
    double q, term;
    int k;
    if (df % 2 == 1) {
        q = std::erfc(std::sqrt(half));
        // first series term: (x/2)^(1/2) e^(-x/2) / Gamma(3/2)
        term = std::sqrt(half) * std::exp(-half) / (std::sqrt(dsp::kPi) / 2.0);
        k = 1;
    } else {
        q = std::exp(-half);
        term = half * std::exp(-half);
        k = 2;
    }
    for (; k + 2 <= df; k += 2) {
        q += term;
        term *= x / static_cast<double>(k + 2);
    }
    return std::clamp(q, 0.0, 1.0);
}

// Nested-model likelihood-ratio test for Gaussian models: the deviance
// statistic n ln(rss_small / rss_big) against chi-square with df_added
// degrees of freedom.
inline double lr_chisq_pvalue(double rss_small, double rss_big, std::size_t n,
                              int df_added = 1) {
    if (rss_small <= 0.0 || rss_big <= 0.0) {
        throw DegenerateError("lr_chisq_pvalue: non-positive rss");
    }
    if (rss_big > rss_small) throw RangeError("lr_chisq_pvalue: rss_big exceeds rss_small");
    if (n <= 2) throw RangeError("lr_chisq_pvalue: n too small");
    const double stat = static_cast<double>(n) * std::log(rss_small / rss_big);
    return chi_square_upper_tail(stat, df_added);
}

// Greedy forward-selection linear model.
struct LinearModel {
    std::vector<std::string> selected;     // greedy addition order
    std::vector<double> coefficients;      // matching `selected`
    double intercept = 0.0;
    double train_rmse = 0.0;
    double heldout_rmse = 0.0;
    double heldout_corr = 0.0;
    std::vector<double> heldout_rmse_path;  // intercept-only, then after each addition

    double predict(const std::vector<double>& row_by_selection_order) const {
        double y = intercept;
        for (std::size_t i = 0; i < coefficients.size(); ++i) {
            y += coefficients[i] * row_by_selection_order[i];
        }
        return y;
    }
};

struct GreedyConfig {
    double alpha = 0.05;
    double heldout_fraction = 0.2;
    std::uint64_t seed = 0;
};

// Deterministic seeded train/held-out split: the first floor(n * fraction)
// entries of a seeded permutation are held out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double fraction, std::uint64_t seed) {
    Rng rng(seed);
    const std::vector<std::size_t> perm = rng.permutation(n);
    const auto n_held = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
    std::vector<std::size_t> held(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_held));
    std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_held), perm.end());
    return {train, held};
}

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

inline Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

inline Eigen::MatrixXd take_cols(const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(cols[i]));
    }
    return out;
}

inline double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(truth.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

// Forward selection: repeatedly add the descriptor that most reduces the
// training RSS, stopping when the held-out RMSE no longer strictly improves
// or the chi-square likelihood-ratio test finds the addition insignificant.
// Ties in training RSS break toward the lower column index.
inline LinearModel greedy_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names,
                                 const GreedyConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    if (names.size() != p) throw RangeError("greedy_select: name count mismatch");
    if (n < 50) throw InsufficientDataError("greedy_select: need at least 50 rows");
    if (p < 1) throw RangeError("greedy_select: need at least one descriptor");

    const auto [train_idx, held_idx] = split_indices(n, cfg.heldout_fraction, cfg.seed);
    if (held_idx.empty() || train_idx.size() <= p + 1) {
        throw DegenerateError("greedy_select: degenerate train/held-out split");
    }
    const Eigen::MatrixXd x_train = detail::take_rows(x, train_idx);
    const Eigen::MatrixXd x_held = detail::take_rows(x, held_idx);
    const Eigen::VectorXd y_train = detail::take(y, train_idx);
    const Eigen::VectorXd y_held = detail::take(y, held_idx);
    const auto n_train = static_cast<std::size_t>(x_train.rows());

    const double y_mean = y_train.mean();
    double rss_cur = (y_train.array() - y_mean).matrix().squaredNorm();
    Eigen::VectorXd held_pred = Eigen::VectorXd::Constant(x_held.rows(), y_mean);
    double held_rmse_cur = detail::rmse(held_pred, y_held);

    LinearModel model;
    model.intercept = y_mean;
    model.heldout_rmse_path.push_back(held_rmse_cur);

    std::vector<std::size_t> selected_cols;
    OlsFit fit_cur;
    fit_cur.intercept = y_mean;
    fit_cur.rss = rss_cur;

    while (selected_cols.size() < p) {
        double best_rss = 0.0;
        std::size_t best_col = p;
        OlsFit best_fit;
        for (std::size_t j = 0; j < p; ++j) {
            if (std::find(selected_cols.begin(), selected_cols.end(), j) != selected_cols.end()) {
                continue;
            }
            std::vector<std::size_t> cols = selected_cols;
            cols.push_back(j);
            OlsFit fit;
            try {
                fit = ols_fit(detail::take_cols(x_train, cols), y_train);
            } catch (const SingularError&) {
                continue;  // collinear with the current selection
            }
            if (best_col == p || fit.rss < best_rss) {
                best_rss = fit.rss;
                best_col = j;
                best_fit = fit;
            }
        }
        if (best_col == p) break;  // nothing fittable

        std::vector<std::size_t> cols = selected_cols;
        cols.push_back(best_col);
        const Eigen::VectorXd pred =
            (detail::take_cols(x_held, cols) * best_fit.coefficients).array() +
            best_fit.intercept;
        const double held_rmse_new = detail::rmse(pred, y_held);

        if (!(held_rmse_new < held_rmse_cur)) break;
        const bool perfect = best_rss <= 1e-12 * std::max(1.0, rss_cur);
        if (!perfect && rss_cur > 0.0 &&
            lr_chisq_pvalue(rss_cur, best_rss, n_train, 1) >= cfg.alpha) {
            break;
        }
        if (rss_cur <= 0.0) break;

        selected_cols.push_back(best_col);
        fit_cur = best_fit;
        rss_cur = best_rss;
        held_pred = pred;
        held_rmse_cur = held_rmse_new;
        model.heldout_rmse_path.push_back(held_rmse_cur);
        if (perfect) break;
    }

    for (std::size_t i = 0; i < selected_cols.size(); ++i) {
        model.selected.push_back(names[selected_cols[i]]);
        model.coefficients.push_back(fit_cur.coefficients(static_cast<Eigen::Index>(i)));
    }
    model.intercept = selected_cols.empty() ? y_mean : fit_cur.intercept;
    model.train_rmse = std::sqrt(rss_cur / static_cast<double>(n_train));
    model.heldout_rmse = held_rmse_cur;
    model.heldout_corr = pearson(detail::to_std(held_pred), detail::to_std(y_held));
    return model;
}

struct SignRow {
    std::string descriptor;
    int sign_cluster_a = 0;  // +1 or -1
    int sign_cluster_b = 0;
};

struct GenderedComparison {
    LinearModel pooled;
    std::array<LinearModel, 2> per_cluster;
    double pooled_rmse = 0.0;
    double pooled_corr = 0.0;
    double gendered_rmse = 0.0;  // pooled over both clusters' held-out rows
    double gendered_corr = 0.0;
    std::vector<SignRow> sign_table;
};

// Pooled versus per-cluster greedy models, with a sign table for
// descriptors selected in both per-cluster models. Gendered
// RMSE/correlation pool the held-out predictions of the two cluster models.
inline GenderedComparison gendered_compare(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const std::vector<int>& cluster_labels,
                                           const std::vector<std::string>& names,
                                           const GreedyConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (cluster_labels.size() != n) throw RangeError("gendered_compare: label count mismatch");

    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = cluster_labels[i];
        if (c != 0 && c != 1) throw RangeError("gendered_compare: labels must be 0 or 1");
        members[static_cast<std::size_t>(c)].push_back(i);
    }
    for (const auto& m : members) {
        if (m.size() < 50) {
            throw InsufficientDataError("gendered_compare: cluster smaller than 50 members");
        }
    }

    GenderedComparison cmp;
    cmp.pooled = greedy_select(x, y, names, cfg);
    cmp.pooled_rmse = cmp.pooled.heldout_rmse;
    cmp.pooled_corr = cmp.pooled.heldout_corr;

    std::vector<double> union_pred, union_true;
    for (std::size_t c = 0; c < 2; ++c) {
        GreedyConfig sub = cfg;
        sub.seed = cfg.seed + c + 1;
        const Eigen::MatrixXd xc = detail::take_rows(x, members[c]);
        Eigen::VectorXd yc(static_cast<Eigen::Index>(members[c].size()));
        for (std::size_t i = 0; i < members[c].size(); ++i) {
            yc(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(members[c][i]));
        }
        cmp.per_cluster[c] = greedy_select(xc, yc, names, sub);

        // rebuild this cluster's held-out rows and predict with its model
        const auto [train_idx, held_idx] =
            split_indices(members[c].size(), sub.heldout_fraction, sub.seed);
        (void)train_idx;
        std::vector<std::size_t> sel_cols;
        for (const auto& name : cmp.per_cluster[c].selected) {
            for (std::size_t j = 0; j < names.size(); ++j) {
                if (names[j] == name) sel_cols.push_back(j);
            }
        }
        for (std::size_t i : held_idx) {
            std::vector<double> row;
            for (std::size_t j : sel_cols) {
                row.push_back(xc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            union_pred.push_back(cmp.per_cluster[c].predict(row));
            union_true.push_back(yc(static_cast<Eigen::Index>(i)));
        }
    }
    double se = 0.0;
    for (std::size_t i = 0; i < union_pred.size(); ++i) {
        se += (union_pred[i] - union_true[i]) * (union_pred[i] - union_true[i]);
    }
    cmp.gendered_rmse = std::sqrt(se / static_cast<double>(union_pred.size()));
    cmp.gendered_corr = pearson(union_pred, union_true);

    for (std::size_t i = 0; i < cmp.per_cluster[0].selected.size(); ++i) {
        const std::string& name = cmp.per_cluster[0].selected[i];
        for (std::size_t j = 0; j < cmp.per_cluster[1].selected.size(); ++j) {
            if (cmp.per_cluster[1].selected[j] != name) continue;
            SignRow row;
            row.descriptor = name;
            row.sign_cluster_a = cmp.per_cluster[0].coefficients[i] >= 0.0 ? 1 : -1;
            row.sign_cluster_b = cmp.per_cluster[1].coefficients[j] >= 0.0 ? 1 : -1;
            cmp.sign_table.push_back(row);
        }
    }
    return cmp;
}

struct AgeReport {
    std::vector<double> per_pc_r;  // Pearson r of each PC score column with age
    double heldout_r = 0.0;        // ridge prediction of age from embeddings
    std::size_t n_speakers = 0;
};

// Age analysis: correlation of each principal dimension with age, and a
// ridge regression (lambda on standardized inputs) from the embeddings to
// age evaluated on a seeded 80/20 split.
inline AgeReport age_report(const Eigen::MatrixXd& pc_scores, const Eigen::MatrixXd& embeddings,
                            const std::vector<double>& ages, std::uint64_t seed,
                            double lambda = 1.0) {
    const auto n = static_cast<std::size_t>(pc_scores.rows());
    if (ages.size() != n || static_cast<std::size_t>(embeddings.rows()) != n) {
        throw RangeError("age_report: row count mismatch");
    }
    if (n < 50) throw InsufficientDataError("age_report: need at least 50 aged speakers");
    if (sample_sd(ages) <= 0.0) throw DegenerateError("age_report: constant age column");

    AgeReport report;
    report.n_speakers = n;
    for (Eigen::Index c = 0; c < pc_scores.cols(); ++c) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = pc_scores(static_cast<Eigen::Index>(i), c);
        report.per_pc_r.push_back(pearson(col, ages));
    }

    const auto [train_idx, held_idx] = split_indices(n, 0.2, seed);
    const Eigen::MatrixXd x_train = detail::take_rows(embeddings, train_idx);
    const Eigen::MatrixXd x_held = detail::take_rows(embeddings, held_idx);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = ages[i];
    const Eigen::VectorXd y_train = detail::take(y, train_idx);
    const Eigen::VectorXd y_held = detail::take(y, held_idx);

    const Eigen::RowVectorXd mu = x_train.colwise().mean();
    Eigen::RowVectorXd sd(x_train.cols());
    for (Eigen::Index c = 0; c < x_train.cols(); ++c) {
        const double var = (x_train.col(c).array() - mu(c)).square().sum() /
                           static_cast<double>(x_train.rows() - 1);
        sd(c) = std::max(std::sqrt(var), 1e-12);
    }
    const Eigen::MatrixXd z_train =
        (x_train.rowwise() - mu).array().rowwise() / sd.array();
    const Eigen::MatrixXd z_held = (x_held.rowwise() - mu).array().rowwise() / sd.array();

    const double y_mean = y_train.mean();
    const Eigen::MatrixXd gram =
        z_train.transpose() * z_train +
        lambda * Eigen::MatrixXd::Identity(z_train.cols(), z_train.cols());
    const Eigen::VectorXd beta =
        gram.ldlt().solve(z_train.transpose() * (y_train.array() - y_mean).matrix());
    const Eigen::VectorXd pred = (z_held * beta).array() + y_mean;
    report.heldout_r = pearson(detail::to_std(pred), detail::to_std(y_held));
    return report;
}

}  // namespace voiceprobe
