#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/rng.hpp"

namespace voiceprobe {

struct GmmModel {
    int k = 0;
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covariances;
    double log_likelihood = -std::numeric_limits<double>::infinity();
};

namespace detail {

struct GaussianEval {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm = 0.0;

    void set(const Eigen::MatrixXd& cov) {
        Eigen::MatrixXd c = cov;
        double jitter = 0.0;
        while (true) {
            llt.compute(c);
            if (llt.info() == Eigen::Success) break;
            jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
            c = cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
            if (jitter > 1.0) throw DegenerateError("gmm: covariance not positive definite");
        }
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < c.rows(); ++i) {
            log_det += 2.0 * std::log(llt.matrixL()(i, i));
        }
        log_norm = -0.5 * (static_cast<double>(c.rows()) * std::log(2.0 * dsp::kPi) + log_det);
    }

    double log_density(const Eigen::VectorXd& diff) const {
        const Eigen::VectorXd z = llt.matrixL().solve(diff);
        return log_norm - 0.5 * z.squaredNorm();
    }
};

inline double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

// EM fit of a k-component full-covariance Gaussian mixture. Each restart
// draws k-means++ initial means from its own derived seed; the best final
// log-likelihood wins. Diagonals are floored at 1e-6 so components cannot
// collapse onto single points.
inline GmmModel gmm_fit(const Eigen::MatrixXd& points, int k = 2, std::uint64_t seed = 0,
                        int restarts = 5) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (k < 1) throw RangeError("gmm_fit: k must be >= 1");
    if (n < 10 * k) throw InsufficientDataError("gmm_fit: need at least 10k points");

    bool spread = false;
    for (Eigen::Index j = 0; j < d && !spread; ++j) {
        const double lo = points.col(j).minCoeff();
        const double hi = points.col(j).maxCoeff();
        spread = hi - lo > 1e-12;
    }
    if (!spread) throw DegenerateError("gmm_fit: all points identical");

    const Eigen::RowVectorXd grand_mean = points.colwise().mean();
    Eigen::MatrixXd base_cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd diff = (points.row(i) - grand_mean).transpose();
        base_cov += diff * diff.transpose();
    }
    base_cov /= static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < d; ++i) base_cov(i, i) = std::max(base_cov(i, i), 1e-6);

    GmmModel best;
    for (int r = 0; r < restarts; ++r) {
        Rng rng(seed + static_cast<std::uint64_t>(r));

        // k-means++ seeding
        std::vector<Eigen::VectorXd> means;
        means.push_back(points.row(static_cast<Eigen::Index>(rng.below(
                                       static_cast<std::uint64_t>(n))))
                            .transpose());
        std::vector<double> dist2(static_cast<std::size_t>(n));
        while (static_cast<int>(means.size()) < k) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                double dmin = std::numeric_limits<double>::infinity();
                for (const auto& m : means) {
                    dmin = std::min(dmin, (points.row(i).transpose() - m).squaredNorm());
                }
                dist2[static_cast<std::size_t>(i)] = dmin;
                total += dmin;
            }
            double pick = rng.uniform01() * total;
            Eigen::Index chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                pick -= dist2[static_cast<std::size_t>(i)];
                if (pick <= 0.0) {
                    chosen = i;
                    break;
                }
            }
            means.push_back(points.row(chosen).transpose());
        }

        GmmModel model;
        model.k = k;
        model.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
        model.means = means;
        model.covariances.assign(static_cast<std::size_t>(k), base_cov);

        std::vector<detail::GaussianEval> eval(static_cast<std::size_t>(k));
        Eigen::MatrixXd resp(n, k);
        double ll_prev = -std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 500; ++iter) {
            for (int c = 0; c < k; ++c) {
                eval[static_cast<std::size_t>(c)].set(model.covariances[static_cast<std::size_t>(c)]);
            }
            double ll = 0.0;
            std::vector<double> logp(static_cast<std::size_t>(k));
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int c = 0; c < k; ++c) {
                    const Eigen::VectorXd diff =
                        points.row(i).transpose() - model.means[static_cast<std::size_t>(c)];
                    logp[static_cast<std::size_t>(c)] =
                        std::log(model.weights[static_cast<std::size_t>(c)]) +
                        eval[static_cast<std::size_t>(c)].log_density(diff);
                }
                const double norm = detail::log_sum_exp(logp);
                ll += norm;
                for (int c = 0; c < k; ++c) {
                    resp(i, c) = std::exp(logp[static_cast<std::size_t>(c)] - norm);
                }
            }
            // EM increases the likelihood; tiny slack for the covariance floor
            if (iter > 0 && ll < ll_prev - 1e-8 * (1.0 + std::abs(ll_prev))) {
                throw DegenerateError("gmm_fit: log-likelihood decreased");
            }
            model.log_likelihood = ll;
            if (iter > 0 && ll - ll_prev < 1e-7) break;
            ll_prev = ll;

            for (int c = 0; c < k; ++c) {
                const double nk = std::max(resp.col(c).sum(), 1e-12);
                model.weights[static_cast<std::size_t>(c)] = nk / static_cast<double>(n);
                Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
                for (Eigen::Index i = 0; i < n; ++i) mu += resp(i, c) * points.row(i).transpose();
                mu /= nk;
                Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Eigen::VectorXd diff = points.row(i).transpose() - mu;
                    cov += resp(i, c) * diff * diff.transpose();
                }
                cov /= nk;
                for (Eigen::Index j = 0; j < d; ++j) cov(j, j) = std::max(cov(j, j), 1e-6);
                model.means[static_cast<std::size_t>(c)] = mu;
                model.covariances[static_cast<std::size_t>(c)] = cov;
            }
            // responsibilities are normalized per point, so weights stay a simplex
            double wsum = 0.0;
            for (double w : model.weights) wsum += w;
            for (double& w : model.weights) w /= wsum;
        }
        if (model.log_likelihood > best.log_likelihood) best = model;
    }
    return best;
}

inline std::vector<int> gmm_assign(const GmmModel& model, const Eigen::MatrixXd& points) {
    std::vector<detail::GaussianEval> eval(static_cast<std::size_t>(model.k));
    for (int c = 0; c < model.k; ++c) {
        eval[static_cast<std::size_t>(c)].set(model.covariances[static_cast<std::size_t>(c)]);
    }
    std::vector<int> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < model.k; ++c) {
            const Eigen::VectorXd diff =
                points.row(i).transpose() - model.means[static_cast<std::size_t>(c)];
            const double lp = std::log(model.weights[static_cast<std::size_t>(c)]) +
                              eval[static_cast<std::size_t>(c)].log_density(diff);
            if (lp > best) {  // posterior ties resolve to the lower index
                best = lp;
                arg = c;
            }
        }
        out[static_cast<std::size_t>(i)] = arg;
    }
    return out;
}

struct RelabelResult {
    std::vector<int> assignments;               // cluster index per point
    std::array<std::string, 2> cluster_names;   // majority metadata label per cluster
    double agreement_percent = 0.0;             // metadata label == cluster name
    std::vector<std::string> relabeled;         // cluster-derived label per point
};

// Name each of the two mixture components by the majority metadata label of
// its members, then measure how many points' metadata labels agree with
// their component's name (the label-checking step of the gender analysis).
inline RelabelResult relabel_by_cluster(const GmmModel& model, const Eigen::MatrixXd& points,
                                        const std::vector<std::string>& metadata_labels) {
    if (model.k != 2) throw RangeError("relabel_by_cluster: needs a 2-component model");
    if (static_cast<Eigen::Index>(metadata_labels.size()) != points.rows()) {
        throw RangeError("relabel_by_cluster: label count mismatch");
    }
    RelabelResult result;
    result.assignments = gmm_assign(model, points);

    for (int c = 0; c < 2; ++c) {
        std::map<std::string, std::size_t> votes;
        for (std::size_t i = 0; i < metadata_labels.size(); ++i) {
            if (result.assignments[i] == c) ++votes[metadata_labels[i]];
        }
        if (votes.empty()) throw DegenerateError("relabel_by_cluster: empty cluster");
        std::string winner;
        std::size_t top = 0;
        bool tie = false;
        for (const auto& [label, count] : votes) {
            if (count > top) {
                winner = label;
                top = count;
                tie = false;
            } else if (count == top) {
                tie = true;
            }
        }
        if (tie) {
            throw TieError("relabel_by_cluster: tied majority vote in cluster " +
                           std::to_string(c) + " (both namings equally supported)");
        }
        result.cluster_names[static_cast<std::size_t>(c)] = winner;
    }

    std::size_t matches = 0;
    for (std::size_t i = 0; i < metadata_labels.size(); ++i) {
        const auto& name =
            result.cluster_names[static_cast<std::size_t>(result.assignments[i])];
        result.relabeled.push_back(name);
        if (metadata_labels[i] == name) ++matches;
    }
    result.agreement_percent =
        100.0 * static_cast<double>(matches) / static_cast<double>(metadata_labels.size());
    return result;
}

struct BimodalityScore {
    double ashman_d = 0.0;
    bool bimodal = false;
    GmmModel gmm;
};

// Mode-separation statistic of two Gaussian components.
inline double ashman_d(double mu1, double mu2, double var1, double var2) {
    return std::abs(mu1 - mu2) / std::sqrt(var1 + var2);
}

// Fit a 1-D 2-component mixture and score the separation of its modes:
// D = |mu1 - mu2| / sqrt(sigma1^2 + sigma2^2), bimodal when D > 2.
inline BimodalityScore bimodality_score(const std::vector<double>& values, std::uint64_t seed) {
    if (values.size() < 50) {
        throw InsufficientDataError("bimodality_score: need at least 50 values");
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        pts(static_cast<Eigen::Index>(i), 0) = values[i];
    }
    BimodalityScore score;
    score.gmm = gmm_fit(pts, 2, seed, 5);
    score.ashman_d = ashman_d(score.gmm.means[0](0), score.gmm.means[1](0),
                              score.gmm.covariances[0](0, 0), score.gmm.covariances[1](0, 0));
    score.bimodal = score.ashman_d > 2.0;
    return score;
}

}  // namespace voiceprobe
