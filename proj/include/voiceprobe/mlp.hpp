#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "voiceprobe/embedding.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/rng.hpp"

namespace voiceprobe {

struct MlpConfig {
    std::vector<int> hidden = {32, 128};
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

// Fully connected regressor with rectifier hidden layers and an identity
// output, trained on squared error. Weight layout: weights[l] maps layer l
// activations (columns) to layer l+1 units (rows).
class MlpRegressor {
public:
    MlpRegressor(int inputs, const std::vector<int>& hidden, int outputs, std::uint64_t seed) {
        layer_sizes_.push_back(inputs);
        for (int h : hidden) layer_sizes_.push_back(h);
        layer_sizes_.push_back(outputs);
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
            const int fan_in = layer_sizes_[l];
            const int fan_out = layer_sizes_[l + 1];
            Eigen::MatrixXd w(fan_out, fan_in);
            const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (Eigen::Index i = 0; i < w.rows(); ++i) {
                for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
            }
            weights.push_back(std::move(w));
            biases.push_back(Eigen::VectorXd::Zero(fan_out));
        }
    }

    const std::vector<int>& layer_sizes() const { return layer_sizes_; }

    // rows of x are samples
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd a = x;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            a = (a * weights[l].transpose()).rowwise() + biases[l].transpose();
            if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
        }
        return a;
    }

    // loss = sum of squared errors / (2 * batch rows)
    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
        return (predict(x) - y).squaredNorm() / (2.0 * static_cast<double>(x.rows()));
    }

    struct Gradients {
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;
        double loss = 0.0;
    };

    Gradients gradients(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
        const std::size_t n_layers = weights.size();
        std::vector<Eigen::MatrixXd> acts;  // post-activation per layer
        acts.push_back(x);
        for (std::size_t l = 0; l < n_layers; ++l) {
            Eigen::MatrixXd z = (acts[l] * weights[l].transpose()).rowwise() + biases[l].transpose();
            if (l + 1 < n_layers) z = z.cwiseMax(0.0);
            acts.push_back(std::move(z));
        }
        const double inv_n = 1.0 / static_cast<double>(x.rows());

        Gradients g;
        g.w.resize(n_layers);
        g.b.resize(n_layers);
        g.loss = (acts.back() - y).squaredNorm() * 0.5 * inv_n;

        Eigen::MatrixXd delta = (acts.back() - y) * inv_n;  // d loss / d output
        for (std::size_t l = n_layers; l-- > 0;) {
            g.w[l] = delta.transpose() * acts[l];
            g.b[l] = delta.colwise().sum().transpose();
            if (l > 0) {
                delta = (delta * weights[l]).cwiseProduct(
                    (acts[l].array() > 0.0).cast<double>().matrix());
            }
        }
        return g;
    }

    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

private:
    std::vector<int> layer_sizes_;
};

// Mini-batch training with adaptive moment estimation. Deterministic given
// the seed: initialization and the per-epoch shuffles all draw from one
// seeded stream.
inline MlpRegressor mlp_train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              const MlpConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (x.rows() != y.rows()) throw RangeError("mlp_train: row count mismatch");
    if (n < 100) throw InsufficientDataError("mlp_train: need at least 100 rows");

    MlpRegressor net(static_cast<int>(x.cols()), cfg.hidden, static_cast<int>(y.cols()),
                     cfg.seed);
    Rng rng(cfg.seed + 1);

    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        mw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        vw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        mb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        vb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            Eigen::MatrixXd bx(static_cast<Eigen::Index>(stop - start), x.cols());
            Eigen::MatrixXd by(static_cast<Eigen::Index>(stop - start), y.cols());
            for (std::size_t i = start; i < stop; ++i) {
                bx.row(static_cast<Eigen::Index>(i - start)) =
                    x.row(static_cast<Eigen::Index>(order[i]));
                by.row(static_cast<Eigen::Index>(i - start)) =
                    y.row(static_cast<Eigen::Index>(order[i]));
            }
            const auto g = net.gradients(bx, by);
            if (!std::isfinite(g.loss)) {
                throw DivergenceError(
                    "mlp_train: non-finite loss; consider lowering learning_rate");
            }
            ++t;
            const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(t));
            const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(t));
            for (std::size_t l = 0; l < net.weights.size(); ++l) {
                mw[l] = beta1 * mw[l] + (1.0 - beta1) * g.w[l];
                vw[l] = beta2 * vw[l] + (1.0 - beta2) * g.w[l].cwiseProduct(g.w[l]);
                net.weights[l] -=
                    cfg.learning_rate *
                    (mw[l] / corr1)
                        .cwiseQuotient(((vw[l] / corr2).cwiseSqrt().array() + eps).matrix());
                mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.b[l];
                vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.b[l].cwiseProduct(g.b[l]);
                net.biases[l] -=
                    cfg.learning_rate *
                    (mb[l] / corr1)
                        .cwiseQuotient(((vb[l] / corr2).cwiseSqrt().array() + eps).matrix());
            }
        }
    }
    return net;
}

struct CvResult {
    std::vector<double> per_fold_mean_cosine;
    std::vector<std::size_t> per_fold_count;
    double overall_mean_cosine = 0.0;  // pooled over every held-out row
};

// 5-fold cross validation of embedding prediction: seeded balanced folds,
// mean cosine distance between predicted and true rows on each held fold.
inline CvResult mlp_eval_cv(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int folds = 5,
                            const MlpConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (folds < 2) throw RangeError("mlp_eval_cv: need at least 2 folds");
    if (n < static_cast<std::size_t>(5 * folds)) {
        throw InsufficientDataError("mlp_eval_cv: need at least 5 rows per fold");
    }
    Rng rng(cfg.seed);
    const std::vector<std::size_t> perm = rng.permutation(n);
    std::vector<int> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }

    CvResult result;
    double pooled = 0.0;
    std::size_t pooled_n = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, held;
        for (std::size_t i = 0; i < n; ++i) {
            (fold_of[i] == f ? held : train).push_back(i);
        }
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
        Eigen::MatrixXd yt(static_cast<Eigen::Index>(train.size()), y.cols());
        for (std::size_t i = 0; i < train.size(); ++i) {
            xt.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train[i]));
            yt.row(static_cast<Eigen::Index>(i)) = y.row(static_cast<Eigen::Index>(train[i]));
        }
        MlpConfig sub = cfg;
        sub.seed = cfg.seed + static_cast<std::uint64_t>(f) + 1;
        const MlpRegressor net = mlp_train(xt, yt, sub);

        double fold_sum = 0.0;
        for (std::size_t i : held) {
            const Eigen::MatrixXd pred = net.predict(x.row(static_cast<Eigen::Index>(i)));
            std::vector<double> p(pred.data(), pred.data() + pred.size());
            std::vector<double> truth(y.cols());
            for (Eigen::Index j = 0; j < y.cols(); ++j) {
                truth[static_cast<std::size_t>(j)] = y(static_cast<Eigen::Index>(i), j);
            }
            fold_sum += cosine_distance(p, truth);
        }
        result.per_fold_mean_cosine.push_back(fold_sum / static_cast<double>(held.size()));
        result.per_fold_count.push_back(held.size());
        pooled += fold_sum;
        pooled_n += held.size();
    }
    result.overall_mean_cosine = pooled / static_cast<double>(pooled_n);
    return result;
}

}  // namespace voiceprobe
