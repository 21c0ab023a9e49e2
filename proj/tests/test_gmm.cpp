#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "support/synth.hpp"
#include "voiceprobe/gmm.hpp"
#include "voiceprobe/mathutil.hpp"

using namespace voiceprobe;

namespace {

// two seeded Gaussians at (-3,0) and (3,0), unit covariance
Eigen::MatrixXd two_blobs(std::size_t n, std::uint64_t seed, std::vector<std::string>* labels) {
    Rng rng(seed);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        const bool right = i % 2 == 1;
        pts(static_cast<Eigen::Index>(i), 0) = (right ? 3.0 : -3.0) + rng.normal();
        pts(static_cast<Eigen::Index>(i), 1) = rng.normal();
        if (labels) labels->push_back(right ? "female" : "male");
    }
    return pts;
}

}  // namespace

TEST_CASE("em recovers two separated gaussians") {
    std::vector<std::string> labels;
    const Eigen::MatrixXd pts = two_blobs(1000, 21, &labels);
    const GmmModel model = gmm_fit(pts, 2, 1, 5);
    REQUIRE(model.k == 2);
    // match components to truth irrespective of order
    const double m0 = model.means[0](0);
    const double m1 = model.means[1](0);
    const double lo = std::min(m0, m1);
    const double hi = std::max(m0, m1);
    REQUIRE(std::abs(lo - (-3.0)) < 0.2);
    REQUIRE(std::abs(hi - 3.0) < 0.2);
    REQUIRE(std::abs(model.means[0](1)) < 0.2);
    REQUIRE(std::abs(model.means[1](1)) < 0.2);
}

TEST_CASE("single-component fit equals the sample moments") {
    Rng rng(22);
    Eigen::MatrixXd pts(200, 2);
    for (Eigen::Index i = 0; i < 200; ++i) {
        pts(i, 0) = 1.5 + 0.7 * rng.normal();
        pts(i, 1) = -2.0 + 1.3 * rng.normal();
    }
    const GmmModel model = gmm_fit(pts, 1, 3, 2);
    const Eigen::RowVectorXd mean = pts.colwise().mean();
    REQUIRE(model.means[0](0) == Catch::Approx(mean(0)).margin(1e-8));
    REQUIRE(model.means[0](1) == Catch::Approx(mean(1)).margin(1e-8));
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    for (Eigen::Index i = 0; i < 200; ++i) {
        const Eigen::VectorXd d = (pts.row(i) - mean).transpose();
        cov += d * d.transpose();
    }
    cov /= 200.0;  // EM's maximum-likelihood normalization
    REQUIRE(model.covariances[0](0, 0) == Catch::Approx(cov(0, 0)).margin(1e-6));
    REQUIRE(model.covariances[0](1, 1) == Catch::Approx(cov(1, 1)).margin(1e-6));
    REQUIRE(model.covariances[0](0, 1) == Catch::Approx(cov(0, 1)).margin(1e-6));
    REQUIRE(model.weights[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("weights form a simplex on every fit") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd pts = two_blobs(300, 30 + seed, nullptr);
        const GmmModel model = gmm_fit(pts, 2, seed, 3);
        double sum = 0.0;
        for (double w : model.weights) {
            REQUIRE(w >= 0.0);
            sum += w;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-12);
        // spd: cholesky must succeed
        for (const auto& cov : model.covariances) {
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            REQUIRE(llt.info() == Eigen::Success);
        }
    }
}

TEST_CASE("identical points are degenerate") {
    Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(50, 2);
    REQUIRE_THROWS_AS(gmm_fit(pts, 2, 1, 2), DegenerateError);
}

TEST_CASE("too few points are rejected") {
    Eigen::MatrixXd pts = Eigen::MatrixXd::Random(15, 2);
    REQUIRE_THROWS_AS(gmm_fit(pts, 2, 1, 2), InsufficientDataError);
}

TEST_CASE("relabeling consistent separated clusters agrees fully") {
    std::vector<std::string> labels;
    const Eigen::MatrixXd pts = two_blobs(600, 23, &labels);
    const GmmModel model = gmm_fit(pts, 2, 2, 5);
    const RelabelResult result = relabel_by_cluster(model, pts, labels);
    REQUIRE(result.agreement_percent == Catch::Approx(100.0).margin(0.5));
    const bool names_ok = (result.cluster_names[0] == "male" && result.cluster_names[1] == "female") ||
                          (result.cluster_names[0] == "female" && result.cluster_names[1] == "male");
    REQUIRE(names_ok);
}

TEST_CASE("17 percent flipped labels read back as 83 percent agreement") {
    std::vector<std::string> labels;
    const Eigen::MatrixXd pts = two_blobs(1000, 24, &labels);
    Rng rng(25);
    const auto perm = rng.permutation(labels.size());
    for (std::size_t i = 0; i < 170; ++i) {
        auto& label = labels[perm[i]];
        label = (label == "male") ? "female" : "male";
    }
    const GmmModel model = gmm_fit(pts, 2, 3, 5);
    const RelabelResult result = relabel_by_cluster(model, pts, labels);
    REQUIRE(result.agreement_percent == Catch::Approx(83.0).margin(1.0));
}

TEST_CASE("tied majority votes raise TieError") {
    Eigen::MatrixXd pts(20, 2);
    std::vector<std::string> labels;
    Rng rng(26);
    for (Eigen::Index i = 0; i < 20; ++i) {
        const bool right = i % 2 == 1;
        pts(i, 0) = (right ? 4.0 : -4.0) + 0.1 * rng.normal();
        pts(i, 1) = 0.1 * rng.normal();
        labels.push_back(i % 4 < 2 ? "male" : "female");  // 50/50 inside each blob
    }
    const GmmModel model = gmm_fit(pts, 2, 4, 5);
    REQUIRE_THROWS_AS(relabel_by_cluster(model, pts, labels), TieError);
}

TEST_CASE("posterior ties resolve to the lower-index component") {
    GmmModel model;
    model.k = 2;
    model.weights = {0.5, 0.5};
    model.means = {Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
    model.covariances = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
    Eigen::MatrixXd pts(1, 1);
    pts(0, 0) = 0.0;  // exactly equidistant
    const auto assign = gmm_assign(model, pts);
    REQUIRE(assign[0] == 0);
}

TEST_CASE("ashman d of identical components is zero") {
    REQUIRE(ashman_d(1.3, 1.3, 0.8, 0.8) == 0.0);
}

TEST_CASE("bimodality of a clean two-mode mixture") {
    Rng rng(27);
    std::vector<double> values;
    for (int i = 0; i < 1000; ++i) {
        values.push_back((i % 2 ? 2.0 : -2.0) + rng.normal());
    }
    const BimodalityScore score = bimodality_score(values, 5);
    // analytic D at the true parameters: |(-2) - 2| / sqrt(1 + 1) = 2.83
    REQUIRE(score.ashman_d == Catch::Approx(2.828).margin(0.3));
    REQUIRE(score.bimodal);
}

TEST_CASE("a single gaussian is not bimodal") {
    int unimodal = 0;
    std::vector<double> ds;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(400 + seed);
        std::vector<double> values;
        for (int i = 0; i < 500; ++i) values.push_back(rng.normal());
        const BimodalityScore score = bimodality_score(values, seed);
        if (!score.bimodal) ++unimodal;
        ds.push_back(score.ashman_d);
    }
    REQUIRE(unimodal >= 18);
    REQUIRE(median_of(ds) < 1.5);  // typical spurious split stays far from the threshold
}

TEST_CASE("bimodality needs 50 values") {
    std::vector<double> values(30, 0.0);
    REQUIRE_THROWS_AS(bimodality_score(values, 1), InsufficientDataError);
}
