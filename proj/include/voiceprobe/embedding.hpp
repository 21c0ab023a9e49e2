#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "voiceprobe/csv.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/mathutil.hpp"

namespace voiceprobe {

struct Embedding {
    std::vector<double> vector;
    std::string owner_id;
};

namespace detail {

inline constexpr char kEmbeddingMagic[4] = {'V', 'X', 'E', 'B'};

inline void put_u32le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t take_u32le(const unsigned char*& p, const unsigned char* end,
                                const std::string& path) {
    if (p + 4 > end) throw FormatError(path + ": truncated file");
    const std::uint32_t v = static_cast<std::uint32_t>(p[0]) |
                            (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
    p += 4;
    return v;
}

}  // namespace detail

// Text form: header owner_id,v0,..,v{D-1}, one row per embedding.
inline void save_embeddings_csv(const std::string& path, const std::vector<Embedding>& embs) {
    if (embs.empty()) throw EmptyInputError("save_embeddings_csv: no embeddings");
    const std::size_t d = embs.front().vector.size();
    std::vector<std::string> header = {"owner_id"};
    for (std::size_t i = 0; i < d; ++i) header.push_back("v" + std::to_string(i));
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : embs) {
        if (e.vector.size() != d) throw FormatError("save_embeddings_csv: ragged embeddings");
        std::vector<std::string> r = {e.owner_id};
        for (double v : e.vector) r.push_back(csv::format_double(v));
        rows.push_back(std::move(r));
    }
    csv::write_file(path, header, rows);
}

// Binary form: magic "VXEB", u32 version=1, u32 D, u32 N, then N records of
// (u16 id length, id bytes, D float32), everything little-endian.
inline void save_embeddings_binary(const std::string& path, const std::vector<Embedding>& embs) {
    if (embs.empty()) throw EmptyInputError("save_embeddings_binary: no embeddings");
    const std::size_t d = embs.front().vector.size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(detail::kEmbeddingMagic, 4);
    detail::put_u32le(out, 1u);
    detail::put_u32le(out, static_cast<std::uint32_t>(d));
    detail::put_u32le(out, static_cast<std::uint32_t>(embs.size()));
    for (const auto& e : embs) {
        if (e.vector.size() != d) throw FormatError("save_embeddings_binary: ragged embeddings");
        if (e.owner_id.size() > 0xffff) throw FormatError("owner id too long");
        const auto len = static_cast<std::uint16_t>(e.owner_id.size());
        const unsigned char lb[2] = {static_cast<unsigned char>(len & 0xff),
                                     static_cast<unsigned char>((len >> 8) & 0xff)};
        out.write(reinterpret_cast<const char*>(lb), 2);
        out.write(e.owner_id.data(), static_cast<std::streamsize>(len));
        for (double v : e.vector) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::put_u32le(out, bits);
        }
    }
    if (!out) throw FormatError("write failed for " + path);
}

// Reads either canonical embedding format, sniffed by the magic bytes.
inline std::vector<Embedding> load_embeddings(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError("cannot open " + path);
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    const bool binary =
        probe.gcount() == 4 && std::memcmp(magic, detail::kEmbeddingMagic, 4) == 0;
    probe.close();

    std::vector<Embedding> out;
    if (binary) {
        std::ifstream in(path, std::ios::binary);
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
        const unsigned char* p = bytes.data() + 4;
        const unsigned char* end = bytes.data() + bytes.size();
        const std::uint32_t version = detail::take_u32le(p, end, path);
        if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
        const std::uint32_t d = detail::take_u32le(p, end, path);
        const std::uint32_t n = detail::take_u32le(p, end, path);
        if (d == 0) throw FormatError(path + ": zero dimension");
        for (std::uint32_t i = 0; i < n; ++i) {
            if (p + 2 > end) throw FormatError(path + ": truncated record");
            const std::uint16_t len =
                static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
            p += 2;
            if (p + len > end) throw FormatError(path + ": truncated id");
            Embedding e;
            e.owner_id.assign(reinterpret_cast<const char*>(p), len);
            p += len;
            e.vector.resize(d);
            for (std::uint32_t j = 0; j < d; ++j) {
                const std::uint32_t bits = detail::take_u32le(p, end, path);
                float f;
                std::memcpy(&f, &bits, 4);
                if (!std::isfinite(f)) throw FormatError(path + ": non-finite value");
                e.vector[j] = static_cast<double>(f);
            }
            out.push_back(std::move(e));
        }
    } else {
        const csv::Table t = csv::read_file(path);
        const int c_owner = t.require_column("owner_id", path);
        if (t.header.size() < 2) throw FormatError(path + ": no value columns");
        std::size_t line_no = 1;
        for (const auto& r : t.rows) {
            ++line_no;
            Embedding e;
            e.owner_id = r[static_cast<std::size_t>(c_owner)];
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (static_cast<int>(c) == c_owner) continue;
                e.vector.push_back(
                    csv::parse_double(r[c], path + ": line " + std::to_string(line_no)));
            }
            out.push_back(std::move(e));
        }
    }
    for (const auto& e : out) {
        if (e.vector.size() != out.front().vector.size()) {
            throw FormatError(path + ": inconsistent embedding dimension");
        }
    }
    return out;
}

inline Embedding mean_embedding(const std::vector<Embedding>& group) {
    if (group.empty()) throw EmptyInputError("mean_embedding: empty group");
    const std::size_t d = group.front().vector.size();
    Embedding out;
    out.owner_id = group.front().owner_id;
    out.vector.assign(d, 0.0);
    for (const auto& e : group) {
        if (e.vector.size() != d) throw FormatError("mean_embedding: dimension mismatch");
        for (std::size_t i = 0; i < d; ++i) out.vector[i] += e.vector[i];
    }
    for (double& v : out.vector) v /= static_cast<double>(group.size());
    return out;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw RangeError("cosine_distance: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVectorError("cosine_distance: zero vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_distance(const Embedding& a, const Embedding& b) {
    return cosine_distance(a.vector, b.vector);
}

struct InterspeakerStats {
    double mean_distance = 0.0;
    std::size_t n_pairs = 0;
    // percentile -> value, over {1, 5, 50, 95, 99}
    std::vector<std::pair<int, double>> percentiles;
};

// All pairwise cosine distances between per-speaker mean embeddings.
inline InterspeakerStats interspeaker_stats(const std::vector<Embedding>& means) {
    if (means.size() < 2) throw EmptyInputError("interspeaker_stats: need at least 2 speakers");
    std::vector<double> dists;
    dists.reserve(means.size() * (means.size() - 1) / 2);
    for (std::size_t i = 0; i < means.size(); ++i) {
        for (std::size_t j = i + 1; j < means.size(); ++j) {
            dists.push_back(cosine_distance(means[i], means[j]));
        }
    }
    InterspeakerStats s;
    s.n_pairs = dists.size();
    s.mean_distance = mean_of(dists);
    for (int p : {1, 5, 50, 95, 99}) {
        s.percentiles.emplace_back(p, quantile_type7(dists, p / 100.0));
    }
    return s;
}

// Centered PCA of the embedding cohort; no per-coordinate scaling. The sign
// of each component is fixed so its largest-magnitude coordinate is
// positive, which keeps repeated runs comparable.
struct PcaModel {
    Eigen::VectorXd mean;         // D
    Eigen::MatrixXd components;   // K x D, rows orthonormal
    Eigen::VectorXd eigenvalues;  // K, non-increasing
    double total_variance = 0.0;  // sum over all D eigenvalues

    Eigen::Index dim() const { return mean.size(); }
    Eigen::Index k_max() const { return components.rows(); }
};

inline PcaModel pca_fit(const std::vector<Embedding>& cohort) {
    const std::size_t n = cohort.size();
    if (n < 2) throw EmptyInputError("pca_fit: need at least 2 rows");
    const std::size_t d = cohort.front().vector.size();
    if (d < 2) throw RangeError("pca_fit: need dimension >= 2");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (cohort[i].vector.size() != d) throw FormatError("pca_fit: ragged rows");
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cohort[i].vector[j];
        }
    }
    PcaModel model;
    model.mean = x.colwise().mean();
    x.rowwise() -= model.mean.transpose();

    const double denom = static_cast<double>(n - 1);
    model.total_variance = x.squaredNorm() / denom;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::Index k =
        std::min<Eigen::Index>(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(d));
    model.components.resize(k, static_cast<Eigen::Index>(d));
    model.eigenvalues.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double s = svd.singularValues()(i);
        model.eigenvalues(i) = s * s / denom;
        Eigen::VectorXd comp = svd.matrixV().col(i);
        Eigen::Index arg = 0;
        comp.cwiseAbs().maxCoeff(&arg);
        if (comp(arg) < 0.0) comp = -comp;
        model.components.row(i) = comp.transpose();
    }
    return model;
}

inline Eigen::VectorXd pca_project(const PcaModel& model, const std::vector<double>& v,
                                   Eigen::Index k) {
    if (k < 1 || k > model.k_max()) throw RangeError("pca_project: k out of range");
    if (static_cast<Eigen::Index>(v.size()) != model.dim()) {
        throw RangeError("pca_project: dimension mismatch");
    }
    const Eigen::VectorXd centered =
        Eigen::Map<const Eigen::VectorXd>(v.data(), model.dim()) - model.mean;
    return model.components.topRows(k) * centered;
}

inline std::vector<double> pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& scores,
                                           Eigen::Index k) {
    if (k < 1 || k > model.k_max()) throw RangeError("pca_reconstruct: k out of range");
    if (scores.size() != k) throw RangeError("pca_reconstruct: score length != k");
    const Eigen::VectorXd v = model.mean + model.components.topRows(k).transpose() * scores;
    return std::vector<double>(v.data(), v.data() + v.size());
}

struct PcaQualityRow {
    int k = 0;
    double pct_variance = 0.0;
    double mean_cosine_distance = 0.0;
};

// Fit-quality table: cumulative variance explained and mean cosine distance
// between each row and its k-component reconstruction, for k = 1..k_max.
inline std::vector<PcaQualityRow> pca_quality_table(const PcaModel& model,
                                                    const std::vector<Embedding>& data,
                                                    Eigen::Index k_max) {
    if (k_max < 1 || k_max > model.k_max()) throw RangeError("pca_quality_table: k out of range");
    if (data.empty()) throw EmptyInputError("pca_quality_table: no data");

    const std::size_t n = data.size();
    std::vector<Eigen::VectorXd> recon(n, model.mean);
    std::vector<PcaQualityRow> rows;
    double cum = 0.0;
    for (Eigen::Index k = 1; k <= k_max; ++k) {
        cum += model.eigenvalues(k - 1);
        double dist_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd centered =
                Eigen::Map<const Eigen::VectorXd>(data[i].vector.data(), model.dim()) -
                model.mean;
            const double score = model.components.row(k - 1).dot(centered);
            recon[i] += score * model.components.row(k - 1).transpose();
            std::vector<double> r(recon[i].data(), recon[i].data() + recon[i].size());
            dist_sum += cosine_distance(data[i].vector, r);
        }
        PcaQualityRow row;
        row.k = static_cast<int>(k);
        row.pct_variance = 100.0 * cum / model.total_variance;
        row.mean_cosine_distance = dist_sum / static_cast<double>(n);
        rows.push_back(row);
    }
    return rows;
}

// Group embeddings by owner and average, preserving first-appearance order.
inline std::vector<Embedding> mean_by_owner(const std::vector<Embedding>& embs) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const Embedding*>> groups;
    for (const auto& e : embs) {
        auto [it, inserted] = groups.try_emplace(e.owner_id);
        if (inserted) order.push_back(e.owner_id);
        it->second.push_back(&e);
    }
    std::vector<Embedding> out;
    for (const auto& id : order) {
        std::vector<Embedding> group;
        for (const Embedding* p : groups[id]) group.push_back(*p);
        Embedding m = mean_embedding(group);
        m.owner_id = id;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace voiceprobe
