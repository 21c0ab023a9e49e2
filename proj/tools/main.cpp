// voiceprobe CLI: batch pipeline from WAV recordings and external speaker
// embeddings to the descriptor/PCA/model reports and scatter plots.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voiceprobe/voiceprobe.hpp"

namespace vp = voiceprobe;
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;

    vp::RunConfig resolve() const {
        vp::RunConfig cfg;
        if (!config_path.empty()) cfg = vp::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (jobs) cfg.jobs = *jobs;
        vp::validate_config(cfg);
        return cfg;
    }
};

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw vp::FormatError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw vp::FormatError("write failed for " + path);
}

void validate_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw vp::FormatError("validation failed: cannot reopen " + path);
    const ordered_json parsed = ordered_json::parse(in);  // throws on malformed output
    (void)parsed;
}

// ---------------------------------------------------------------------------
// pc-scores file: speaker_id,pc1..pck

struct PcScores {
    std::vector<std::string> speaker_ids;
    Eigen::MatrixXd scores;
};

void write_pc_scores(const std::string& path, const PcScores& s) {
    std::vector<std::string> header = {"speaker_id"};
    for (Eigen::Index c = 0; c < s.scores.cols(); ++c) {
        header.push_back("pc" + std::to_string(c + 1));
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < s.speaker_ids.size(); ++i) {
        std::vector<std::string> row = {s.speaker_ids[i]};
        for (Eigen::Index c = 0; c < s.scores.cols(); ++c) {
            row.push_back(vp::csv::format_double(s.scores(static_cast<Eigen::Index>(i), c)));
        }
        rows.push_back(std::move(row));
    }
    vp::csv::write_file(path, header, rows);
}

PcScores read_pc_scores(const std::string& path) {
    const vp::csv::Table t = vp::csv::read_file(path);
    const int c_speaker = t.require_column("speaker_id", path);
    std::vector<int> pc_cols;
    for (int pc = 1;; ++pc) {
        const int c = t.column("pc" + std::to_string(pc));
        if (c < 0) break;
        pc_cols.push_back(c);
    }
    if (pc_cols.empty()) throw vp::FormatError(path + ": no pc columns");
    PcScores s;
    s.scores.resize(static_cast<Eigen::Index>(t.rows.size()),
                    static_cast<Eigen::Index>(pc_cols.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        s.speaker_ids.push_back(t.rows[i][static_cast<std::size_t>(c_speaker)]);
        for (std::size_t c = 0; c < pc_cols.size(); ++c) {
            s.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                vp::csv::parse_double(
                    t.rows[i][static_cast<std::size_t>(pc_cols[c])], path);
        }
    }
    return s;
}

// gmm assignments file: speaker_id,cluster,cluster_label,metadata_gender
struct ClusterAssignments {
    std::vector<std::string> speaker_ids;
    std::vector<int> cluster;
    std::vector<std::string> cluster_label;
};

ClusterAssignments read_clusters(const std::string& path) {
    const vp::csv::Table t = vp::csv::read_file(path);
    const int c_speaker = t.require_column("speaker_id", path);
    const int c_cluster = t.require_column("cluster", path);
    const int c_label = t.require_column("cluster_label", path);
    ClusterAssignments a;
    for (const auto& r : t.rows) {
        a.speaker_ids.push_back(r[static_cast<std::size_t>(c_speaker)]);
        a.cluster.push_back(static_cast<int>(
            vp::csv::parse_double(r[static_cast<std::size_t>(c_cluster)], path)));
        a.cluster_label.push_back(r[static_cast<std::size_t>(c_label)]);
    }
    return a;
}

// Normalized descriptor matrix for the modeling commands: drops descriptor
// columns absent cohort-wide, then speakers missing any remaining column.
struct ModelingMatrix {
    vp::NormalizedMatrix matrix;
    std::vector<std::string> names;  // modeled descriptor names, column order
};

ModelingMatrix build_modeling_matrix(const std::vector<vp::SpeakerRecord>& records) {
    std::vector<int> modeled;
    for (int d = 0; d < vp::kDescriptorCount; ++d) {
        bool any = false;
        for (const auto& rec : records) any = any || rec.mean_profile.has(d);
        if (any) {
            modeled.push_back(d);
        } else {
            std::cerr << "note: descriptor '" << vp::kDescriptorNames[static_cast<std::size_t>(d)]
                      << "' absent for every speaker; excluded from the model\n";
        }
    }
    ModelingMatrix m;
    m.matrix = vp::fit_normalizer(records, modeled);
    for (int d : modeled) m.names.emplace_back(vp::kDescriptorNames[static_cast<std::size_t>(d)]);
    if (!m.matrix.dropped_speakers.empty()) {
        std::cerr << "note: dropped " << m.matrix.dropped_speakers.size()
                  << " speaker(s) missing a modeled descriptor\n";
    }
    return m;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return x;
}

ordered_json transforms_json(const vp::Normalizer& nz) {
    ordered_json j = ordered_json::object();
    for (std::size_t c = 0; c < nz.descriptors.size(); ++c) {
        j[vp::kDescriptorNames[static_cast<std::size_t>(nz.descriptors[c])]] =
            vp::transform_name(nz.transforms[c]);
    }
    return j;
}

// Align a secondary table's rows to `ids`; FormatError names both files.
template <typename Lookup>
std::vector<std::size_t> align_rows(const std::vector<std::string>& ids, const Lookup& lookup,
                                    const std::string& file_a, const std::string& file_b) {
    std::vector<std::size_t> idx;
    for (const auto& id : ids) {
        const auto it = lookup.find(id);
        if (it == lookup.end()) {
            throw vp::FormatError("speaker '" + id + "' present in " + file_a +
                                  " but missing from " + file_b);
        }
        idx.push_back(it->second);
    }
    return idx;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::vector<std::string> inputs;
    std::string sidecar_path;
    std::string out_path;
    std::optional<double> min_chunk_seconds;
    std::string group_by = "stem";
};

int cmd_analyze(const AnalyzeArgs& args, const vp::RunConfig& cfg) {
    const double min_s = args.min_chunk_seconds.value_or(cfg.min_chunk_seconds);
    std::map<std::string, vp::SidecarRecord> sidecar;
    if (!args.sidecar_path.empty()) sidecar = vp::read_sidecar(args.sidecar_path);

    // group inputs into speakers
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < args.inputs.size(); ++i) {
        const fs::path p(args.inputs[i]);
        std::string key;
        if (args.group_by == "stem") {
            key = p.stem().string();
        } else if (args.group_by == "parent") {
            key = p.parent_path().filename().string();
            if (key.empty()) key = p.stem().string();
        } else {
            key = p.stem().string() + "@" + std::to_string(i);
        }
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(args.inputs[i]);
    }

    struct GroupResult {
        std::vector<vp::FeatureRow> rows;
        std::vector<std::string> warnings;
        std::string error;
    };
    std::vector<GroupResult> results(order.size());

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        while (true) {
            const std::size_t g = next.fetch_add(1);
            if (g >= order.size()) break;
            GroupResult& res = results[g];
            try {
                std::vector<vp::AudioClip> clips;
                for (const auto& path : groups[order[g]]) {
                    clips.push_back(vp::resample_to_16k(vp::load_wav(path)));
                }
                vp::ChunkResult chunks = vp::chunk_min_duration(clips, min_s);
                if (chunks.below_min) {
                    res.warnings.push_back("speaker '" + order[g] +
                                           "': total audio shorter than the minimum chunk; "
                                           "analysing one short segment");
                }
                for (std::size_t k = 0; k < chunks.segments.size(); ++k) {
                    vp::AudioClip& seg = chunks.segments[k];
                    seg.source_id = order[g] + "#" + std::to_string(k);
                    std::optional<vp::SidecarRecord> sc;
                    const auto it = sidecar.find(seg.source_id);
                    if (it != sidecar.end()) sc = it->second;
                    vp::FeatureRow row;
                    row.speaker_id = order[g];
                    row.segment_id = seg.source_id;
                    row.profile = vp::analyze_recording(seg, sc, cfg.analysis);
                    res.rows.push_back(std::move(row));
                }
            } catch (const std::exception& e) {
                res.error = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    const int n_threads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(order.size())));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::vector<vp::FeatureRow> rows;
    std::size_t failures = 0;
    for (std::size_t g = 0; g < order.size(); ++g) {
        for (const auto& w : results[g].warnings) std::cerr << "warning: " << w << "\n";
        if (!results[g].error.empty()) {
            ++failures;
            std::cerr << "warning: skipping speaker '" << order[g]
                      << "': " << results[g].error << "\n";
            continue;
        }
        for (auto& r : results[g].rows) rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        std::cerr << "error: every input failed\n";
        return 1;
    }
    vp::write_features(args.out_path, rows);
    vp::read_features(args.out_path);  // reject the run unless the output re-parses
    std::cerr << "analyzed " << order.size() - failures << " speaker(s), " << rows.size()
              << " segment(s) -> " << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// aggregate

int cmd_aggregate(const std::string& features_path, const std::string& metadata_path,
                  const std::string& out_path) {
    const auto features = vp::read_features(features_path);
    if (features.empty()) throw vp::EmptyInputError(features_path + ": no feature rows");
    const auto metadata = vp::read_metadata(metadata_path);

    std::vector<std::string> order;
    std::map<std::string, std::vector<vp::AcousticProfile>> by_speaker;
    for (const auto& row : features) {
        auto [it, inserted] = by_speaker.try_emplace(row.speaker_id);
        if (inserted) order.push_back(row.speaker_id);
        it->second.push_back(row.profile);
    }

    std::vector<vp::SpeakerRecord> records;
    std::vector<std::string> missing;
    for (const auto& id : order) {
        vp::SpeakerRecord rec;
        rec.speaker_id = id;
        rec.profiles = by_speaker[id];
        rec.mean_profile = vp::aggregate_speaker(rec.profiles);
        const auto it = metadata.find(id);
        if (it != metadata.end()) {
            rec.gender = it->second.gender;
            rec.age_years = it->second.age_years;
        } else {
            missing.push_back(id);
        }
        records.push_back(std::move(rec));
    }
    if (!missing.empty()) {
        std::cerr << "warnings: " << missing.size() << " speaker(s) missing from metadata:";
        for (const auto& id : missing) std::cerr << " " << id;
        std::cerr << "\n";
    }
    vp::write_speakers(out_path, records);
    vp::read_speakers(out_path);
    std::cerr << "aggregated " << records.size() << " speaker(s) -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// pca

int cmd_pca(const std::string& embeddings_path, int kmax, const std::string& out_prefix) {
    const auto embeddings = vp::load_embeddings(embeddings_path);
    const auto means = vp::mean_by_owner(embeddings);
    const vp::PcaModel model = vp::pca_fit(means);
    const Eigen::Index k = std::min<Eigen::Index>(kmax, model.k_max());
    const auto quality = vp::pca_quality_table(model, means, k);
    const auto stats = vp::interspeaker_stats(means);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : quality) {
        rows.push_back({std::to_string(r.k), vp::csv::format_double(r.pct_variance),
                        vp::csv::format_double(r.mean_cosine_distance)});
    }
    const std::string quality_csv = out_prefix + "_quality.csv";
    vp::csv::write_file(quality_csv, {"k", "pct_variance", "mean_cosine_distance"}, rows);
    vp::csv::read_file(quality_csv);

    ordered_json j;
    j["table"] = "pca_quality";
    j["embedding_dim"] = means.front().vector.size();
    j["n_speakers"] = means.size();
    j["rows"] = ordered_json::array();
    for (const auto& r : quality) {
        j["rows"].push_back({{"k", r.k},
                             {"pct_variance", r.pct_variance},
                             {"mean_cosine_distance", r.mean_cosine_distance}});
    }
    j["interspeaker"] = {{"mean_distance", stats.mean_distance}, {"n_pairs", stats.n_pairs}};
    for (const auto& [p, v] : stats.percentiles) {
        j["interspeaker"]["p" + std::to_string(p)] = v;
    }
    const std::string quality_json = out_prefix + "_quality.json";
    write_json(quality_json, j);
    validate_json(quality_json);

    PcScores scores;
    scores.scores.resize(static_cast<Eigen::Index>(means.size()), k);
    for (std::size_t i = 0; i < means.size(); ++i) {
        scores.speaker_ids.push_back(means[i].owner_id);
        scores.scores.row(static_cast<Eigen::Index>(i)) =
            vp::pca_project(model, means[i].vector, k).transpose();
    }
    const std::string scores_csv = out_prefix + "_scores.csv";
    write_pc_scores(scores_csv, scores);
    read_pc_scores(scores_csv);

    std::cerr << "pca: " << means.size() << " speakers, k=" << k << " -> " << quality_csv << ", "
              << scores_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// greedy

struct GreedyArgs {
    std::string speakers_path;
    std::string scores_path;
    std::string clusters_path;
    std::string out_prefix;
    int pcs = 0;  // 0 = all available
    bool gendered = false;
};

int cmd_greedy(const GreedyArgs& args, const vp::RunConfig& cfg) {
    const auto records = vp::read_speakers(args.speakers_path);
    const ModelingMatrix mm = build_modeling_matrix(records);
    const Eigen::MatrixXd x = to_matrix(mm.matrix.values);

    const PcScores scores = read_pc_scores(args.scores_path);
    std::map<std::string, std::size_t> score_row;
    for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) score_row[scores.speaker_ids[i]] = i;
    const auto row_idx =
        align_rows(mm.matrix.speaker_ids, score_row, args.speakers_path, args.scores_path);

    const int n_pcs = args.pcs > 0
                          ? std::min<int>(args.pcs, static_cast<int>(scores.scores.cols()))
                          : static_cast<int>(scores.scores.cols());

    std::vector<int> cluster_labels;
    std::array<std::string, 2> cluster_names = {"cluster0", "cluster1"};
    if (args.gendered) {
        if (args.clusters_path.empty()) {
            throw vp::ConfigError("--gendered requires --clusters (gmm assignments file)");
        }
        const ClusterAssignments clusters = read_clusters(args.clusters_path);
        std::map<std::string, std::size_t> cluster_row;
        for (std::size_t i = 0; i < clusters.speaker_ids.size(); ++i) {
            cluster_row[clusters.speaker_ids[i]] = i;
        }
        const auto cidx = align_rows(mm.matrix.speaker_ids, cluster_row, args.speakers_path,
                                     args.clusters_path);
        for (std::size_t i : cidx) {
            cluster_labels.push_back(clusters.cluster[i]);
            if (clusters.cluster[i] == 0 || clusters.cluster[i] == 1) {
                cluster_names[static_cast<std::size_t>(clusters.cluster[i])] =
                    clusters.cluster_label[i].empty()
                        ? cluster_names[static_cast<std::size_t>(clusters.cluster[i])]
                        : clusters.cluster_label[i];
            }
        }
    }

    std::vector<std::vector<std::string>> model_rows;
    std::vector<std::vector<std::string>> gendered_rows;
    std::vector<std::vector<std::string>> sign_rows;
    ordered_json jm;
    jm["table"] = "greedy_models";
    jm["transforms"] = transforms_json(mm.matrix.normalizer);
    jm["alpha"] = cfg.alpha;
    jm["heldout_fraction"] = cfg.heldout_fraction;
    jm["rows"] = ordered_json::array();
    ordered_json jg;
    jg["table"] = "gendered_fit";
    jg["clusters"] = {cluster_names[0], cluster_names[1]};
    jg["rows"] = ordered_json::array();
    ordered_json js;
    js["table"] = "sign_table";
    js["rows"] = ordered_json::array();

    for (int pc = 1; pc <= n_pcs; ++pc) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(row_idx.size()));
        for (std::size_t i = 0; i < row_idx.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) =
                scores.scores(static_cast<Eigen::Index>(row_idx[i]), pc - 1);
        }
        vp::GreedyConfig gcfg;
        gcfg.alpha = cfg.alpha;
        gcfg.heldout_fraction = cfg.heldout_fraction;
        gcfg.seed = cfg.seed + static_cast<std::uint64_t>(pc - 1);

        const vp::LinearModel model = vp::greedy_select(x, y, mm.names, gcfg);
        std::string joined;
        for (std::size_t i = 0; i < model.selected.size(); ++i) {
            if (i) joined += ";";
            joined += model.selected[i];
        }
        model_rows.push_back({std::to_string(pc), joined,
                              vp::csv::format_double(model.heldout_rmse),
                              vp::csv::format_double(model.heldout_corr)});
        ordered_json row;
        row["pc"] = pc;
        row["parameters"] = model.selected;
        row["coefficients"] = model.coefficients;
        row["intercept"] = model.intercept;
        row["train_rmse"] = model.train_rmse;
        row["rmse"] = model.heldout_rmse;
        row["corr"] = model.heldout_corr;
        jm["rows"].push_back(row);

        if (args.gendered) {
            const vp::GenderedComparison cmp =
                vp::gendered_compare(x, y, cluster_labels, mm.names, gcfg);
            gendered_rows.push_back({std::to_string(pc),
                                     vp::csv::format_double(cmp.pooled_rmse),
                                     vp::csv::format_double(cmp.pooled_corr),
                                     vp::csv::format_double(cmp.gendered_rmse),
                                     vp::csv::format_double(cmp.gendered_corr)});
            ordered_json grow;
            grow["pc"] = pc;
            grow["pooled_rmse"] = cmp.pooled_rmse;
            grow["pooled_corr"] = cmp.pooled_corr;
            grow["gendered_rmse"] = cmp.gendered_rmse;
            grow["gendered_corr"] = cmp.gendered_corr;
            for (std::size_t c = 0; c < 2; ++c) {
                ordered_json sub;
                sub["parameters"] = cmp.per_cluster[c].selected;
                sub["coefficients"] = cmp.per_cluster[c].coefficients;
                sub["rmse"] = cmp.per_cluster[c].heldout_rmse;
                sub["corr"] = cmp.per_cluster[c].heldout_corr;
                grow[cluster_names[c]] = sub;
            }
            jg["rows"].push_back(grow);
            for (const auto& sr : cmp.sign_table) {
                sign_rows.push_back({std::to_string(pc), sr.descriptor,
                                     sr.sign_cluster_a > 0 ? "+" : "-",
                                     sr.sign_cluster_b > 0 ? "+" : "-"});
                js["rows"].push_back({{"pc", pc},
                                      {"descriptor", sr.descriptor},
                                      {cluster_names[0], sr.sign_cluster_a > 0 ? "+" : "-"},
                                      {cluster_names[1], sr.sign_cluster_b > 0 ? "+" : "-"}});
            }
        }
    }

    const std::string models_csv = args.out_prefix + "_models.csv";
    vp::csv::write_file(models_csv, {"pc", "parameters", "rmse", "corr"}, model_rows);
    vp::csv::read_file(models_csv);
    write_json(args.out_prefix + "_models.json", jm);
    validate_json(args.out_prefix + "_models.json");

    if (args.gendered) {
        const std::string gendered_csv = args.out_prefix + "_gendered.csv";
        vp::csv::write_file(
            gendered_csv,
            {"pc", "pooled_rmse", "pooled_corr", "gendered_rmse", "gendered_corr"},
            gendered_rows);
        vp::csv::read_file(gendered_csv);
        write_json(args.out_prefix + "_gendered.json", jg);
        const std::string signs_csv = args.out_prefix + "_signs.csv";
        vp::csv::write_file(signs_csv,
                            {"pc", "descriptor", "sign_" + cluster_names[0],
                             "sign_" + cluster_names[1]},
                            sign_rows);
        vp::csv::read_file(signs_csv);
        write_json(args.out_prefix + "_signs.json", js);
    }
    std::cerr << "greedy: " << n_pcs << " pc model(s) -> " << models_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gmm

int cmd_gmm(const std::string& scores_path, const std::string& metadata_path,
            const std::string& out_prefix, const vp::RunConfig& cfg) {
    const PcScores scores = read_pc_scores(scores_path);
    if (scores.scores.cols() < 2) {
        throw vp::FormatError(scores_path + ": need at least 2 pc columns for 2-D clustering");
    }
    const auto metadata = vp::read_metadata(metadata_path);

    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<Eigen::Index> kept;
    for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
        const auto it = metadata.find(scores.speaker_ids[i]);
        if (it == metadata.end() || it->second.gender == vp::Gender::unknown) continue;
        ids.push_back(scores.speaker_ids[i]);
        labels.push_back(vp::gender_name(it->second.gender));
        kept.push_back(static_cast<Eigen::Index>(i));
    }
    if (kept.size() < scores.speaker_ids.size()) {
        std::cerr << "note: " << scores.speaker_ids.size() - kept.size()
                  << " speaker(s) without a gender label excluded from clustering\n";
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(kept.size()), 2);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        pts(static_cast<Eigen::Index>(i), 0) = scores.scores(kept[i], 0);
        pts(static_cast<Eigen::Index>(i), 1) = scores.scores(kept[i], 1);
    }

    const vp::GmmModel model = vp::gmm_fit(pts, 2, cfg.seed, cfg.gmm_restarts);
    const vp::RelabelResult relabel = vp::relabel_by_cluster(model, pts, labels);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        rows.push_back({ids[i], std::to_string(relabel.assignments[i]), relabel.relabeled[i],
                        labels[i]});
    }
    const std::string assignments_csv = out_prefix + "_assignments.csv";
    vp::csv::write_file(assignments_csv,
                        {"speaker_id", "cluster", "cluster_label", "metadata_gender"}, rows);
    read_clusters(assignments_csv);

    ordered_json j;
    j["table"] = "gmm_relabel";
    j["agreement_percent"] = relabel.agreement_percent;
    j["log_likelihood"] = model.log_likelihood;
    j["clusters"] = ordered_json::array();
    for (int c = 0; c < 2; ++c) {
        ordered_json jc;
        jc["name"] = relabel.cluster_names[static_cast<std::size_t>(c)];
        jc["weight"] = model.weights[static_cast<std::size_t>(c)];
        jc["mean"] = {model.means[static_cast<std::size_t>(c)](0),
                      model.means[static_cast<std::size_t>(c)](1)};
        j["clusters"].push_back(jc);
    }
    write_json(out_prefix + "_report.json", j);
    validate_json(out_prefix + "_report.json");
    std::cerr << "gmm: agreement " << relabel.agreement_percent << "% -> " << assignments_csv
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bimodality

int cmd_bimodality(const std::string& scores_path, const std::string& out_prefix,
                   const vp::RunConfig& cfg) {
    const PcScores scores = read_pc_scores(scores_path);
    std::vector<std::vector<std::string>> rows;
    ordered_json j;
    j["table"] = "pc_bimodality";
    j["rows"] = ordered_json::array();
    for (Eigen::Index c = 0; c < scores.scores.cols(); ++c) {
        std::vector<double> values(static_cast<std::size_t>(scores.scores.rows()));
        for (Eigen::Index i = 0; i < scores.scores.rows(); ++i) {
            values[static_cast<std::size_t>(i)] = scores.scores(i, c);
        }
        const vp::BimodalityScore score =
            vp::bimodality_score(values, cfg.seed + static_cast<std::uint64_t>(c));
        rows.push_back({"pc" + std::to_string(c + 1), vp::csv::format_double(score.ashman_d),
                        score.bimodal ? "true" : "false"});
        j["rows"].push_back({{"pc", static_cast<int>(c + 1)},
                             {"ashman_d", score.ashman_d},
                             {"bimodal", score.bimodal}});
    }
    const std::string csv_path = out_prefix + "_bimodality.csv";
    vp::csv::write_file(csv_path, {"pc", "ashman_d", "bimodal"}, rows);
    vp::csv::read_file(csv_path);
    write_json(out_prefix + "_bimodality.json", j);
    std::cerr << "bimodality -> " << csv_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// mlp

int cmd_mlp(const std::string& speakers_path, const std::string& embeddings_path,
            const std::string& out_prefix, const vp::RunConfig& cfg) {
    const auto records = vp::read_speakers(speakers_path);
    const ModelingMatrix mm = build_modeling_matrix(records);
    const Eigen::MatrixXd x = to_matrix(mm.matrix.values);

    const auto embeddings = vp::mean_by_owner(vp::load_embeddings(embeddings_path));
    std::map<std::string, std::size_t> emb_row;
    for (std::size_t i = 0; i < embeddings.size(); ++i) emb_row[embeddings[i].owner_id] = i;
    const auto idx = align_rows(mm.matrix.speaker_ids, emb_row, speakers_path, embeddings_path);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(idx.size()),
                      static_cast<Eigen::Index>(embeddings.front().vector.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < embeddings[idx[i]].vector.size(); ++j) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                embeddings[idx[i]].vector[j];
        }
    }

    vp::MlpConfig mcfg = cfg.mlp;
    mcfg.seed = cfg.seed;
    const vp::CvResult cv = vp::mlp_eval_cv(x, y, cfg.folds, mcfg);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t f = 0; f < cv.per_fold_mean_cosine.size(); ++f) {
        rows.push_back({std::to_string(f + 1), vp::csv::format_double(cv.per_fold_mean_cosine[f])});
    }
    rows.push_back({"overall", vp::csv::format_double(cv.overall_mean_cosine)});
    const std::string csv_path = out_prefix + "_mlp.csv";
    vp::csv::write_file(csv_path, {"fold", "mean_cosine_distance"}, rows);
    vp::csv::read_file(csv_path);

    ordered_json j;
    j["table"] = "mlp_regression";
    j["inputs"] = mm.names;
    j["hidden"] = mcfg.hidden;
    j["outputs"] = y.cols();
    j["folds"] = cfg.folds;
    j["epochs"] = mcfg.epochs;
    j["transforms"] = transforms_json(mm.matrix.normalizer);
    j["per_fold_mean_cosine"] = cv.per_fold_mean_cosine;
    j["overall_mean_cosine"] = cv.overall_mean_cosine;
    write_json(out_prefix + "_mlp.json", j);
    std::cerr << "mlp: overall mean cosine distance " << cv.overall_mean_cosine << " -> "
              << csv_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// age

int cmd_age(const std::string& scores_path, const std::string& embeddings_path,
            const std::string& metadata_path, const std::string& out_prefix,
            const vp::RunConfig& cfg) {
    const PcScores scores = read_pc_scores(scores_path);
    const auto embeddings = vp::mean_by_owner(vp::load_embeddings(embeddings_path));
    const auto metadata = vp::read_metadata(metadata_path);
    std::map<std::string, std::size_t> emb_row;
    for (std::size_t i = 0; i < embeddings.size(); ++i) emb_row[embeddings[i].owner_id] = i;

    std::vector<std::size_t> score_rows;
    std::vector<std::size_t> emb_rows;
    std::vector<double> ages;
    for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
        const auto mit = metadata.find(scores.speaker_ids[i]);
        if (mit == metadata.end() || !mit->second.age_years) continue;
        const auto eit = emb_row.find(scores.speaker_ids[i]);
        if (eit == emb_row.end()) {
            throw vp::FormatError("speaker '" + scores.speaker_ids[i] + "' present in " +
                                  scores_path + " but missing from " + embeddings_path);
        }
        score_rows.push_back(i);
        emb_rows.push_back(eit->second);
        ages.push_back(*mit->second.age_years);
    }

    Eigen::MatrixXd pc(static_cast<Eigen::Index>(score_rows.size()), scores.scores.cols());
    Eigen::MatrixXd emb(static_cast<Eigen::Index>(emb_rows.size()),
                        static_cast<Eigen::Index>(embeddings.front().vector.size()));
    for (std::size_t i = 0; i < score_rows.size(); ++i) {
        pc.row(static_cast<Eigen::Index>(i)) =
            scores.scores.row(static_cast<Eigen::Index>(score_rows[i]));
        for (std::size_t j = 0; j < embeddings[emb_rows[i]].vector.size(); ++j) {
            emb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                embeddings[emb_rows[i]].vector[j];
        }
    }

    const vp::AgeReport report = vp::age_report(pc, emb, ages, cfg.seed, cfg.ridge_lambda);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < report.per_pc_r.size(); ++c) {
        rows.push_back({"pc" + std::to_string(c + 1), vp::csv::format_double(report.per_pc_r[c])});
    }
    const std::string csv_path = out_prefix + "_age.csv";
    vp::csv::write_file(csv_path, {"pc", "pearson_r_age"}, rows);
    vp::csv::read_file(csv_path);

    ordered_json j;
    j["table"] = "age_report";
    j["n_speakers"] = report.n_speakers;
    j["per_pc_r"] = report.per_pc_r;
    j["heldout_prediction_r"] = report.heldout_r;
    j["ridge_lambda"] = cfg.ridge_lambda;
    write_json(out_prefix + "_age.json", j);
    std::cerr << "age: held-out r " << report.heldout_r << " -> " << csv_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
    std::string scores_path;
    std::string metadata_path;
    std::string clusters_path;
    std::string color = "gender";
    int x_pc = 1;
    int y_pc = 2;
    std::string out_path;
};

int cmd_plot(const PlotArgs& args) {
    const PcScores scores = read_pc_scores(args.scores_path);
    if (args.x_pc < 1 || args.x_pc > scores.scores.cols() || args.y_pc < 1 ||
        args.y_pc > scores.scores.cols()) {
        throw vp::RangeError("plot: requested pc column out of range");
    }

    std::vector<vp::ScatterSeries> series;
    const auto series_for = [&](const std::string& label, const std::string& color) {
        for (auto& s : series) {
            if (s.label == label) return &s;
        }
        series.push_back({label, color, {}});
        return &series.back();
    };

    if (args.color == "gender") {
        if (args.metadata_path.empty()) {
            throw vp::ColorSourceError("plot: --color gender requires --metadata");
        }
        const auto metadata = vp::read_metadata(args.metadata_path);
        for (const auto& g : {vp::Gender::male, vp::Gender::female, vp::Gender::unknown}) {
            // fixed label order; series appear only when populated
            for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
                const auto it = metadata.find(scores.speaker_ids[i]);
                const vp::Gender gi =
                    (it == metadata.end()) ? vp::Gender::unknown : it->second.gender;
                if (gi != g) continue;
                const std::size_t color_idx = static_cast<std::size_t>(g);
                series_for(vp::gender_name(g), vp::kCategoricalPalette[color_idx])
                    ->points.emplace_back(
                        scores.scores(static_cast<Eigen::Index>(i), args.x_pc - 1),
                        scores.scores(static_cast<Eigen::Index>(i), args.y_pc - 1));
            }
        }
    } else if (args.color == "cluster") {
        if (args.clusters_path.empty()) {
            throw vp::ColorSourceError("plot: --color cluster requires --clusters");
        }
        const ClusterAssignments clusters = read_clusters(args.clusters_path);
        std::map<std::string, std::size_t> row;
        for (std::size_t i = 0; i < clusters.speaker_ids.size(); ++i) {
            row[clusters.speaker_ids[i]] = i;
        }
        for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
            const auto it = row.find(scores.speaker_ids[i]);
            if (it == row.end()) {
                throw vp::ColorSourceError("plot: speaker '" + scores.speaker_ids[i] +
                                           "' missing from " + args.clusters_path);
            }
            const int c = clusters.cluster[it->second];
            std::string label = clusters.cluster_label[it->second];
            if (label.empty()) label = "cluster" + std::to_string(c);
            series_for(label, vp::kCategoricalPalette[static_cast<std::size_t>(c) % 10])
                ->points.emplace_back(scores.scores(static_cast<Eigen::Index>(i), args.x_pc - 1),
                                      scores.scores(static_cast<Eigen::Index>(i), args.y_pc - 1));
        }
    } else if (args.color == "age") {
        if (args.metadata_path.empty()) {
            throw vp::ColorSourceError("plot: --color age requires --metadata");
        }
        const auto metadata = vp::read_metadata(args.metadata_path);
        std::set<int> decades;
        for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
            const auto it = metadata.find(scores.speaker_ids[i]);
            if (it == metadata.end() || !it->second.age_years) continue;
            decades.insert(static_cast<int>(*it->second.age_years / 10.0) * 10);
        }
        if (decades.empty()) throw vp::ColorSourceError("plot: no speaker has an age");
        std::map<int, std::string> decade_color;
        constexpr std::size_t n_stops = std::size(vp::kSequentialPalette);
        std::size_t rank = 0;
        for (int d : decades) {
            const std::size_t stop =
                decades.size() == 1
                    ? 0
                    : rank * (n_stops - 1) / (decades.size() - 1);
            decade_color[d] = vp::kSequentialPalette[stop];
            ++rank;
        }
        for (int d : decades) {
            for (std::size_t i = 0; i < scores.speaker_ids.size(); ++i) {
                const auto it = metadata.find(scores.speaker_ids[i]);
                if (it == metadata.end() || !it->second.age_years) continue;
                if (static_cast<int>(*it->second.age_years / 10.0) * 10 != d) continue;
                series_for(std::to_string(d) + "s", decade_color[d])
                    ->points.emplace_back(
                        scores.scores(static_cast<Eigen::Index>(i), args.x_pc - 1),
                        scores.scores(static_cast<Eigen::Index>(i), args.y_pc - 1));
            }
        }
    } else {
        throw vp::ColorSourceError("plot: --color must be gender, age or cluster");
    }

    vp::write_scatter_svg(args.out_path, series, "PC " + std::to_string(args.x_pc),
                          "PC " + std::to_string(args.y_pc));
    std::ifstream check(args.out_path);
    const std::string content((std::istreambuf_iterator<char>(check)),
                              std::istreambuf_iterator<char>());
    if (content.find("</svg>") == std::string::npos) {
        throw vp::FormatError("plot: output failed validation");
    }
    std::cerr << "plot -> " << args.out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speaker-embedding interpretability toolkit"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--config", global.config_path, "configuration file (key = value sections)");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "seed for every random choice");
    int jobs_value = 1;
    auto* jobs_opt = app.add_option("--jobs", jobs_value, "worker threads for analyze");

    AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "extract acoustic descriptors from WAV files");
    c_analyze->add_option("files", analyze.inputs, "input WAV files")->required();
    c_analyze->add_option("--sidecar", analyze.sidecar_path, "segment_id,stoi,pesq CSV");
    c_analyze->add_option("--out", analyze.out_path, "features CSV")->required();
    double min_chunk = 30.0;
    auto* min_chunk_opt =
        c_analyze->add_option("--min-chunk-seconds", min_chunk, "minimum segment duration");
    c_analyze->add_option("--group-by", analyze.group_by, "speaker grouping: stem|parent|file")
        ->check(CLI::IsMember({"stem", "parent", "file"}));

    std::string features_path, metadata_path, out_path;
    auto* c_aggregate = app.add_subcommand("aggregate", "per-speaker mean profiles");
    c_aggregate->add_option("--features", features_path, "features CSV")->required();
    c_aggregate->add_option("--metadata", metadata_path, "speaker_id,gender,age CSV")->required();
    c_aggregate->add_option("--out", out_path, "speakers CSV")->required();

    std::string embeddings_path, pca_prefix;
    int kmax = 10;
    auto* c_pca = app.add_subcommand("pca", "fit PCA to speaker embeddings");
    c_pca->add_option("--embeddings", embeddings_path, "embeddings CSV or VXEB binary")
        ->required();
    c_pca->add_option("--kmax", kmax, "components in the quality table and scores");
    c_pca->add_option("--out", pca_prefix, "output prefix")->required();

    GreedyArgs greedy;
    auto* c_greedy = app.add_subcommand("greedy", "greedy linear models per principal dimension");
    c_greedy->add_option("--speakers", greedy.speakers_path, "speakers CSV")->required();
    c_greedy->add_option("--pc-scores", greedy.scores_path, "pc scores CSV")->required();
    c_greedy->add_option("--pcs", greedy.pcs, "number of PCs to model (default: all)");
    c_greedy->add_flag("--gendered", greedy.gendered, "add per-cluster models and sign table");
    c_greedy->add_option("--clusters", greedy.clusters_path, "gmm assignments CSV");
    c_greedy->add_option("--out", greedy.out_prefix, "output prefix")->required();

    std::string gmm_scores, gmm_metadata, gmm_prefix;
    auto* c_gmm = app.add_subcommand("gmm", "2-D gender clustering and relabeling");
    c_gmm->add_option("--pc-scores", gmm_scores, "pc scores CSV")->required();
    c_gmm->add_option("--metadata", gmm_metadata, "speaker metadata CSV")->required();
    c_gmm->add_option("--out", gmm_prefix, "output prefix")->required();

    std::string bim_scores, bim_prefix;
    auto* c_bim = app.add_subcommand("bimodality", "per-PC bimodality scores");
    c_bim->add_option("--pc-scores", bim_scores, "pc scores CSV")->required();
    c_bim->add_option("--out", bim_prefix, "output prefix")->required();

    std::string mlp_speakers, mlp_embeddings, mlp_prefix;
    auto* c_mlp = app.add_subcommand("mlp", "MLP embedding regression with cross validation");
    c_mlp->add_option("--speakers", mlp_speakers, "speakers CSV")->required();
    c_mlp->add_option("--embeddings", mlp_embeddings, "embeddings file")->required();
    c_mlp->add_option("--out", mlp_prefix, "output prefix")->required();

    std::string age_scores, age_embeddings, age_metadata, age_prefix;
    auto* c_age = app.add_subcommand("age", "age correlations and held-out prediction");
    c_age->add_option("--pc-scores", age_scores, "pc scores CSV")->required();
    c_age->add_option("--embeddings", age_embeddings, "embeddings file")->required();
    c_age->add_option("--metadata", age_metadata, "speaker metadata CSV")->required();
    c_age->add_option("--out", age_prefix, "output prefix")->required();

    PlotArgs plot;
    auto* c_plot = app.add_subcommand("plot", "SVG scatter of two principal dimensions");
    c_plot->add_option("--pc-scores", plot.scores_path, "pc scores CSV")->required();
    c_plot->add_option("--x", plot.x_pc, "x axis PC (1-based)");
    c_plot->add_option("--y", plot.y_pc, "y axis PC (1-based)");
    c_plot->add_option("--color", plot.color, "gender|age|cluster");
    c_plot->add_option("--metadata", plot.metadata_path, "metadata CSV for gender/age coloring");
    c_plot->add_option("--clusters", plot.clusters_path, "gmm assignments CSV for cluster coloring");
    c_plot->add_option("--out", plot.out_path, "output SVG")->required();

    // let --config/--seed/--jobs appear after the subcommand name
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (seed_opt->count() == 0) global.seed.reset();
        else global.seed = seed_value;
        if (jobs_opt->count() == 0) global.jobs.reset();
        else global.jobs = jobs_value;
        const vp::RunConfig cfg = global.resolve();

        if (c_analyze->parsed()) {
            if (min_chunk_opt->count() > 0) analyze.min_chunk_seconds = min_chunk;
            return cmd_analyze(analyze, cfg);
        }
        if (c_aggregate->parsed()) return cmd_aggregate(features_path, metadata_path, out_path);
        if (c_pca->parsed()) return cmd_pca(embeddings_path, kmax, pca_prefix);
        if (c_greedy->parsed()) return cmd_greedy(greedy, cfg);
        if (c_gmm->parsed()) return cmd_gmm(gmm_scores, gmm_metadata, gmm_prefix, cfg);
        if (c_bim->parsed()) return cmd_bimodality(bim_scores, bim_prefix, cfg);
        if (c_mlp->parsed()) return cmd_mlp(mlp_speakers, mlp_embeddings, mlp_prefix, cfg);
        if (c_age->parsed()) {
            return cmd_age(age_scores, age_embeddings, age_metadata, age_prefix, cfg);
        }
        if (c_plot->parsed()) return cmd_plot(plot);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
