#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/kmeans.hpp"
#include "npcluster/logging.hpp"
#include "npcluster/parallel.hpp"
#include "npcluster/pipeline.hpp"
#include "npcluster/simd/kernels.hpp"
#include "npcluster/svg_plot.hpp"

namespace npcluster::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

// Re-raises a stage failure with the stage name prefixed, keeping its type
// (and therefore its exit code).
template <class F>
auto run_stage(const char* stage, F&& body) {
    const std::string prefix = std::string("[") + stage + "] ";
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const FormatError& e) {
        throw FormatError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const PreconditionError& e) {
        throw PreconditionError(prefix + e.what());
    }
}

class Stopwatch {
public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::size_t worker_budget(const PipelineConfig& c) {
    if (c.deterministic) return 1;
    return c.threads == 0 ? default_thread_count() : c.threads;
}

json manifest_header(const PipelineConfig& config, const char* command) {
    return {
        {"command", command},
        {"manifest_version", kManifestVersion},
        {"config", to_json(config)},
        {"format_versions",
         {{"features", kFeatureVersion}, {"embedding", kEmbeddingVersion}, {"labels", "text-1"}}},
        {"simd", std::string(simd::isa_name(simd::kernels().isa))},
    };
}

std::string suffix(const PipelineConfig& c, std::size_t rep) {
    return c.replications == 1 ? std::string() : "_seed" + std::to_string(c.seed + rep);
}

FeatureFile load_features(const PipelineConfig& c) {
    if (c.paths.features.empty()) throw ConfigError("--features is required");
    return read_features(c.paths.features, format_for_path(c.paths.features), c.csv_label_column);
}

// Ground truth from --labels, else the label block of the input file.
std::optional<LabelVector> ground_truth(const PipelineConfig& c, const std::optional<LabelVector>& from_input) {
    if (!c.paths.labels.empty()) return read_labels(c.paths.labels);
    return from_input;
}

manifold::UmapConfig umap_for(const PipelineConfig& c, std::size_t n, std::uint64_t seed, std::size_t threads) {
    manifold::UmapConfig u = c.umap;
    u.seed = seed;
    u.deterministic = c.deterministic;
    u.threads = threads;
    if (n < 3) throw PreconditionError("embedding needs at least 3 samples, got " + std::to_string(n));
    if (u.n_neighbors >= n) {
        log_info("n_neighbors " + std::to_string(u.n_neighbors) + " clamped to " + std::to_string(n - 1) +
                 " for n=" + std::to_string(n));
        u.n_neighbors = n - 1;
    }
    return u;
}

EmbeddingMatrix embed_features(const PipelineConfig& c, const FeatureMatrix& x, std::uint64_t seed,
                               std::size_t threads, json& record) {
    const auto u = umap_for(c, x.rows(), seed, threads);
    record["seed"] = seed;
    record["n_neighbors_used"] = u.n_neighbors;
    record["n_epochs_used"] = u.epochs_for(x.rows());
    return manifold::embed(x, u);
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

struct ClusterRun {
    LabelVector labels;
    std::size_t inferred_k = 0;
    json model;
    json record;
};

ClusterRun cluster_dpgmm(const PipelineConfig& c, const EmbeddingMatrix& y, std::uint64_t seed,
                         std::size_t threads) {
    dpgmm::DpgmmConfig d = c.dpgmm;
    d.seed = seed;
    d.threads = threads;
    const auto fit = dpgmm::fit(y, d);
    const auto& state = fit.state;
    const auto& result = fit.result;

    std::vector<std::size_t> counts(state.size(), 0);
    for (auto l : result.labels) ++counts[l];
    json components = json::array();
    for (std::size_t k = 0; k < state.size(); ++k) {
        if (counts[k] == 0) continue;
        json mean = json::array();
        for (Eigen::Index j = 0; j < result.component_means[k].size(); ++j)
            mean.push_back(result.component_means[k][j]);
        components.push_back({{"index", k},
                              {"assigned", counts[k]},
                              {"weight", result.mixture_weights[k]},
                              {"mean", mean},
                              {"covariance", matrix_json(result.component_covariances[k])}});
    }
    const double final_elbo = state.elbo_trace.empty() ? 0.0 : state.elbo_trace.back();
    ClusterRun run;
    run.labels = result.labels;
    run.inferred_k = result.inferred_k;
    run.model = {{"algorithm", "dpgmm"},
                 {"seed", seed},
                 {"inferred_k", result.inferred_k},
                 {"final_elbo", final_elbo},
                 {"iterations", state.iterations},
                 {"converged", state.converged},
                 {"best_init", fit.best_run},
                 {"init_elbos", fit.run_elbos},
                 {"components", components}};
    run.record = {{"seed", seed},
                  {"inferred_k", result.inferred_k},
                  {"final_elbo", final_elbo},
                  {"iterations", state.iterations},
                  {"converged", state.converged}};
    return run;
}

ClusterRun cluster_kmeans(const PipelineConfig& c, const EmbeddingMatrix& y, std::uint64_t seed) {
    const auto fit = baselines::kmeans_fit(y, *c.kmeans_k, c.kmeans_n_init, baselines::kDefaultKmeansIterations, seed);
    json centers = json::array();
    for (std::size_t j = 0; j < fit.k; ++j) {
        const auto row = fit.center(j);
        centers.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    ClusterRun run;
    run.labels = fit.labels;
    run.inferred_k = relabel_contiguous(fit.labels).second;
    run.model = {{"algorithm", "kmeans"}, {"seed", seed},         {"k", fit.k},
                 {"inertia", fit.inertia}, {"iterations", fit.iterations}, {"best_init", fit.best_init},
                 {"seeding", fit.seeding}, {"centers", centers}};
    run.record = {{"seed", seed}, {"inferred_k", run.inferred_k}, {"inertia", fit.inertia}};
    return run;
}

json report_json(const metrics::MetricsReport& r) { return json::parse(metrics::to_json(r)); }

json aggregate_json(const std::vector<metrics::MetricsReport>& reports, const std::vector<std::size_t>& ks) {
    json out;
    std::vector<double> k(ks.begin(), ks.end());
    const auto agg_k = aggregate(k);
    out["inferred_k"] = {{"mean", agg_k.mean}, {"stddev", agg_k.stddev}};
    out["replications"] = ks.size();
    if (!reports.empty()) {
        const auto field = [&](double metrics::MetricsReport::*m) {
            std::vector<double> v;
            for (const auto& r : reports) v.push_back(r.*m);
            const auto a = aggregate(v);
            return json{{"mean", a.mean}, {"stddev", a.stddev}, {"values", v}};
        };
        out["acc"] = field(&metrics::MetricsReport::acc);
        out["nmi"] = field(&metrics::MetricsReport::nmi);
        out["ari"] = field(&metrics::MetricsReport::ari);
    }
    return out;
}

}  // namespace

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) return a;
    const double n = static_cast<double>(values.size());
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / (n - 1.0));
    }
    return a;
}

EmbedOutput cmd_embed(const PipelineConfig& config) {
    run_stage("config", [&] { config.validate(); });
    Stopwatch total;
    json manifest = manifest_header(config, "embed");
    auto input = run_stage("read", [&] { return load_features(config); });
    json record;
    Stopwatch sw;
    auto y = run_stage("embed", [&] {
        return embed_features(config, input.features, config.seed, worker_budget(config), record);
    });
    const double embed_ms = sw.elapsed_ms();
    const fs::path path = config.paths.out / "embedding.fmat";
    run_stage("write", [&] {
        ensure_dir(config.paths.out);
        write_embedding(y, input.labels ? &*input.labels : nullptr, path, FileFormat::binary);
    });
    manifest["seeds"] = {{"umap", config.seed}};
    manifest["embed"] = record;
    manifest["input"] = {{"n", input.features.rows()}, {"d", input.features.cols()}};
    manifest["outputs"] = {{"embedding", path.filename().string()}};
    manifest["timings_ms"] = {{"embed", embed_ms}, {"total", total.elapsed_ms()}};
    run_stage("write", [&] { write_json(config.paths.out / "embed_manifest.json", manifest); });
    return {std::move(y), std::move(input.labels), path, std::move(manifest)};
}

ClusterOutput cmd_cluster(const PipelineConfig& config) {
    run_stage("config", [&] { config.validate(); });
    Stopwatch total;
    json manifest = manifest_header(config, "cluster");

    // Either a fixed embedding shared by all replications, or features that
    // each replication embeds with its own seed.
    std::optional<EmbeddingFile> fixed;
    std::optional<FeatureFile> features;
    run_stage("read", [&] {
        if (!config.paths.embedding.empty()) {
            fixed = read_embedding(config.paths.embedding, format_for_path(config.paths.embedding),
                                   config.csv_label_column);
        } else if (!config.paths.features.empty()) {
            features = load_features(config);
        } else {
            throw ConfigError("cluster needs --embedding or --features");
        }
    });
    const auto truth = run_stage("read", [&] {
        return ground_truth(config, fixed ? fixed->labels : features->labels);
    });
    const std::size_t n = fixed ? fixed->embedding.rows() : features->features.rows();
    if (truth && truth->size() != n) {
        throw PreconditionError("[evaluate] ground truth has " + std::to_string(truth->size()) +
                                " labels for " + std::to_string(n) + " samples");
    }
    if (fixed && config.algorithm == Algorithm::dpgmm) {
        run_stage("config", [&] { config.dpgmm.validate(fixed->embedding.cols()); });
    }

    const std::size_t reps = config.replications;
    const std::size_t budget = worker_budget(config);
    const std::size_t outer = std::min(reps, budget);
    const std::size_t inner = std::max<std::size_t>(1, budget / outer);
    std::vector<ClusterRun> runs(reps);
    std::vector<json> embed_records(reps);
    std::vector<double> rep_ms(reps, 0.0);
    run_stage("cluster", [&] {
        parallel_for(reps, outer, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                Stopwatch sw;
                const std::uint64_t seed = config.seed + r;
                std::optional<EmbeddingMatrix> local;
                if (!fixed) local = embed_features(config, features->features, seed, inner, embed_records[r]);
                const EmbeddingMatrix& y = fixed ? fixed->embedding : *local;
                runs[r] = config.algorithm == Algorithm::dpgmm ? cluster_dpgmm(config, y, seed, inner)
                                                               : cluster_kmeans(config, y, seed);
                rep_ms[r] = sw.elapsed_ms();
            }
        });
    });

    ClusterOutput out;
    json replications = json::array();
    run_stage("write", [&] {
        ensure_dir(config.paths.out);
        for (std::size_t r = 0; r < reps; ++r) {
            const fs::path labels_path = config.paths.out / ("labels" + suffix(config, r) + ".txt");
            const fs::path model_path = config.paths.out / ("model" + suffix(config, r) + ".json");
            write_labels(runs[r].labels, labels_path);
            json model = runs[r].model;
            model["config"] = to_json(config);
            write_json(model_path, model);
            json rec = runs[r].record;
            rec["labels"] = labels_path.filename().string();
            rec["model"] = model_path.filename().string();
            rec["time_ms"] = rep_ms[r];
            if (!fixed) rec["embed"] = embed_records[r];
            replications.push_back(rec);
            out.label_paths.push_back(labels_path);
        }
    });
    for (auto& run : runs) {
        out.inferred_k.push_back(run.inferred_k);
        out.labels.push_back(std::move(run.labels));
    }
    if (truth) {
        run_stage("evaluate", [&] {
            for (std::size_t r = 0; r < reps; ++r) {
                out.reports.push_back(metrics::evaluate(*truth, out.labels[r], config.nmi_normalization));
                replications[r]["metrics"] = report_json(out.reports.back());
            }
        });
    }

    std::vector<std::uint64_t> seeds(reps);
    std::iota(seeds.begin(), seeds.end(), config.seed);
    manifest["seeds"] = seeds;
    manifest["input"] = {{"n", n}, {"source", fixed ? "embedding" : "features"}};
    manifest["replications"] = replications;
    manifest["inferred_k"] = out.inferred_k.front();
    if (config.algorithm == Algorithm::dpgmm) manifest["final_elbo"] = replications[0]["final_elbo"];
    if (reps > 1) {
        const json agg = aggregate_json(out.reports, out.inferred_k);
        run_stage("write", [&] { write_json(config.paths.out / "aggregate.json", agg); });
        manifest["aggregate"] = agg;
    }
    if (!truth) manifest["evaluation"] = "skipped: no ground-truth labels";
    manifest["timings_ms"] = {{"total", total.elapsed_ms()}};
    run_stage("write", [&] { write_json(config.paths.out / "cluster_manifest.json", manifest); });
    out.manifest = std::move(manifest);
    return out;
}

metrics::MetricsReport cmd_evaluate(const fs::path& predicted, const fs::path& truth, const fs::path& out_json,
                                    metrics::NmiNormalization normalization) {
    const auto [pred, gt] = run_stage("read", [&] { return std::pair(read_labels(predicted), read_labels(truth)); });
    const auto report = run_stage("evaluate", [&] { return metrics::evaluate(gt, pred, normalization); });
    if (!out_json.empty()) {
        run_stage("write", [&] {
            // An existing directory gets the usual metrics.json inside it.
            const fs::path target = fs::is_directory(out_json) ? out_json / "metrics.json" : out_json;
            if (target.has_parent_path()) ensure_dir(target.parent_path());
            write_text(target, metrics::to_json(report) + "\n");
        });
    }
    return report;
}

void cmd_plot(const fs::path& embedding, const fs::path& labels, const fs::path& out_svg) {
    const auto [y, l] = run_stage("read", [&] {
        auto file = read_embedding(embedding, format_for_path(embedding));
        return std::pair(std::move(file.embedding), read_labels(labels));
    });
    const auto svg = run_stage("plot", [&] { return render_scatter_svg(y, l); });
    run_stage("write", [&] {
        if (out_svg.has_parent_path()) ensure_dir(out_svg.parent_path());
        write_text(out_svg, svg);
    });
}

json cmd_pipeline(const PipelineConfig& config) {
    run_stage("config", [&] { config.validate(); });
    Stopwatch total;
    json manifest = manifest_header(config, "pipeline");
    json stages = json::object();
    run_stage("write", [&] { ensure_dir(config.paths.out); });
    auto input = run_stage("read", [&] { return load_features(config); });
    const auto truth = run_stage("read", [&] { return ground_truth(config, input.labels); });
    const std::size_t n = input.features.rows();
    if (truth && truth->size() != n) {
        throw PreconditionError("[evaluate] ground truth has " + std::to_string(truth->size()) +
                                " labels for " + std::to_string(n) + " samples");
    }
    if (config.algorithm == Algorithm::dpgmm) run_stage("config", [&] { config.dpgmm.validate(config.umap.dim); });

    const std::size_t reps = config.replications;
    const std::size_t budget = worker_budget(config);
    const std::size_t outer = std::min(reps, budget);
    const std::size_t inner = std::max<std::size_t>(1, budget / outer);

    struct Rep {
        std::optional<EmbeddingMatrix> y;
        ClusterRun run;
        json embed_record;
        double embed_ms = 0.0, cluster_ms = 0.0;
    };
    std::vector<Rep> reps_out(reps);
    parallel_for(reps, outer, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            auto& rep = reps_out[r];
            const std::uint64_t seed = config.seed + r;
            Stopwatch sw;
            rep.y = run_stage("embed", [&] {
                return embed_features(config, input.features, seed, inner, rep.embed_record);
            });
            rep.embed_ms = sw.elapsed_ms();
            Stopwatch sc;
            rep.run = run_stage("cluster", [&] {
                return config.algorithm == Algorithm::dpgmm ? cluster_dpgmm(config, *rep.y, seed, inner)
                                                            : cluster_kmeans(config, *rep.y, seed);
            });
            rep.cluster_ms = sc.elapsed_ms();
        }
    });

    json replications = json::array();
    std::vector<metrics::MetricsReport> reports;
    std::vector<std::size_t> ks;
    for (std::size_t r = 0; r < reps; ++r) {
        auto& rep = reps_out[r];
        const std::string sfx = suffix(config, r);
        const fs::path emb_path = config.paths.out / ("embedding" + sfx + ".fmat");
        const fs::path labels_path = config.paths.out / ("labels" + sfx + ".txt");
        const fs::path model_path = config.paths.out / ("model" + sfx + ".json");
        const fs::path svg_path = config.paths.out / ("plot" + sfx + ".svg");
        json rec = rep.run.record;
        run_stage("write", [&] {
            write_embedding(*rep.y, truth ? &*truth : nullptr, emb_path, FileFormat::binary);
            write_labels(rep.run.labels, labels_path);
            json model = rep.run.model;
            model["config"] = to_json(config);
            write_json(model_path, model);
        });
        if (truth) {
            const auto report = run_stage("evaluate", [&] {
                return metrics::evaluate(*truth, rep.run.labels, config.nmi_normalization);
            });
            run_stage("write", [&] {
                write_text(config.paths.out / ("metrics" + sfx + ".json"), metrics::to_json(report) + "\n");
            });
            rec["metrics"] = report_json(report);
            reports.push_back(report);
        }
        if (rep.y->cols() == 2) {
            run_stage("plot", [&] { write_text(svg_path, render_scatter_svg(*rep.y, rep.run.labels)); });
            rec["plot"] = svg_path.filename().string();
        } else {
            rec["plot"] = "skipped: embedding dimension is not 2";
        }
        rec["embed"] = rep.embed_record;
        rec["embedding"] = emb_path.filename().string();
        rec["labels"] = labels_path.filename().string();
        rec["model"] = model_path.filename().string();
        rec["timings_ms"] = {{"embed", rep.embed_ms}, {"cluster", rep.cluster_ms}};
        replications.push_back(rec);
        ks.push_back(rep.run.inferred_k);
    }

    std::vector<std::uint64_t> seeds(reps);
    std::iota(seeds.begin(), seeds.end(), config.seed);
    manifest["seeds"] = seeds;
    manifest["input"] = {{"n", n}, {"d", input.features.cols()}, {"labelled", truth.has_value()}};
    manifest["replications"] = replications;
    manifest["inferred_k"] = ks.front();
    if (config.algorithm == Algorithm::dpgmm) manifest["final_elbo"] = replications[0]["final_elbo"];
    stages["embed"] = "done";
    stages["cluster"] = "done";
    stages["evaluate"] = truth ? "done" : "skipped: no ground-truth labels";
    stages["plot"] = config.umap.dim == 2 ? "done" : "skipped: embedding dimension is not 2";
    manifest["stages"] = stages;
    if (truth) manifest["metrics"] = replications[0]["metrics"];
    if (reps > 1) {
        const json agg = aggregate_json(reports, ks);
        run_stage("write", [&] { write_json(config.paths.out / "aggregate.json", agg); });
        manifest["aggregate"] = agg;
    }
    manifest["timings_ms"] = {{"total", total.elapsed_ms()}};
    run_stage("write", [&] { write_json(config.paths.out / "manifest.json", manifest); });
    return manifest;
}

}  // namespace npcluster::cli
