#pragma once

// Command orchestration behind the npcluster CLI: configuration layering,
// the embed / cluster / evaluate / plot / pipeline stages, and run manifests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "npcluster/core_data.hpp"
#include "npcluster/dpgmm.hpp"
#include "npcluster/manifold.hpp"
#include "npcluster/metrics.hpp"

namespace npcluster::cli {

enum class Algorithm { dpgmm, kmeans };

struct Paths {
    std::filesystem::path features;
    std::filesystem::path labels;     // optional ground truth
    std::filesystem::path embedding;  // optional precomputed embedding (cluster)
    std::filesystem::path predicted;  // evaluate / plot input
    std::filesystem::path out = ".";
};

struct PipelineConfig {
    manifold::UmapConfig umap;
    dpgmm::DpgmmConfig dpgmm;
    Algorithm algorithm = Algorithm::dpgmm;
    std::optional<std::size_t> kmeans_k;
    std::size_t kmeans_n_init = 5;
    std::size_t replications = 1;
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::size_t threads = 0;
    bool csv_label_column = false;
    metrics::NmiNormalization nmi_normalization = metrics::NmiNormalization::arithmetic;
    Paths paths;

    void validate() const;
};

// Applies a JSON config document on top of `config` (unknown keys rejected).
void apply_config_json(PipelineConfig& config, const nlohmann::json& doc);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

// Full echo used in manifests; apply_config_json(to_json(c)) reproduces c.
nlohmann::json to_json(const PipelineConfig& config);

// Exit codes of the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitNumerical = 4,
    kExitPrecondition = 5,
};

// Maps the in-flight exception to an exit code; call inside a catch block.
int exit_code_for_current_exception();

struct EmbedOutput {
    EmbeddingMatrix embedding;
    std::optional<LabelVector> labels;
    std::filesystem::path embedding_path;
    nlohmann::json manifest;
};

struct ClusterOutput {
    std::vector<LabelVector> labels;  // one per replication
    std::vector<std::filesystem::path> label_paths;
    std::vector<std::size_t> inferred_k;
    std::vector<metrics::MetricsReport> reports;  // empty without ground truth
    nlohmann::json manifest;
};

// embed: features -> <out>/embedding.fmat (+ embed_manifest.json).
EmbedOutput cmd_embed(const PipelineConfig& config);

// cluster: embedding (or features, embedded inline) -> labels, model dump,
// manifest; with replications > 1 also an aggregate report.
ClusterOutput cmd_cluster(const PipelineConfig& config);

// evaluate: writes the report to out_json (a directory gets metrics.json
// inside) and returns it.
metrics::MetricsReport cmd_evaluate(const std::filesystem::path& predicted, const std::filesystem::path& truth,
                                    const std::filesystem::path& out_json,
                                    metrics::NmiNormalization normalization = metrics::NmiNormalization::arithmetic);

void cmd_plot(const std::filesystem::path& embedding, const std::filesystem::path& labels,
              const std::filesystem::path& out_svg);

// embed -> cluster -> evaluate (when labelled) -> plot; writes manifest.json.
nlohmann::json cmd_pipeline(const PipelineConfig& config);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one value
};
Aggregate aggregate(const std::vector<double>& values);

}  // namespace npcluster::cli
