#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/logging.hpp"
#include "npcluster/pipeline.hpp"

namespace {

using npcluster::cli::PipelineConfig;

// Flag values are collected separately so that only flags actually given
// override the config file.
struct Overrides {
    std::string config_file;
    std::optional<std::string> features, labels, embedding, out, algorithm, init;
    std::optional<std::size_t> neighbors, dim, max_components, k, replications, threads, n_init, max_iter;
    std::optional<double> min_dist, alpha, gamma, dof;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    bool label_column = false;
};

void add_pipeline_flags(CLI::App& cmd, Overrides& o, bool clustering) {
    cmd.add_option("--config", o.config_file, "JSON config file (flags take precedence)");
    cmd.add_option("--features", o.features, "feature matrix (.fmat binary or .csv)");
    cmd.add_option("--labels", o.labels, "ground-truth label file");
    cmd.add_option("--out", o.out, "output directory");
    cmd.add_option("--neighbors", o.neighbors, "UMAP n_neighbors");
    cmd.add_option("--min-dist", o.min_dist, "UMAP min_dist");
    cmd.add_option("--dim", o.dim, "embedding dimension p");
    cmd.add_option("--init", o.init, "layout initialisation: spectral or random");
    cmd.add_option("--seed", o.seed, "base seed");
    cmd.add_flag("--deterministic", o.deterministic, "single-threaded, bitwise reproducible");
    cmd.add_option("--threads", o.threads, "worker threads (0 = automatic)");
    cmd.add_flag("--label-column", o.label_column, "CSV input carries a trailing label column");
    if (!clustering) return;
    cmd.add_option("--embedding", o.embedding, "precomputed embedding (cluster only)");
    cmd.add_option("--max-components", o.max_components, "truncation level K");
    cmd.add_option("--alpha", o.alpha, "DP concentration");
    cmd.add_option("--gamma", o.gamma, "Normal-Wishart mean precision");
    cmd.add_option("--dof", o.dof, "Wishart degrees of freedom (default p)");
    cmd.add_option("--n-init", o.n_init, "restarts");
    cmd.add_option("--max-iter", o.max_iter, "coordinate-ascent iterations per restart");
    cmd.add_option("--algorithm", o.algorithm, "dpgmm or kmeans")->check(CLI::IsMember({"dpgmm", "kmeans"}));
    cmd.add_option("--k", o.k, "number of clusters for kmeans");
    cmd.add_option("--replications", o.replications, "independent runs with seeds seed..seed+R-1");
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c;
    if (!o.config_file.empty()) npcluster::cli::apply_config_file(c, o.config_file);
    if (o.features) c.paths.features = *o.features;
    if (o.labels) c.paths.labels = *o.labels;
    if (o.embedding) c.paths.embedding = *o.embedding;
    if (o.out) c.paths.out = *o.out;
    if (o.neighbors) c.umap.n_neighbors = *o.neighbors;
    if (o.min_dist) c.umap.min_dist = *o.min_dist;
    if (o.dim) c.umap.dim = *o.dim;
    if (o.init) {
        if (*o.init != "spectral" && *o.init != "random") throw npcluster::ConfigError("--init must be spectral or random");
        c.umap.init = *o.init == "spectral" ? npcluster::manifold::InitMethod::spectral
                                            : npcluster::manifold::InitMethod::random;
    }
    if (o.seed) c.seed = *o.seed;
    if (o.deterministic) c.deterministic = true;
    if (o.threads) c.threads = *o.threads;
    if (o.label_column) c.csv_label_column = true;
    if (o.max_components) c.dpgmm.max_components = *o.max_components;
    if (o.alpha) c.dpgmm.concentration = *o.alpha;
    if (o.gamma) c.dpgmm.mean_precision = *o.gamma;
    if (o.dof) c.dpgmm.wishart_dof = *o.dof;
    if (o.n_init) c.dpgmm.n_init = *o.n_init;
    if (o.max_iter) c.dpgmm.max_iter = *o.max_iter;
    if (o.algorithm) {
        c.algorithm = *o.algorithm == "kmeans" ? npcluster::cli::Algorithm::kmeans : npcluster::cli::Algorithm::dpgmm;
    }
    if (o.k) c.kmeans_k = *o.k;
    if (o.replications) c.replications = *o.replications;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"npcluster: manifold projection and Dirichlet-process mixture clustering"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress informational log lines");

    Overrides embed_o, cluster_o, pipeline_o;
    auto* embed = app.add_subcommand("embed", "project features to a low-dimensional embedding");
    add_pipeline_flags(*embed, embed_o, false);
    auto* cluster = app.add_subcommand("cluster", "cluster an embedding (or features, embedded inline)");
    add_pipeline_flags(*cluster, cluster_o, true);
    auto* pipeline = app.add_subcommand("pipeline", "embed, cluster, evaluate and plot");
    add_pipeline_flags(*pipeline, pipeline_o, true);

    std::string pred, truth, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "ACC / NMI / ARI of predicted against true labels");
    evaluate->add_option("--pred", pred, "predicted labels")->required();
    evaluate->add_option("--labels,--truth", truth, "ground-truth labels")->required();
    evaluate->add_option("--out", eval_out, "JSON report path or directory");

    std::string plot_embedding, plot_labels, plot_out;
    auto* plot = app.add_subcommand("plot", "SVG scatter of a 2-D embedding");
    plot->add_option("--embedding", plot_embedding, "embedding file")->required();
    plot->add_option("--labels", plot_labels, "label file")->required();
    plot->add_option("--out", plot_out, "output SVG")->required();

    for (auto* sub : {embed, cluster, pipeline, evaluate, plot}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : npcluster::cli::kExitConfig;
    }

    if (quiet) {
        npcluster::set_log_sink([](npcluster::LogLevel level, std::string_view msg) {
            if (level != npcluster::LogLevel::info) std::cerr << "[npcluster] " << msg << '\n';
        });
    }

    try {
        if (*embed) {
            const auto out = npcluster::cli::cmd_embed(resolve(embed_o));
            std::cout << out.embedding_path.string() << '\n';
        } else if (*cluster) {
            const auto out = npcluster::cli::cmd_cluster(resolve(cluster_o));
            std::cout << out.manifest.dump(2) << '\n';
        } else if (*pipeline) {
            std::cout << npcluster::cli::cmd_pipeline(resolve(pipeline_o)).dump(2) << '\n';
        } else if (*evaluate) {
            const auto report = npcluster::cli::cmd_evaluate(pred, truth, eval_out);
            std::cout << npcluster::metrics::to_json(report) << '\n';
        } else if (*plot) {
            npcluster::cli::cmd_plot(plot_embedding, plot_labels, plot_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "npcluster: error: " << e.what() << '\n';
        return npcluster::cli::exit_code_for_current_exception();
    }
    return 0;
}
