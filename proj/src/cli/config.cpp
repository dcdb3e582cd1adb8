#include <exception>
#include <fstream>
#include <sstream>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/pipeline.hpp"

namespace npcluster::cli {

using nlohmann::json;

namespace {

const char* name(Algorithm a) { return a == Algorithm::dpgmm ? "dpgmm" : "kmeans"; }
const char* name(manifold::InitMethod m) { return m == manifold::InitMethod::spectral ? "spectral" : "random"; }
const char* name(dpgmm::ScaleMatrixMode m) {
    return m == dpgmm::ScaleMatrixMode::empirical_precision ? "empirical_precision" : "identity";
}
const char* name(dpgmm::PriorMeanMode m) { return m == dpgmm::PriorMeanMode::empirical ? "empirical" : "zero"; }
const char* name(metrics::NmiNormalization m) {
    return m == metrics::NmiNormalization::arithmetic ? "arithmetic" : "geometric";
}

template <class T>
T get(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + "' has the wrong type");
    }
}

std::string get_choice(const json& j, const std::string& where, std::initializer_list<const char*> choices) {
    const auto s = get<std::string>(j, where);
    for (const char* c : choices)
        if (s == c) return s;
    std::string allowed;
    for (const char* c : choices) allowed += std::string(allowed.empty() ? "" : ", ") + c;
    throw ConfigError("config key '" + where + "' must be one of: " + allowed);
}

void reject_unknown(const std::string& section) { throw ConfigError("unknown config key '" + section + "'"); }

void apply_umap(manifold::UmapConfig& u, const json& doc) {
    for (const auto& [key, v] : doc.items()) {
        const std::string where = "umap." + key;
        if (key == "n_neighbors") u.n_neighbors = get<std::size_t>(v, where);
        else if (key == "min_dist") u.min_dist = get<double>(v, where);
        else if (key == "spread") u.spread = get<double>(v, where);
        else if (key == "dim") u.dim = get<std::size_t>(v, where);
        else if (key == "n_epochs") {
            if (v.is_null()) u.n_epochs.reset();
            else u.n_epochs = get<std::size_t>(v, where);
        } else if (key == "negative_sample_rate") u.negative_sample_rate = get<std::size_t>(v, where);
        else if (key == "learning_rate") u.initial_learning_rate = get<double>(v, where);
        else if (key == "init") {
            u.init = get_choice(v, where, {"spectral", "random"}) == "spectral" ? manifold::InitMethod::spectral
                                                                               : manifold::InitMethod::random;
        } else if (key == "exact_knn_limit") u.exact_knn_limit = get<std::size_t>(v, where);
        else reject_unknown(where);
    }
}

void apply_dpgmm(dpgmm::DpgmmConfig& d, const json& doc) {
    for (const auto& [key, v] : doc.items()) {
        const std::string where = "dpgmm." + key;
        if (key == "max_components") d.max_components = get<std::size_t>(v, where);
        else if (key == "alpha") d.concentration = get<double>(v, where);
        else if (key == "gamma") d.mean_precision = get<double>(v, where);
        else if (key == "wishart_dof") {
            if (v.is_null()) d.wishart_dof.reset();
            else d.wishart_dof = get<double>(v, where);
        } else if (key == "scale_matrix") {
            d.scale_matrix_mode = get_choice(v, where, {"empirical_precision", "identity"}) == "identity"
                                      ? dpgmm::ScaleMatrixMode::identity
                                      : dpgmm::ScaleMatrixMode::empirical_precision;
        } else if (key == "prior_mean") {
            d.prior_mean = get_choice(v, where, {"empirical", "zero"}) == "zero" ? dpgmm::PriorMeanMode::zero
                                                                              : dpgmm::PriorMeanMode::empirical;
        } else if (key == "max_iter") d.max_iter = get<std::size_t>(v, where);
        else if (key == "n_init") d.n_init = get<std::size_t>(v, where);
        else if (key == "tol") d.convergence_tol = get<double>(v, where);
        else reject_unknown(where);
    }
}

void apply_paths(Paths& p, const json& doc) {
    for (const auto& [key, v] : doc.items()) {
        const std::string where = "paths." + key;
        const auto s = v.is_null() ? std::string() : get<std::string>(v, where);
        if (key == "features") p.features = s;
        else if (key == "labels") p.labels = s;
        else if (key == "embedding") p.embedding = s;
        else if (key == "predicted") p.predicted = s;
        else if (key == "out") p.out = s.empty() ? "." : s;
        else reject_unknown(where);
    }
}

}  // namespace

void PipelineConfig::validate() const {
    umap.validate();
    if (algorithm == Algorithm::kmeans) {
        if (!kmeans_k) throw ConfigError("algorithm=kmeans requires --k");
        if (*kmeans_k == 0) throw ConfigError("--k must be positive");
        if (kmeans_n_init == 0) throw ConfigError("kmeans n_init must be positive");
    }
    // The embedding dimension is the dimension the mixture is fitted in.
    if (algorithm == Algorithm::dpgmm) dpgmm.validate(umap.dim);
    if (replications == 0) throw ConfigError("replications must be at least 1");
}

void apply_config_json(PipelineConfig& config, const json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be an object");
    for (const auto& [key, v] : doc.items()) {
        if (key == "umap") {
            if (!v.is_object()) throw ConfigError("config key 'umap' must be an object");
            apply_umap(config.umap, v);
        } else if (key == "dpgmm") {
            if (!v.is_object()) throw ConfigError("config key 'dpgmm' must be an object");
            apply_dpgmm(config.dpgmm, v);
        } else if (key == "paths") {
            if (!v.is_object()) throw ConfigError("config key 'paths' must be an object");
            apply_paths(config.paths, v);
        } else if (key == "algorithm") {
            config.algorithm =
                get_choice(v, key, {"dpgmm", "kmeans"}) == "kmeans" ? Algorithm::kmeans : Algorithm::dpgmm;
        } else if (key == "k") {
            if (v.is_null()) config.kmeans_k.reset();
            else config.kmeans_k = get<std::size_t>(v, key);
        } else if (key == "kmeans_n_init") config.kmeans_n_init = get<std::size_t>(v, key);
        else if (key == "replications") config.replications = get<std::size_t>(v, key);
        else if (key == "seed") config.seed = get<std::uint64_t>(v, key);
        else if (key == "deterministic") config.deterministic = get<bool>(v, key);
        else if (key == "threads") config.threads = get<std::size_t>(v, key);
        else if (key == "csv_label_column") config.csv_label_column = get<bool>(v, key);
        else if (key == "nmi") {
            config.nmi_normalization = get_choice(v, key, {"arithmetic", "geometric"}) == "geometric"
                                           ? metrics::NmiNormalization::geometric
                                           : metrics::NmiNormalization::arithmetic;
        } else reject_unknown(key);
    }
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse config file " + path.string() + " at byte " + std::to_string(e.byte));
    }
    apply_config_json(config, doc);
}

json to_json(const PipelineConfig& c) {
    json umap = {
        {"n_neighbors", c.umap.n_neighbors},
        {"min_dist", c.umap.min_dist},
        {"spread", c.umap.spread},
        {"dim", c.umap.dim},
        {"n_epochs", c.umap.n_epochs ? json(*c.umap.n_epochs) : json(nullptr)},
        {"negative_sample_rate", c.umap.negative_sample_rate},
        {"learning_rate", c.umap.initial_learning_rate},
        {"init", name(c.umap.init)},
        {"exact_knn_limit", c.umap.exact_knn_limit},
    };
    json dp = {
        {"max_components", c.dpgmm.max_components},
        {"alpha", c.dpgmm.concentration},
        {"gamma", c.dpgmm.mean_precision},
        {"wishart_dof", c.dpgmm.wishart_dof ? json(*c.dpgmm.wishart_dof) : json(nullptr)},
        {"scale_matrix", name(c.dpgmm.scale_matrix_mode)},
        {"prior_mean", name(c.dpgmm.prior_mean)},
        {"max_iter", c.dpgmm.max_iter},
        {"n_init", c.dpgmm.n_init},
        {"tol", c.dpgmm.convergence_tol},
    };
    json paths = {
        {"features", c.paths.features.string()},   {"labels", c.paths.labels.string()},
        {"embedding", c.paths.embedding.string()}, {"predicted", c.paths.predicted.string()},
        {"out", c.paths.out.string()},
    };
    return {
        {"umap", umap},
        {"dpgmm", dp},
        {"algorithm", name(c.algorithm)},
        {"k", c.kmeans_k ? json(*c.kmeans_k) : json(nullptr)},
        {"kmeans_n_init", c.kmeans_n_init},
        {"replications", c.replications},
        {"seed", c.seed},
        {"deterministic", c.deterministic},
        {"threads", c.threads},
        {"csv_label_column", c.csv_label_column},
        {"nmi", name(c.nmi_normalization)},
        {"paths", paths},
    };
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const IoError&) {
        return kExitIo;
    } catch (const NumericalError&) {
        return kExitNumerical;
    } catch (const PreconditionError&) {
        return kExitPrecondition;
    } catch (...) {
        return kExitOther;
    }
}

}  // namespace npcluster::cli
