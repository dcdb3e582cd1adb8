// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "npcluster/dpgmm.hpp"
#include "npcluster/kmeans.hpp"
#include "npcluster/logging.hpp"
#include "npcluster/manifold.hpp"
#include "npcluster/metrics.hpp"
#include "npcluster/pipeline.hpp"
#include "npcluster/random.hpp"
#include "support/naive_vi.hpp"
#include "support/synthetic.hpp"

using namespace npcluster;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

Outcome p1_stick_breaking() {
    CounterRng rng(11);
    double worst_sum = 0.0, worst_term = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> phi(50);
        for (auto& v : phi) v = rng.uniform();
        phi.back() = 1.0;
        const auto w = dpgmm::stick_breaking_weights(phi);
        double sum = 0.0;
        for (double v : w) sum += v;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        for (std::size_t k = 0; k < phi.size(); ++k) {
            double expect = phi[k];
            for (std::size_t j = 0; j < k; ++j) expect *= 1.0 - phi[j];
            worst_term = std::max(worst_term, std::abs(w[k] - expect));
        }
    }
    std::ostringstream s;
    s << "max |sum-1|=" << worst_sum << " max term err=" << worst_term;
    return {worst_sum <= 1e-12 && worst_term <= 1e-12, s.str()};
}

Outcome p2_vi_oracle() {
    CounterRng rng(22);
    double worst_r = 0.0, worst_m = 0.0, worst_elbo = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t p = 1 + rng.below(3);
        const std::size_t k_max = 1 + rng.below(4);
        const std::size_t n = p + 2 + rng.below(10 - p - 1);  // p+2 .. 10
        naive::Mat ny(n, naive::Vec(p));
        std::vector<double> flat;
        for (auto& row : ny)
            for (auto& v : row) flat.push_back(v = rng.uniform(-3.0, 3.0));
        const EmbeddingMatrix y(n, p, flat);

        dpgmm::DpgmmConfig cfg;
        cfg.max_components = k_max;
        cfg.concentration = rng.uniform(0.05, 2.0);
        cfg.mean_precision = rng.uniform(0.01, 1.0);
        cfg.wishart_dof = static_cast<double>(p) + rng.uniform(0.0, 3.0);
        cfg.threads = 1;
        const auto prior = dpgmm::make_prior(y, cfg);
        const auto nprior = naive::make_prior(ny, cfg.concentration, cfg.mean_precision, *cfg.wishart_dof);

        dpgmm::RowMatrixXd r(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_max));
        naive::State ns;
        ns.r = naive::zeros(n, k_max);
        for (std::size_t i = 0; i < n; ++i) {
            double z = 0.0;
            for (std::size_t k = 0; k < k_max; ++k) z += (ns.r[i][k] = std::exp(rng.uniform(-2.0, 2.0)));
            for (std::size_t k = 0; k < k_max; ++k) r(i, k) = ns.r[i][k] /= z;
        }

        // M-step from identical responsibilities.
        auto state = dpgmm::state_from_responsibilities(y, prior, r);
        naive::m_step(ns, ny, nprior);
        for (std::size_t k = 0; k < k_max; ++k) {
            const auto& c = state.components[k];
            const auto& nc = ns.comps[k];
            worst_m = std::max({worst_m, rel_err(c.mean_precision, nc.beta), rel_err(c.dof, nc.nu),
                                rel_err(state.stick_a[k], ns.a[k]), rel_err(state.stick_b[k], ns.b[k])});
            for (std::size_t a = 0; a < p; ++a) {
                worst_m = std::max(worst_m, rel_err(c.mean[a], nc.m[a]));
                for (std::size_t b = 0; b < p; ++b) worst_m = std::max(worst_m, rel_err(c.scale(a, b), nc.w[a][b]));
            }
        }
        // E-step from identical variational factors.
        dpgmm::update_responsibilities(state, y);
        naive::e_step(ns, ny);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < k_max; ++k)
                worst_r = std::max(worst_r, std::abs(state.responsibilities(i, k) - ns.r[i][k]));
        worst_elbo = std::max(worst_elbo, rel_err(dpgmm::elbo(state, y), naive::elbo(ns, ny, nprior)));
    }
    std::ostringstream s;
    s << "E-step " << worst_r << ", M-step " << worst_m << ", ELBO " << worst_elbo << " (relative)";
    return {worst_r <= 1e-10 && worst_m <= 1e-10 && worst_elbo <= 1e-10, s.str()};
}

Outcome p3_monotone() {
    std::size_t violations = 0, iterations = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CounterRng rng(derive_seed(33, seed));
        const std::size_t clusters = 2 + rng.below(4);
        std::vector<std::vector<double>> centers;
        std::vector<std::size_t> sizes(clusters, 300 / clusters);
        sizes.back() += 300 - std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        for (std::size_t c = 0; c < clusters; ++c) centers.push_back({rng.uniform(-8, 8), rng.uniform(-8, 8)});
        const auto data = synth::gaussian_blobs(centers, sizes, rng.uniform(0.5, 2.0), seed);
        const auto y = data.embedding();
        dpgmm::DpgmmConfig cfg;
        cfg.threads = 1;
        for (std::uint64_t init = 0; init < 5; ++init) {
            const auto state = dpgmm::fit_single(y, cfg, seed * 100 + init);
            const auto& t = state.elbo_trace;
            for (std::size_t i = 1; i < t.size(); ++i) {
                ++iterations;
                const double drop = t[i - 1] - t[i];
                if (drop > 1e-8 * std::abs(t[i - 1])) ++violations;
                worst = std::max(worst, drop / std::abs(t[i - 1]));
            }
        }
    }
    std::ostringstream s;
    s << violations << " violations over " << iterations << " iterations, worst relative drop " << worst;
    return {violations == 0, s.str()};
}

Outcome p4_recovery() {
    int three_ok = 0, one_ok = 0;
    std::ostringstream s;
    s << "3 blobs K=[";
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = synth::three_blobs(200, 4000 + seed);
        dpgmm::DpgmmConfig cfg;
        cfg.seed = seed;
        const auto fit = dpgmm::fit(data.embedding(), cfg);
        const double a = metrics::ari(data.labels, fit.result.labels);
        if (fit.result.inferred_k == 3 && a >= 0.99) ++three_ok;
        s << fit.result.inferred_k << (seed < 9 ? "," : "");
    }
    s << "] single K=[";
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = synth::gaussian_blobs({{0.0, 0.0}}, {500}, 1.0, 5000 + seed);
        dpgmm::DpgmmConfig cfg;
        cfg.seed = seed;
        const auto fit = dpgmm::fit(data.embedding(), cfg);
        if (fit.result.inferred_k == 1) ++one_ok;
        s << fit.result.inferred_k << (seed < 9 ? "," : "");
    }
    s << "]; 3-blob hits " << three_ok << "/10, single hits " << one_ok << "/10";
    return {three_ok >= 9 && one_ok >= 9, s.str()};
}

std::vector<std::vector<std::size_t>> permutations_of(std::size_t n, std::size_t pick) {
    // All injective maps {0..pick-1} -> {0..n-1}.
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    std::vector<bool> used(n, false);
    std::function<void()> rec = [&] {
        if (cur.size() == pick) {
            out.push_back(cur);
            return;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            used[j] = true;
            cur.push_back(j);
            rec();
            cur.pop_back();
            used[j] = false;
        }
    };
    rec();
    return out;
}

Outcome p5_hungarian() {
    CounterRng rng(55);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = 1 + rng.below(7), cols = 1 + rng.below(7);
        std::vector<double> cost(rows * cols);
        for (auto& c : cost) c = static_cast<double>(rng.below(100)) - 50.0;
        const auto assignment = metrics::hungarian(cost, rows, cols);
        double got = 0.0;
        for (const auto& [i, j] : assignment) got += cost[i * cols + j];
        // Brute force over the smaller side.
        double best = INFINITY;
        if (rows <= cols) {
            for (const auto& perm : permutations_of(cols, rows)) {
                double v = 0.0;
                for (std::size_t i = 0; i < rows; ++i) v += cost[i * cols + perm[i]];
                best = std::min(best, v);
            }
        } else {
            for (const auto& perm : permutations_of(rows, cols)) {
                double v = 0.0;
                for (std::size_t j = 0; j < cols; ++j) v += cost[perm[j] * cols + j];
                best = std::min(best, v);
            }
        }
        if (got != best || assignment.size() != std::min(rows, cols)) ++mismatches;
    }
    const LabelVector t = {0, 0, 1, 1}, p = {0, 1, 0, 1};
    const double nmi_split = metrics::nmi(t, p), ari_split = metrics::ari(t, p);
    const LabelVector id = {0, 1, 2, 2, 1, 0};
    const auto same = metrics::evaluate(id, id);
    const bool fixtures = nmi_split == 0.0 && ari_split == -0.5 && same.acc == 1.0 && same.nmi == 1.0 && same.ari == 1.0;
    std::ostringstream s;
    s << mismatches << "/200 brute-force mismatches; [[1,1],[1,1]] NMI=" << nmi_split << " ARI=" << ari_split
      << "; identity acc/nmi/ari=" << same.acc << "/" << same.nmi << "/" << same.ari;
    return {mismatches == 0 && fixtures, s.str()};
}

Outcome p6_manifold() {
    double worst_ari = 1.0, worst_residual = 0.0, worst_asym = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = synth::two_blobs(200, 50, 20.0, 6000 + seed);
        const auto x = data.features();
        manifold::UmapConfig cfg;
        cfg.n_neighbors = std::min<std::size_t>(100, x.rows() - 1);
        cfg.min_dist = 0.5;
        cfg.dim = 2;
        cfg.seed = seed;
        cfg.deterministic = true;

        const auto knn = manifold::build_knn(x, cfg.n_neighbors, seed);
        const auto cal = manifold::calibrate_smooth_knn(knn);
        const double target = std::log2(static_cast<double>(knn.k));
        for (std::size_t i = 0; i < knn.n; ++i) {
            const double mass = manifold::membership_mass(knn.neighbor_distances(i), cal.rho[i], cal.sigma[i]);
            if (!cal.clamped[i]) worst_residual = std::max(worst_residual, std::abs(mass - target));
        }
        const auto graph = manifold::fuzzy_simplicial_set(knn, cal);
        // Stored as i<j unique pairs; symmetry is checked against the
        // membership rule on the directed graph.
        std::vector<std::vector<std::pair<std::uint32_t, double>>> directed(knn.n);
        for (std::size_t i = 0; i < knn.n; ++i) {
            const auto nb = knn.neighbors(i);
            const auto d = knn.neighbor_distances(i);
            for (std::size_t m = 0; m < knn.k; ++m) {
                directed[i].push_back(
                    {nb[m], std::exp(-std::max(0.0, d[m] - cal.rho[i]) / cal.sigma[i])});
            }
        }
        const auto lookup = [&](std::uint32_t i, std::uint32_t j) {
            for (const auto& [v, w] : directed[i])
                if (v == j) return w;
            return 0.0;
        };
        for (const auto& e : graph.edges) {
            const double a = lookup(e.i, e.j), b = lookup(e.j, e.i);
            const double expect_ij = a + b - a * b, expect_ji = b + a - b * a;
            worst_asym = std::max({worst_asym, std::abs(e.weight - expect_ij), std::abs(e.weight - expect_ji),
                                   e.i < e.j ? 0.0 : 1.0});
        }

        const auto y = manifold::embed(x, cfg);
        const auto km = baselines::kmeans_fit(y, 2, 5, baselines::kDefaultKmeansIterations, seed);
        worst_ari = std::min(worst_ari, metrics::ari(data.labels, km.labels));
    }
    std::ostringstream s;
    s << "min ARI " << worst_ari << ", max calibration residual " << worst_residual << ", max symmetry error "
      << worst_asym;
    return {worst_ari >= 0.95 && worst_residual < 1e-4 && worst_asym < 1e-12, s.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome p7_determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "npcluster_acceptance_p7";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto data = synth::gaussian_blobs({{0, 0, 0, 0, 0, 0, 0, 0}, {9, 0, 0, 0, 0, 0, 0, 0}, {0, 9, 0, 0, 0, 0, 0, 0}},
                                            {100, 100, 100}, 1.0, 77);
    write_features(data.features(), &data.labels, root / "features.fmat", FileFormat::binary);
    bool same = true;
    std::string first_labels, first_svg;
    for (int run = 0; run < 2; ++run) {
        cli::PipelineConfig cfg;
        cfg.paths.features = root / "features.fmat";
        cfg.paths.out = root / ("run" + std::to_string(run));
        cfg.seed = 1234;
        cfg.deterministic = true;
        cli::cmd_pipeline(cfg);
        const auto labels = slurp(cfg.paths.out / "labels.txt");
        const auto svg = slurp(cfg.paths.out / "plot.svg");
        if (run == 0) {
            first_labels = labels;
            first_svg = svg;
        } else {
            same = labels == first_labels && svg == first_svg && !labels.empty() && !svg.empty();
        }
    }
    fs::remove_all(root);
    return {same, same ? "labels and SVG byte-identical across two runs" : "outputs differ between runs"};
}

double brute_force_inertia(const std::vector<double>& pts, std::size_t n, std::size_t dim, std::size_t k) {
    double best = INFINITY;
    std::vector<std::size_t> assign(n, 0);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= k;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = c % k;
            c /= k;
        }
        std::vector<double> sum(k * dim, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[assign[i]];
            for (std::size_t j = 0; j < dim; ++j) sum[assign[i] * dim + j] += pts[i * dim + j];
        }
        if (std::find(count.begin(), count.end(), 0) != count.end()) continue;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = pts[i * dim + j] - sum[assign[i] * dim + j] / static_cast<double>(count[assign[i]]);
                inertia += d * d;
            }
        best = std::min(best, inertia);
    }
    return best;
}

Outcome p8_kmeans() {
    CounterRng rng(88);
    std::size_t increases = 0, mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = synth::gaussian_blobs({{0, 0}, {4, 0}, {0, 4}, {4, 4}}, {60, 60, 60, 60}, 1.5, 800 + trial);
        const auto km = baselines::kmeans_fit(data.embedding(), 4, 1, baselines::kDefaultKmeansIterations, trial);
        for (std::size_t i = 1; i < km.inertia_trace.size(); ++i)
            if (km.inertia_trace[i] > km.inertia_trace[i - 1]) ++increases;
    }
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 2, n = 8, k = 2 + static_cast<std::size_t>(trial % 2);
        std::vector<double> pts(n * dim);
        for (auto& v : pts) v = rng.uniform(-5.0, 5.0);
        const EmbeddingMatrix y(n, dim, pts);
        double best = INFINITY;
        for (std::uint64_t seed = 0; seed < 50; ++seed)
            best = std::min(best, baselines::kmeans_fit(y, k, 1, baselines::kDefaultKmeansIterations, seed).inertia);
        if (rel_err(best, brute_force_inertia(pts, n, dim, k)) > 1e-12) ++mismatches;
    }
    std::ostringstream s;
    s << increases << " inertia increases; " << mismatches << "/20 n=8 instances off the brute-force optimum";
    return {increases == 0 && mismatches == 0, s.str()};
}

}  // namespace

int main() {
    set_log_sink([](LogLevel, std::string_view) {});
    struct Criterion {
        const char* id;
        const char* title;
        double limit_s;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"P1", "stick-breaking correctness", 1.0, p1_stick_breaking},
        {"P2", "VI oracle equivalence", 10.0, p2_vi_oracle},
        {"P3", "ELBO monotonicity", 30.0, p3_monotone},
        {"P4", "nonparametric recovery", 60.0, p4_recovery},
        {"P5", "Hungarian optimality and metric fixtures", 10.0, p5_hungarian},
        {"P6", "manifold separation", 120.0, p6_manifold},
        {"P7", "end-to-end determinism", 60.0, p7_determinism},
        {"P8", "K-Means baseline", 10.0, p8_kmeans},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = out.pass && in_time;
        failed += !pass;
        std::printf("%s %s %s: %s (%.2fs, limit %.0fs%s) %s\n", pass ? "PASS" : "FAIL", c.id, c.title,
                    out.pass ? "ok" : "criterion not met", secs, c.limit_s, in_time ? "" : ", over time",
                    out.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
