#include "npcluster/metrics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "npcluster/errors.hpp"

namespace npcluster::metrics {

namespace {

void check_lengths(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) {
        throw PreconditionError("label vectors differ in length: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    if (a.empty()) throw PreconditionError("label vectors must be non-empty");
}

using Wide = __int128;

std::uint64_t pairs(std::uint64_t x) { return x < 2 ? 0 : x * (x - 1) / 2; }

bool identical_partitions(const ContingencyTable& t) {
    if (t.rows != t.cols) return false;
    for (std::size_t i = 0; i < t.rows; ++i) {
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < t.cols; ++j) nonzero += t.at(i, j) != 0;
        if (nonzero != 1) return false;
    }
    return true;  // rows == cols and each row hits exactly one column: a bijection
}

double entropy(std::span<const std::uint64_t> sums, double n) {
    double h = 0.0;
    for (auto s : sums) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

ContingencyTable contingency(std::span<const Label> true_labels, std::span<const Label> pred_labels) {
    check_lengths(true_labels, pred_labels);
    const auto [t, rows] = relabel_contiguous(true_labels);
    const auto [p, cols] = relabel_contiguous(pred_labels);
    ContingencyTable table;
    table.rows = rows;
    table.cols = cols;
    table.counts.assign(rows * cols, 0);
    table.row_sums.assign(rows, 0);
    table.col_sums.assign(cols, 0);
    table.total = true_labels.size();
    for (std::size_t s = 0; s < t.size(); ++s) {
        ++table.counts[t[s] * cols + p[s]];
        ++table.row_sums[t[s]];
        ++table.col_sums[p[s]];
    }
    return table;
}

Assignment hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols) {
    if (cost.size() != rows * cols) throw PreconditionError("cost matrix size does not match its shape");
    for (double c : cost) {
        if (!std::isfinite(c)) throw PreconditionError("cost matrix contains a non-finite entry");
    }
    if (rows == 0 || cols == 0) return {};
    const std::size_t n = std::max(rows, cols);
    const auto at = [&](std::size_t i, std::size_t j) {  // 1-based, zero padding
        return (i <= rows && j <= cols) ? cost[(i - 1) * cols + (j - 1)] : 0.0;
    };

    // Shortest augmenting path with row/column potentials, O(n^3).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = at(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment out;
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = match[j];
        if (i >= 1 && i <= rows && j <= cols) out.emplace_back(i - 1, j - 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double clustering_accuracy(std::span<const Label> true_labels, std::span<const Label> pred_labels) {
    const auto table = contingency(true_labels, pred_labels);
    std::vector<double> cost(table.counts.size());
    for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = -static_cast<double>(table.counts[i]);
    std::uint64_t matched = 0;
    for (const auto& [i, j] : hungarian(cost, table.rows, table.cols)) matched += table.at(i, j);
    return static_cast<double>(matched) / static_cast<double>(table.total);
}

double nmi(std::span<const Label> true_labels, std::span<const Label> pred_labels,
           NmiNormalization normalization) {
    const auto table = contingency(true_labels, pred_labels);
    if (identical_partitions(table)) return 1.0;
    const double n = static_cast<double>(table.total);
    const double ht = entropy(table.row_sums, n);
    const double hp = entropy(table.col_sums, n);
    if (ht == 0.0 || hp == 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < table.rows; ++i) {
        for (std::size_t j = 0; j < table.cols; ++j) {
            const auto c = table.at(i, j);
            if (c == 0) continue;
            const double pij = static_cast<double>(c) / n;
            mi += pij * std::log(n * static_cast<double>(c) /
                                 (static_cast<double>(table.row_sums[i]) * static_cast<double>(table.col_sums[j])));
        }
    }
    const double norm = normalization == NmiNormalization::arithmetic ? 0.5 * (ht + hp) : std::sqrt(ht * hp);
    return std::clamp(mi / norm, 0.0, 1.0);
}

double ari(std::span<const Label> true_labels, std::span<const Label> pred_labels) {
    check_lengths(true_labels, pred_labels);
    if (true_labels.size() < 2) throw PreconditionError("ARI needs at least 2 samples");
    const auto table = contingency(true_labels, pred_labels);
    // 64-bit pair counts hold up to n ~ 6e9; beyond that C(n, 2) overflows.
    assert(table.total < (std::uint64_t{1} << 32));
    std::uint64_t index = 0, sum_a = 0, sum_b = 0;
    for (auto c : table.counts) index += pairs(c);
    for (auto a : table.row_sums) sum_a += pairs(a);
    for (auto b : table.col_sums) sum_b += pairs(b);
    const std::uint64_t total_pairs = pairs(table.total);
    // (index - E) / (M - E), scaled through by 2*C(n,2) to stay in integers.
    const Wide numer = 2 * Wide(index) * total_pairs - 2 * Wide(sum_a) * sum_b;
    const Wide denom = (Wide(sum_a) + sum_b) * total_pairs - 2 * Wide(sum_a) * sum_b;
    if (denom == 0) return identical_partitions(table) ? 1.0 : 0.0;
    return static_cast<double>(numer) / static_cast<double>(denom);
}

MetricsReport evaluate(std::span<const Label> true_labels, std::span<const Label> pred_labels,
                       NmiNormalization normalization) {
    MetricsReport r;
    r.acc = clustering_accuracy(true_labels, pred_labels);
    r.nmi = nmi(true_labels, pred_labels, normalization);
    r.ari = ari(true_labels, pred_labels);
    r.true_k = relabel_contiguous(true_labels).second;
    r.inferred_k = relabel_contiguous(pred_labels).second;
    r.n = true_labels.size();
    return r;
}

std::string to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["acc"] = report.acc;
    j["nmi"] = report.nmi;
    j["ari"] = report.ari;
    j["inferred_k"] = report.inferred_k;
    j["true_k"] = report.true_k;
    j["n"] = report.n;
    return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        MetricsReport r;
        r.acc = j.at("acc").get<double>();
        r.nmi = j.at("nmi").get<double>();
        r.ari = j.at("ari").get<double>();
        r.inferred_k = j.at("inferred_k").get<std::size_t>();
        r.true_k = j.at("true_k").get<std::size_t>();
        r.n = j.at("n").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed metrics report: ") + e.what());
    }
}

}  // namespace npcluster::metrics
