#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "npcluster/core_data.hpp"

namespace npcluster::metrics {

struct ContingencyTable {
    std::size_t rows = 0;  // distinct true labels
    std::size_t cols = 0;  // distinct predicted labels
    std::vector<std::uint64_t> counts;  // row-major rows x cols
    std::vector<std::uint64_t> row_sums;
    std::vector<std::uint64_t> col_sums;
    std::uint64_t total = 0;

    std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

// Labels are relabelled contiguously (first occurrence) before counting.
ContingencyTable contingency(std::span<const Label> true_labels, std::span<const Label> pred_labels);

using Assignment = std::vector<std::pair<std::size_t, std::size_t>>;

// Minimum-cost one-to-one assignment of a rows x cols cost matrix (row-major).
// Rectangular inputs are zero-padded to square; min(rows, cols) pairs are
// returned, sorted by row.
Assignment hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols);

double clustering_accuracy(std::span<const Label> true_labels, std::span<const Label> pred_labels);

enum class NmiNormalization { arithmetic, geometric };

double nmi(std::span<const Label> true_labels, std::span<const Label> pred_labels,
           NmiNormalization normalization = NmiNormalization::arithmetic);

double ari(std::span<const Label> true_labels, std::span<const Label> pred_labels);

struct MetricsReport {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    std::size_t inferred_k = 0;
    std::size_t true_k = 0;
    std::size_t n = 0;
};

MetricsReport evaluate(std::span<const Label> true_labels, std::span<const Label> pred_labels,
                       NmiNormalization normalization = NmiNormalization::arithmetic);

// {"acc", "nmi", "ari", "inferred_k", "true_k", "n"}.
std::string to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

}  // namespace npcluster::metrics
