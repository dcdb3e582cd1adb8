#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace npcluster {

using Label = std::uint32_t;
using LabelVector = std::vector<Label>;

// Dense row-major matrix with at least one row and one column and only
// finite entries. Construction validates; afterwards the object is immutable.
template <typename T>
class RowMatrix {
public:
    using value_type = T;

    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols, std::vector<T> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<const T> row(std::size_t i) const noexcept {
        return {values_.data() + i * cols_, cols_};
    }
    T operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }
    std::span<const T> values() const noexcept { return values_; }

    bool operator==(const RowMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

extern template class RowMatrix<float>;
extern template class RowMatrix<double>;

// n x d raw deep features (single precision, as produced by the network).
using FeatureMatrix = RowMatrix<float>;
// n x p manifold coordinates (double precision for variational inference).
using EmbeddingMatrix = RowMatrix<double>;

enum class FileFormat { binary, csv };

// Picks csv for a ".csv" extension and binary otherwise.
FileFormat format_for_path(const std::filesystem::path& path);

struct FeatureFile {
    FeatureMatrix features;
    std::optional<LabelVector> labels;
};

struct EmbeddingFile {
    EmbeddingMatrix embedding;
    std::optional<LabelVector> labels;
};

// Binary layout: "FEATMAT1", u32 version, u64 n, u32 d, u8 has_labels,
// n*d little-endian values, then n u32 labels when has_labels is set.
// Version 1 carries f32 values (features); version 2 carries f64 values
// (embeddings). CSV: one row per sample, optional trailing integer label.
inline constexpr char kBinaryMagic[8] = {'F', 'E', 'A', 'T', 'M', 'A', 'T', '1'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::uint32_t kEmbeddingVersion = 2;

FeatureFile read_features(const std::filesystem::path& path, FileFormat format,
                          bool csv_label_column = false);
void write_features(const FeatureMatrix& matrix, const LabelVector* labels,
                    const std::filesystem::path& path, FileFormat format);

// Reads either binary version; f32 payloads are widened.
EmbeddingFile read_embedding(const std::filesystem::path& path, FileFormat format,
                             bool csv_label_column = false);
void write_embedding(const EmbeddingMatrix& matrix, const LabelVector* labels,
                     const std::filesystem::path& path, FileFormat format);

// Label files are plain text, one non-negative integer per line. A binary
// matrix file with a label block is also accepted on read.
LabelVector read_labels(const std::filesystem::path& path);
void write_labels(const LabelVector& labels, const std::filesystem::path& path);

// Maps labels onto 0..K-1 in order of first occurrence. Empty input is
// rejected since every labelled collection has n >= 1.
std::pair<LabelVector, std::size_t> relabel_contiguous(std::span<const Label> labels);

}  // namespace npcluster
