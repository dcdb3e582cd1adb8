#include "npcluster/core_data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "npcluster/errors.hpp"

namespace npcluster {

template <typename T>
RowMatrix<T>::RowMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) {
        throw PreconditionError("matrix must have at least one row and one column");
    }
    if (values_.size() != rows_ * cols_) {
        throw PreconditionError("matrix value count " + std::to_string(values_.size()) +
                                " does not match shape " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw FormatError("non-finite value at row " + std::to_string(i / cols_) +
                              ", column " + std::to_string(i % cols_));
        }
    }
}

template class RowMatrix<float>;
template class RowMatrix<double>;

FileFormat format_for_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".csv" ? FileFormat::csv : FileFormat::binary;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T load_le(const unsigned char* p) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

template <typename T>
void store_le(std::string& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 4 + 1;

bool has_binary_magic(const std::string& bytes) {
    return bytes.size() >= 8 && std::memcmp(bytes.data(), kBinaryMagic, 8) == 0;
}

struct BinaryPayload {
    std::uint32_t version = 0;
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;
    std::optional<LabelVector> labels;
};

// Parses the container; values are widened to double and checked finite.
BinaryPayload parse_binary(const std::string& bytes, const std::filesystem::path& path) {
    const auto where = [&](std::size_t offset) {
        return "'" + path.string() + "' at byte " + std::to_string(offset);
    };
    if (bytes.size() < kHeaderSize) {
        throw FormatError("truncated header in " + where(bytes.size()));
    }
    if (!has_binary_magic(bytes)) {
        throw FormatError("malformed header: bad magic in " + where(0));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    BinaryPayload out;
    out.version = load_le<std::uint32_t>(p + 8);
    if (out.version != kFeatureVersion && out.version != kEmbeddingVersion) {
        throw FormatError("malformed header: unsupported version " + std::to_string(out.version) +
                          " in " + where(8));
    }
    const auto n = load_le<std::uint64_t>(p + 12);
    const auto d = load_le<std::uint32_t>(p + 20);
    const auto has_labels = p[24];
    if (n == 0 || d == 0) {
        throw FormatError("malformed header: dimension mismatch, n and d must be positive in " +
                          where(12));
    }
    if (has_labels > 1) {
        throw FormatError("malformed header: has_labels must be 0 or 1 in " + where(24));
    }
    const std::size_t width = out.version == kFeatureVersion ? 4 : 8;
    const std::size_t remaining = bytes.size() - kHeaderSize;
    const std::size_t per_row = d * width + (has_labels ? 4 : 0);
    if (n > remaining / per_row) {
        throw FormatError("truncated file: header declares " + std::to_string(n) + "x" +
                          std::to_string(d) + " but payload ends in " + where(bytes.size()));
    }
    if (remaining != n * per_row) {
        throw FormatError("dimension mismatch: " + std::to_string(remaining - n * per_row) +
                          " trailing bytes in " + where(kHeaderSize + n * per_row));
    }
    out.n = n;
    out.d = d;
    out.values.resize(n * d);
    const unsigned char* cursor = p + kHeaderSize;
    for (std::size_t i = 0; i < n * d; ++i, cursor += width) {
        const double v = width == 4 ? static_cast<double>(load_le<float>(cursor))
                                    : load_le<double>(cursor);
        if (!std::isfinite(v)) {
            throw FormatError("non-finite value (row " + std::to_string(i / d) + ", column " +
                              std::to_string(i % d) + ") in " +
                              where(static_cast<std::size_t>(cursor - p)));
        }
        out.values[i] = v;
    }
    if (has_labels) {
        LabelVector labels(n);
        for (std::size_t i = 0; i < n; ++i, cursor += 4) {
            labels[i] = load_le<std::uint32_t>(cursor);
        }
        out.labels = std::move(labels);
    }
    return out;
}

template <typename T>
std::string encode_binary(const RowMatrix<T>& m, const LabelVector* labels, std::uint32_t version) {
    if (labels != nullptr && labels->size() != m.rows()) {
        throw PreconditionError("label count " + std::to_string(labels->size()) +
                                " does not match matrix rows " + std::to_string(m.rows()));
    }
    std::string out;
    out.reserve(kHeaderSize + m.values().size() * sizeof(T) + (labels ? labels->size() * 4 : 0));
    out.append(kBinaryMagic, 8);
    store_le<std::uint32_t>(out, version);
    store_le<std::uint64_t>(out, m.rows());
    store_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    out.push_back(labels ? 1 : 0);
    for (T v : m.values()) {
        store_le<T>(out, v);
    }
    if (labels) {
        for (Label l : *labels) {
            store_le<std::uint32_t>(out, l);
        }
    }
    return out;
}

struct CsvPayload {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;
    std::optional<LabelVector> labels;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

CsvPayload parse_csv(const std::string& text, const std::filesystem::path& path, bool label_column) {
    CsvPayload out;
    LabelVector labels;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string_view line = trim(std::string_view(text).substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto where = "'" + path.string() + "' line " + std::to_string(line_no);
        std::vector<std::string_view> fields;
        std::size_t f = 0;
        while (true) {
            auto comma = line.find(',', f);
            fields.push_back(trim(line.substr(f, comma == std::string_view::npos ? line.npos : comma - f)));
            if (comma == std::string_view::npos) break;
            f = comma + 1;
        }
        std::size_t n_values = fields.size();
        if (label_column) {
            if (fields.size() < 2) {
                throw FormatError("dimension mismatch: expected values plus a label column in " + where);
            }
            --n_values;
            std::uint32_t lab = 0;
            const auto& lf = fields.back();
            auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), lab);
            if (ec != std::errc() || ptr != lf.data() + lf.size()) {
                throw FormatError("malformed label '" + std::string(lf) + "' in " + where);
            }
            labels.push_back(lab);
        }
        if (out.n == 0) {
            out.d = n_values;
        } else if (n_values != out.d) {
            throw FormatError("dimension mismatch: expected " + std::to_string(out.d) + " values, found " +
                              std::to_string(n_values) + " in " + where);
        }
        for (std::size_t j = 0; j < n_values; ++j) {
            const auto& field = fields[j];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size()) {
                const std::string lowered(field);
                if (lowered == "nan" || lowered == "NaN" || lowered == "inf" || lowered == "-inf") {
                    throw FormatError("non-finite value in " + where + ", column " + std::to_string(j));
                }
                throw FormatError("malformed number '" + std::string(field) + "' in " + where +
                                  ", column " + std::to_string(j));
            }
            if (!std::isfinite(v)) {
                throw FormatError("non-finite value in " + where + ", column " + std::to_string(j));
            }
            out.values.push_back(v);
        }
        ++out.n;
    }
    if (out.n == 0) {
        throw FormatError("no data rows in '" + path.string() + "'");
    }
    if (label_column) out.labels = std::move(labels);
    return out;
}

template <typename T>
std::string encode_csv(const RowMatrix<T>& m, const LabelVector* labels) {
    if (labels != nullptr && labels->size() != m.rows()) {
        throw PreconditionError("label count does not match matrix rows");
    }
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out.push_back(',');
            auto res = std::to_chars(buf, buf + sizeof(buf), row[j]);
            out.append(buf, res.ptr);
        }
        if (labels) {
            out.push_back(',');
            out += std::to_string((*labels)[i]);
        }
        out.push_back('\n');
    }
    return out;
}

}  // namespace

FeatureFile read_features(const std::filesystem::path& path, FileFormat format, bool csv_label_column) {
    const auto bytes = read_all(path);
    std::size_t n = 0, d = 0;
    std::vector<double> wide;
    std::optional<LabelVector> labels;
    if (format == FileFormat::binary) {
        auto payload = parse_binary(bytes, path);
        if (payload.version != kFeatureVersion) {
            throw FormatError("'" + path.string() + "' holds f64 embedding values, not f32 features");
        }
        n = payload.n;
        d = payload.d;
        wide = std::move(payload.values);
        labels = std::move(payload.labels);
    } else {
        auto payload = parse_csv(bytes, path, csv_label_column);
        n = payload.n;
        d = payload.d;
        wide = std::move(payload.values);
        labels = std::move(payload.labels);
    }
    std::vector<float> narrow(wide.begin(), wide.end());
    return {FeatureMatrix(n, d, std::move(narrow)), std::move(labels)};
}

void write_features(const FeatureMatrix& matrix, const LabelVector* labels,
                    const std::filesystem::path& path, FileFormat format) {
    write_all(path, format == FileFormat::binary ? encode_binary(matrix, labels, kFeatureVersion)
                                                 : encode_csv(matrix, labels));
}

EmbeddingFile read_embedding(const std::filesystem::path& path, FileFormat format, bool csv_label_column) {
    const auto bytes = read_all(path);
    if (format == FileFormat::binary) {
        auto payload = parse_binary(bytes, path);
        return {EmbeddingMatrix(payload.n, payload.d, std::move(payload.values)), std::move(payload.labels)};
    }
    auto payload = parse_csv(bytes, path, csv_label_column);
    return {EmbeddingMatrix(payload.n, payload.d, std::move(payload.values)), std::move(payload.labels)};
}

void write_embedding(const EmbeddingMatrix& matrix, const LabelVector* labels,
                     const std::filesystem::path& path, FileFormat format) {
    write_all(path, format == FileFormat::binary ? encode_binary(matrix, labels, kEmbeddingVersion)
                                                 : encode_csv(matrix, labels));
}

LabelVector read_labels(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (has_binary_magic(bytes)) {
        auto payload = parse_binary(bytes, path);
        if (!payload.labels) {
            throw FormatError("'" + path.string() + "' has no label block");
        }
        return std::move(*payload.labels);
    }
    LabelVector labels;
    std::istringstream in(bytes);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto field = trim(line);
        if (field.empty()) continue;
        Label value = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
            throw FormatError("malformed label '" + std::string(field) + "' in '" + path.string() +
                              "' line " + std::to_string(line_no));
        }
        labels.push_back(value);
    }
    if (labels.empty()) {
        throw FormatError("no labels in '" + path.string() + "'");
    }
    return labels;
}

void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
    std::string out;
    for (Label l : labels) {
        out += std::to_string(l);
        out.push_back('\n');
    }
    write_all(path, out);
}

std::pair<LabelVector, std::size_t> relabel_contiguous(std::span<const Label> labels) {
    if (labels.empty()) {
        throw PreconditionError("label vector must be non-empty");
    }
    std::unordered_map<Label, Label> ids;
    LabelVector out;
    out.reserve(labels.size());
    for (Label l : labels) {
        auto [it, inserted] = ids.try_emplace(l, static_cast<Label>(ids.size()));
        out.push_back(it->second);
    }
    return {std::move(out), ids.size()};
}

}  // namespace npcluster
