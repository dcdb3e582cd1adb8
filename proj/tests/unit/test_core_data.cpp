#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "npcluster/core_data.hpp"
#include "npcluster/errors.hpp"
#include "support/tempdir.hpp"

using namespace npcluster;
using testing_util::TempDir;
using testing_util::write_text;

namespace {

FeatureMatrix small_features() { return {3, 2, {1.5f, -2.0f, 0.25f, 3.0f, 1e-7f, 42.0f}}; }

std::string header(std::uint32_t version, std::uint64_t n, std::uint32_t d, std::uint8_t has_labels) {
    std::string s(kBinaryMagic, 8);
    s.append(reinterpret_cast<const char*>(&version), 4);
    s.append(reinterpret_cast<const char*>(&n), 8);
    s.append(reinterpret_cast<const char*>(&d), 4);
    s.push_back(static_cast<char>(has_labels));
    return s;
}

}  // namespace

TEST_CASE("matrix construction validates shape and values") {
    CHECK_THROWS_AS(FeatureMatrix(0, 2, {}), PreconditionError);
    CHECK_THROWS_AS(FeatureMatrix(2, 2, {1, 2, 3}), PreconditionError);
    CHECK_THROWS_AS(EmbeddingMatrix(1, 2, {1.0, std::nan("")}), FormatError);
    CHECK_THROWS_AS(EmbeddingMatrix(1, 1, {std::numeric_limits<double>::infinity()}), FormatError);
    const EmbeddingMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(m(1, 2) == 6.0);
    CHECK(m.row(1)[0] == 4.0);
}

TEST_CASE("binary features round trip with and without labels") {
    TempDir dir;
    const auto f = small_features();
    const LabelVector labels{7, 0, 7};
    write_features(f, &labels, dir / "a.fmat", FileFormat::binary);
    const auto a = read_features(dir / "a.fmat", FileFormat::binary);
    CHECK(a.features == f);
    REQUIRE(a.labels);
    CHECK(*a.labels == labels);

    write_features(f, nullptr, dir / "b.fmat", FileFormat::binary);
    const auto b = read_features(dir / "b.fmat", FileFormat::binary);
    CHECK(b.features == f);
    CHECK_FALSE(b.labels);
}

TEST_CASE("binary embeddings round trip bit-exactly") {
    TempDir dir;
    const EmbeddingMatrix e(2, 2, {0.1, 1.0 / 3.0, -1e300, 5e-324});
    write_embedding(e, nullptr, dir / "e.fmat", FileFormat::binary);
    CHECK(read_embedding(dir / "e.fmat", FileFormat::binary).embedding == e);
    // Features cannot be read from a double-precision file.
    CHECK_THROWS_AS(read_features(dir / "e.fmat", FileFormat::binary), FormatError);
    // Single-precision files widen into embeddings.
    write_features(small_features(), nullptr, dir / "f.fmat", FileFormat::binary);
    CHECK(read_embedding(dir / "f.fmat", FileFormat::binary).embedding(0, 0) == 1.5);
}

TEST_CASE("csv round trip") {
    TempDir dir;
    const auto f = small_features();
    const LabelVector labels{1, 2, 3};
    write_features(f, &labels, dir / "a.csv", FileFormat::csv);
    const auto a = read_features(dir / "a.csv", FileFormat::csv, true);
    CHECK(a.features == f);
    CHECK(*a.labels == labels);

    const EmbeddingMatrix e(2, 1, {0.1, -7.125});
    write_embedding(e, nullptr, dir / "e.csv", FileFormat::csv);
    CHECK(read_embedding(dir / "e.csv", FileFormat::csv).embedding == e);
}

TEST_CASE("format is chosen from the extension") {
    CHECK(format_for_path("x.csv") == FileFormat::csv);
    CHECK(format_for_path("x.fmat") == FileFormat::binary);
    CHECK(format_for_path("x") == FileFormat::binary);
}

TEST_CASE("binary errors name the byte offset") {
    TempDir dir;
    const auto p = dir / "bad.fmat";

    write_text(p, "NOTMAGIC");
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    auto bad_magic = header(1, 1, 1, 0) + std::string(4, '\0');
    bad_magic[0] = 'X';
    write_text(p, bad_magic);
    try {
        read_features(p, FileFormat::binary);
        FAIL("expected an error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte 0") != std::string::npos);
    }

    write_text(p, header(9, 1, 1, 0) + std::string(4, '\0'));
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    write_text(p, header(1, 0, 1, 0));
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    // Declares 2x2 but carries one value.
    write_text(p, header(1, 2, 2, 0) + std::string(4, '\0'));
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    // Trailing bytes past the declared payload.
    write_text(p, header(1, 1, 1, 0) + std::string(12, '\0'));
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    float nan = std::nanf("");
    std::string payload(4, '\0');
    std::memcpy(payload.data(), &nan, 4);
    write_text(p, header(1, 1, 1, 0) + payload);
    CHECK_THROWS_AS(read_features(p, FileFormat::binary), FormatError);

    CHECK_THROWS_AS(read_features(dir / "missing.fmat", FileFormat::binary), IoError);
}

TEST_CASE("csv errors name the line") {
    TempDir dir;
    const auto p = dir / "bad.csv";
    write_text(p, "1,2\n3,4\n5\n");
    try {
        read_features(p, FileFormat::csv);
        FAIL("expected an error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    write_text(p, "1,2\nnan,4\n");
    CHECK_THROWS_AS(read_features(p, FileFormat::csv), FormatError);
    write_text(p, "1,abc\n");
    CHECK_THROWS_AS(read_features(p, FileFormat::csv), FormatError);
    write_text(p, "\n\n");
    CHECK_THROWS_AS(read_features(p, FileFormat::csv), FormatError);
    write_text(p, "1,2,x\n");
    CHECK_THROWS_AS(read_features(p, FileFormat::csv, true), FormatError);
}

TEST_CASE("label files") {
    TempDir dir;
    const LabelVector labels{3, 1, 4, 1, 5};
    write_labels(labels, dir / "l.txt");
    CHECK(read_labels(dir / "l.txt") == labels);

    write_text(dir / "bad.txt", "1\n-2\n");
    CHECK_THROWS_AS(read_labels(dir / "bad.txt"), FormatError);
    write_text(dir / "empty.txt", "");
    CHECK_THROWS_AS(read_labels(dir / "empty.txt"), FormatError);

    // A labelled matrix file doubles as a label file.
    CHECK_THROWS_AS(write_features(small_features(), &labels, dir / "m.fmat", FileFormat::binary), PreconditionError);
    const LabelVector three{2, 2, 9};
    write_features(small_features(), &three, dir / "m.fmat", FileFormat::binary);
    CHECK(read_labels(dir / "m.fmat") == three);
}

TEST_CASE("relabel_contiguous follows first occurrence") {
    const LabelVector in{9, 4, 9, 0, 4};
    const auto [out, k] = relabel_contiguous(in);
    CHECK(k == 3);
    CHECK(out == LabelVector{0, 1, 0, 2, 1});
    CHECK_THROWS_AS(relabel_contiguous(LabelVector{}), PreconditionError);
}
