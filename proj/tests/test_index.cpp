#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nf/errors.hpp"
#include "nf/index.hpp"
#include "nf/rng.hpp"
#include "test_util.hpp"

using namespace nf;

namespace {

const std::string kDir = nftest::scratch_dir("index");

Dataset tiny_dataset(const std::vector<std::pair<std::string, BinaryLabel>>& rows) {
    Dataset ds;
    ds.name = "tiny";
    for (const auto& [id, label] : rows) {
        Example ex;
        ex.id = id;
        ex.text = id;
        ex.lang = "en";
        ex.label = label;
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

// Independent selection oracle: score every row with the same sequential
// double accumulation, sort by (-score, id), take k.
Neighbourhood oracle_topk(const Index& index, const Vec& query, std::size_t k,
                          const std::string* exclude) {
    Vec qn = l2_normalize(query);
    std::vector<Hit> all;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (exclude && index.ids[i] == *exclude) continue;
        double s = 0.0;
        const float* row = index.row(i);
        for (std::size_t j = 0; j < index.dim; ++j) {
            s += static_cast<double>(row[j]) * qn[j];
        }
        all.push_back(Hit{index.ids[i], s, index.labels[i]});
    }
    std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    Neighbourhood out;
    out.hits.assign(all.begin(), all.begin() + static_cast<long>(k));
    return out;
}

Index random_index(Rng& rng, std::size_t rows, std::size_t dim,
                   bool with_duplicates) {
    EmbeddingTable table(dim);
    Dataset ds;
    ds.name = "random";
    Vec prev;
    for (std::size_t i = 0; i < rows; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "r%05zu", i);
        Example ex;
        ex.id = id;
        ex.lang = "en";
        ex.label = rng.below(2) == 1 ? BinaryLabel::Flagged : BinaryLabel::Neutral;
        ds.examples.push_back(ex);
        if (with_duplicates && !prev.empty() && rng.below(4) == 0) {
            table.add(id, prev);
        } else {
            Vec v(dim);
            for (double& x : v) x = rng.normal();
            prev = l2_normalize(std::move(v));
            table.add(id, prev);
        }
    }
    return build_index(ds, table);
}

}  // namespace

TEST_CASE("build_index keeps dataset order and validates coverage") {
    EmbeddingTable table;
    table.add("a", {1.0, 0.0});
    table.add("b", {0.0, 1.0});
    const Dataset ds = tiny_dataset({{"a", BinaryLabel::Flagged},
                                     {"b", BinaryLabel::Neutral}});
    const Index index = build_index(ds, table);
    REQUIRE(index.size() == 2);
    CHECK(index.ids == std::vector<std::string>{"a", "b"});
    CHECK(index.labels[0] == BinaryLabel::Flagged);

    const Dataset missing = tiny_dataset({{"a", BinaryLabel::Flagged},
                                          {"zzz", BinaryLabel::Neutral}});
    CHECK_THROWS_WITH_AS(build_index(missing, table), doctest::Contains("zzz"),
                         validation_error);
}

TEST_CASE("query_topk hand case") {
    EmbeddingTable table;
    table.add("a", {1.0, 0.0});
    table.add("b", {0.9, 0.1});
    table.add("c", {0.0, 1.0});
    const Index index = build_index(tiny_dataset({{"a", BinaryLabel::Flagged},
                                                  {"b", BinaryLabel::Neutral},
                                                  {"c", BinaryLabel::Neutral}}),
                                    table);

    const Neighbourhood nn = query_topk(index, Vec{1.0, 0.0}, 2);
    REQUIRE(nn.hits.size() == 2);
    CHECK(nn.hits[0].id == "a");
    CHECK(nn.hits[1].id == "b");
    CHECK(nn.hits[0].score == doctest::Approx(1.0));
    CHECK(nn.hits[0].score >= nn.hits[1].score);
}

TEST_CASE("query_topk exclusion and tie-breaks") {
    EmbeddingTable table;
    table.add("a", {1.0, 0.0});
    table.add("b", {1.0, 0.0});  // duplicate vector
    table.add("c", {0.0, 1.0});
    const Index index = build_index(tiny_dataset({{"a", BinaryLabel::Flagged},
                                                  {"b", BinaryLabel::Neutral},
                                                  {"c", BinaryLabel::Neutral}}),
                                    table);

    const std::string ex = "a";
    const Neighbourhood without_a = query_topk(index, Vec{1.0, 0.0}, 1, &ex);
    CHECK(without_a.hits[0].id == "b");

    // Identical vectors: lexicographically smaller id wins.
    const Neighbourhood tied = query_topk(index, Vec{1.0, 0.0}, 1);
    CHECK(tied.hits[0].id == "a");

    CHECK_THROWS_AS(query_topk(index, Vec{1.0, 0.0}, 4), argument_error);
    CHECK_THROWS_AS(query_topk(index, Vec{1.0, 0.0}, 3, &ex), argument_error);
    CHECK_THROWS_AS(query_topk(index, Vec{1.0, 0.0, 0.0}, 1), argument_error);
}

TEST_CASE("query_topk matches the sort-everything oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t rows = 2 + rng.below(999);
        const std::size_t dim = 2 + rng.below(63);
        const Index index = random_index(rng, rows, dim, /*with_duplicates=*/true);

        Vec query(dim);
        for (double& x : query) x = rng.normal();
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(rows - 1, 25));
        const bool exclude = rng.below(2) == 0;
        const std::string excluded_id = index.ids[rng.below(rows)];

        const Neighbourhood got =
            query_topk(index, query, k, exclude ? &excluded_id : nullptr);
        const Neighbourhood want =
            oracle_topk(index, query, k, exclude ? &excluded_id : nullptr);
        REQUIRE(got.hits.size() == want.hits.size());
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(got.hits[i].id == want.hits[i].id);
            CHECK(got.hits[i].score == want.hits[i].score);  // bit-exact
            CHECK(got.hits[i].label == want.hits[i].label);
        }
        // Scores are valid cosines and non-increasing.
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(got.hits[i].score <= 1.0 + 1e-6);
            CHECK(got.hits[i].score >= -1.0 - 1e-6);
            if (i > 0) CHECK(got.hits[i - 1].score >= got.hits[i].score);
        }
    }
}

TEST_CASE("query_topk is invariant to positive query rescaling") {
    Rng rng(55);
    const Index index = random_index(rng, 200, 16, false);
    for (int trial = 0; trial < 50; ++trial) {
        Vec query(16);
        for (double& x : query) x = rng.normal();
        Vec scaled = query;
        const double c = rng.uniform(0.01, 50.0);
        for (double& x : scaled) x *= c;

        const Neighbourhood a = query_topk(index, query, 10);
        const Neighbourhood b = query_topk(index, scaled, 10);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(a.hits[i].id == b.hits[i].id);
            CHECK(std::abs(a.hits[i].score - b.hits[i].score) < 1e-9);
        }
    }
}

TEST_CASE("index persistence round-trips") {
    Rng rng(9);
    const Index index = random_index(rng, 37, 8, true);
    const std::string path = nftest::path_join(kDir, "i.nfi");
    save_index(index, path);

    const Index loaded = load_index(path);
    CHECK(loaded.dim == index.dim);
    CHECK(loaded.ids == index.ids);
    CHECK(loaded.labels == index.labels);
    REQUIRE(loaded.matrix.size() == index.matrix.size());
    CHECK(loaded.matrix == index.matrix);  // f32 in, f32 out

    // Re-saving is byte-identical (deterministic builds).
    const std::string path2 = nftest::path_join(kDir, "i2.nfi");
    save_index(loaded, path2);
    CHECK(nftest::read_file(path) == nftest::read_file(path2));

    SUBCASE("empty index round-trip") {
        Index empty;
        empty.dim = 4;
        const std::string p = nftest::path_join(kDir, "empty.nfi");
        save_index(empty, p);
        const Index back = load_index(p);
        CHECK(back.size() == 0);
        CHECK(back.dim == 4);
    }
    SUBCASE("corrupt magic") {
        std::string bytes = nftest::read_file(path);
        bytes[0] = 'X';
        const std::string p = nftest::path_join(kDir, "bad.nfi");
        nftest::write_file(p, bytes);
        CHECK_THROWS_AS(load_index(p), format_error);
    }
    SUBCASE("truncated file") {
        const std::string bytes = nftest::read_file(path);
        const std::string p = nftest::path_join(kDir, "trunc.nfi");
        nftest::write_file(p, bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(load_index(p), format_error);
    }
}
