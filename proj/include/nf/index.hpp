#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nf/dataset.hpp"
#include "nf/embed.hpp"
#include "nf/mat.hpp"

namespace nf {

struct Hit {
    std::string id;
    double score = 0.0;
    BinaryLabel label = BinaryLabel::Neutral;

    bool operator==(const Hit&) const = default;
};

struct Neighbourhood {
    std::string query_id;
    std::vector<Hit> hits;  // scores non-increasing, ties by ascending id
};

// Exact retrieval over the source corpus: unit-norm f32 rows in dataset
// order, scored against a normalized query with a blocked scan.
struct Index {
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<BinaryLabel> labels;
    std::vector<float> matrix;  // row-major, ids.size() * dim

    std::size_t size() const { return ids.size(); }
    const float* row(std::size_t i) const { return matrix.data() + i * dim; }
};

// One row per dataset example, in dataset order. Missing embeddings throw
// a build error naming the id.
Index build_index(const Dataset& dataset, const EmbeddingTable& table);

// Top-k rows by dot(normalized query, row); ties broken by ascending id.
// The excluded id (if any) is removed before selection.
Neighbourhood query_topk(const Index& index, std::span<const double> query,
                         std::size_t k,
                         const std::string* exclude_id = nullptr);

// Format: magic "NFI1", u32 version=1, u32 dim, u64 count, then per record
// u16 id length, id bytes, u8 label (0=neutral, 1=flagged), dim * f32 row.
void save_index(const Index& index, const std::string& path);
Index load_index(const std::string& path);

}  // namespace nf
