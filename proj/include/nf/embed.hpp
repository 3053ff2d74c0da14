#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nf/mat.hpp"

namespace nf {

// Returns v / ||v||_2, or v unchanged when ||v||_2 < 1e-12.
Vec l2_normalize(Vec v);

// Deterministic bag-of-character-3-grams embedding: lower-cased codepoint
// 3-grams are hashed into `dim` buckets with seeded FNV-1a, counted, and
// L2-normalized. Texts shorter than three codepoints wrap around cyclically
// so "ab" contributes the grams "aba" and "bab". Empty or whitespace-only
// text maps to the zero vector.
Vec embed_text(const std::string& text, std::size_t dim, std::uint64_t seed);

// id -> unit-norm vector, fixed dimensionality. Iteration order is
// insertion order, which makes saves byte-deterministic.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    // Normalizes and inserts; first insertion fixes the dimension.
    void add(const std::string& id, Vec v);

    const Vec* find(const std::string& id) const;
    // Throws validation_error naming the id when absent.
    const Vec& at(const std::string& id) const;
    bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

    // Adds every entry of `other`; duplicate ids or a dim mismatch throw.
    void merge(const EmbeddingTable& other);

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<Vec> vectors_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Binary format: magic "NFV1", u32 dim, u64 count, then per record
// u16 id length, id bytes, dim * f32 values (all little-endian).
void save_embeddings(const EmbeddingTable& table, const std::string& path);

// Accepts the binary format or the text fallback `id<TAB>v1 v2 ... vd`.
// Vectors are L2-normalized on load; dim is inferred from the first record
// unless `expected_dim` is given.
EmbeddingTable load_embeddings(const std::string& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);

// Embeds every example text of a dataset (helper for the CLI).
struct Dataset;  // fwd
EmbeddingTable embed_dataset(const Dataset& dataset, std::size_t dim,
                             std::uint64_t seed);

}  // namespace nf
