#include "nf/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nf/errors.hpp"
#include "nf/io.hpp"

namespace nf {

namespace {

// Sequential double accumulation over f32 rows. Kept branch-free and
// order-fixed so scores are bit-reproducible and match the test oracle.
double dot_row(const float* row, const double* q, std::size_t dim) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += static_cast<double>(row[j]) * q[j];
    return s;
}

struct Candidate {
    double score;
    std::uint32_t row;
};

}  // namespace

Index build_index(const Dataset& dataset, const EmbeddingTable& table) {
    Index index;
    index.dim = table.dim();
    index.ids.reserve(dataset.size());
    index.labels.reserve(dataset.size());
    index.matrix.reserve(dataset.size() * index.dim);
    for (const auto& ex : dataset.examples) {
        const Vec* v = table.find(ex.id);
        if (!v) {
            throw validation_error("no embedding for dataset id \"" + ex.id + "\"");
        }
        index.ids.push_back(ex.id);
        index.labels.push_back(ex.label);
        for (double x : *v) index.matrix.push_back(static_cast<float>(x));
    }
    return index;
}

Neighbourhood query_topk(const Index& index, std::span<const double> query,
                         std::size_t k, const std::string* exclude_id) {
    if (query.size() != index.dim) {
        throw argument_error("query has length " + std::to_string(query.size()) +
                             ", index dim is " + std::to_string(index.dim));
    }
    std::size_t available = index.size();
    std::size_t excluded_row = index.size();
    if (exclude_id) {
        for (std::size_t i = 0; i < index.size(); ++i) {
            if (index.ids[i] == *exclude_id) {
                excluded_row = i;
                --available;
                break;
            }
        }
    }
    if (k == 0) throw argument_error("k must be positive");
    if (k > available) {
        throw argument_error("k=" + std::to_string(k) + " exceeds available rows (" +
                             std::to_string(available) + ")");
    }

    Vec qn = l2_normalize(Vec(query.begin(), query.end()));

    // `a` wins over `b` under the (-score, ascending id) order.
    const auto better = [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return index.ids[a.row] < index.ids[b.row];
    };

    // Worst-kept candidate sits at top_.front(); heap on inverted order.
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    const auto heap_cmp = [&](const Candidate& a, const Candidate& b) {
        return better(a, b);
    };

    constexpr std::size_t kBlock = 256;
    double scores[kBlock];
    for (std::size_t begin = 0; begin < index.size(); begin += kBlock) {
        const std::size_t end = std::min(begin + kBlock, index.size());
        const float* block = index.row(begin);
        for (std::size_t i = begin; i < end; ++i) {
            scores[i - begin] = dot_row(block + (i - begin) * index.dim, qn.data(),
                                        index.dim);
        }
        for (std::size_t i = begin; i < end; ++i) {
            if (i == excluded_row) continue;
            Candidate c{scores[i - begin], static_cast<std::uint32_t>(i)};
            if (heap.size() < k) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            } else if (better(c, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), heap_cmp);
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            }
        }
    }

    std::sort(heap.begin(), heap.end(), better);
    Neighbourhood out;
    out.hits.reserve(heap.size());
    for (const auto& c : heap) {
        out.hits.push_back(Hit{index.ids[c.row], c.score, index.labels[c.row]});
    }
    return out;
}

void save_index(const Index& index, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw format_error("cannot open file for writing: " + path);
    io::write_bytes(file, "NFI1", 4);
    io::write_u32(file, 1);  // version
    io::write_u32(file, static_cast<std::uint32_t>(index.dim));
    io::write_u64(file, index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::string& id = index.ids[i];
        if (id.size() > 0xFFFF) throw format_error("id too long to serialize: " + id);
        io::write_u16(file, static_cast<std::uint16_t>(id.size()));
        io::write_bytes(file, id.data(), id.size());
        io::write_u8(file, index.labels[i] == BinaryLabel::Flagged ? 1 : 0);
        const float* row = index.row(i);
        for (std::size_t j = 0; j < index.dim; ++j) io::write_f32(file, row[j]);
    }
}

Index load_index(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw format_error("cannot open index file: " + path);
    io::expect_magic(file, "NFI1");
    const std::uint32_t version = io::read_u32(file);
    if (version != 1) {
        throw format_error(path + ": unsupported index version " +
                           std::to_string(version));
    }
    Index index;
    index.dim = io::read_u32(file);
    const std::uint64_t count = io::read_u64(file);
    index.ids.reserve(count);
    index.labels.reserve(count);
    index.matrix.reserve(count * index.dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint16_t id_len = io::read_u16(file);
        index.ids.push_back(io::read_string(file, id_len));
        const std::uint8_t label = io::read_u8(file);
        if (label > 1) throw format_error(path + ": invalid label byte");
        index.labels.push_back(label == 1 ? BinaryLabel::Flagged
                                          : BinaryLabel::Neutral);
        for (std::uint32_t j = 0; j < index.dim; ++j) {
            const float x = io::read_f32(file);
            if (!std::isfinite(x)) {
                throw format_error(path + ": non-finite row value");
            }
            index.matrix.push_back(x);
        }
    }
    return index;
}

}  // namespace nf
