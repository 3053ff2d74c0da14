#include "nf/embed.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nf/dataset.hpp"
#include "nf/errors.hpp"
#include "nf/io.hpp"
#include "nf/rng.hpp"

namespace nf {

Vec l2_normalize(Vec v) {
    const double n = norm2(v);
    if (n < 1e-12) return v;
    for (double& x : v) x /= n;
    return v;
}

namespace {

// Decodes UTF-8 into codepoints; malformed bytes become U+FFFD.
std::vector<std::uint32_t> utf8_codepoints(const std::string& text) {
    std::vector<std::uint32_t> cps;
    cps.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::uint32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c >> 5) == 0x6) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c >> 4) == 0xE) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c >> 3) == 0x1E) {
            len = 4;
            cp = c & 0x07;
        }
        if (len > 1) {
            if (i + len > text.size()) {
                cp = 0xFFFD;
                len = 1;
            } else {
                for (std::size_t j = 1; j < len; ++j) {
                    const unsigned char cc = static_cast<unsigned char>(text[i + j]);
                    if ((cc >> 6) != 0x2) {
                        cp = 0xFFFD;
                        len = 1;
                        break;
                    }
                    cp = (cp << 6) | (cc & 0x3F);
                }
            }
        }
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

bool is_ascii_space(std::uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v';
}

std::uint32_t ascii_lower(std::uint32_t cp) {
    return (cp >= 'A' && cp <= 'Z') ? cp + 0x20 : cp;
}

std::uint64_t hash_gram(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                        std::uint64_t seed) {
    unsigned char bytes[12];
    const std::uint32_t cps[3] = {a, b, c};
    for (int g = 0; g < 3; ++g) {
        for (int k = 0; k < 4; ++k) {
            bytes[g * 4 + k] = static_cast<unsigned char>((cps[g] >> (8 * k)) & 0xff);
        }
    }
    return fnv1a64(bytes, sizeof bytes, seed);
}

}  // namespace

Vec embed_text(const std::string& text, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw argument_error("embedding dim must be at least 2");

    std::vector<std::uint32_t> cps = utf8_codepoints(text);
    for (auto& cp : cps) cp = ascii_lower(cp);

    bool all_space = true;
    for (auto cp : cps) {
        if (!is_ascii_space(cp)) {
            all_space = false;
            break;
        }
    }
    Vec v(dim, 0.0);
    if (cps.empty() || all_space) return v;

    const std::size_t n = cps.size();
    if (n >= 3) {
        for (std::size_t i = 0; i + 2 < n; ++i) {
            v[hash_gram(cps[i], cps[i + 1], cps[i + 2], seed) % dim] += 1.0;
        }
    } else {
        // Cyclic padding: one wrapped gram per position.
        for (std::size_t i = 0; i < n; ++i) {
            v[hash_gram(cps[i], cps[(i + 1) % n], cps[(i + 2) % n], seed) % dim] += 1.0;
        }
    }
    return l2_normalize(std::move(v));
}

void EmbeddingTable::add(const std::string& id, Vec v) {
    if (id.empty()) throw validation_error("embedding id must be non-empty");
    if (dim_ == 0) {
        dim_ = v.size();
    } else if (v.size() != dim_) {
        throw format_error("vector for id \"" + id + "\" has length " +
                           std::to_string(v.size()) + ", expected " +
                           std::to_string(dim_));
    }
    if (!all_finite(v)) {
        throw format_error("vector for id \"" + id + "\" has non-finite values");
    }
    if (!by_id_.emplace(id, ids_.size()).second) {
        throw validation_error("duplicate embedding id \"" + id + "\"");
    }
    ids_.push_back(id);
    vectors_.push_back(l2_normalize(std::move(v)));
}

const Vec* EmbeddingTable::find(const std::string& id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &vectors_[it->second];
}

const Vec& EmbeddingTable::at(const std::string& id) const {
    const Vec* v = find(id);
    if (!v) throw validation_error("no embedding for id \"" + id + "\"");
    return *v;
}

void EmbeddingTable::merge(const EmbeddingTable& other) {
    for (std::size_t i = 0; i < other.ids_.size(); ++i) {
        add(other.ids_[i], other.vectors_[i]);
    }
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw format_error("cannot open file for writing: " + path);
    io::write_bytes(file, "NFV1", 4);
    io::write_u32(file, static_cast<std::uint32_t>(table.dim()));
    io::write_u64(file, table.size());
    for (const auto& id : table.ids()) {
        const Vec& v = table.at(id);
        if (id.size() > 0xFFFF) throw format_error("id too long to serialize: " + id);
        io::write_u16(file, static_cast<std::uint16_t>(id.size()));
        io::write_bytes(file, id.data(), id.size());
        for (double x : v) io::write_f32(file, static_cast<float>(x));
    }
}

namespace {

EmbeddingTable load_embeddings_text(const std::string& path,
                                    std::optional<std::size_t> expected_dim) {
    std::ifstream file(path);
    if (!file) throw format_error("cannot open embeddings file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": expected id<TAB>values");
        }
        const std::string id = line.substr(0, tab);
        std::istringstream values(line.substr(tab + 1));
        Vec v;
        double x;
        while (values >> x) v.push_back(x);
        if (!values.eof()) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": malformed vector value");
        }
        if (!all_finite(v)) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": non-finite vector value");
        }
        if (expected_dim && v.size() != *expected_dim) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": dimension mismatch");
        }
        try {
            table.add(id, std::move(v));
        } catch (const error& e) {
            throw format_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path,
                               std::optional<std::size_t> expected_dim) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw format_error("cannot open embeddings file: " + path);
    char magic[4] = {};
    file.read(magic, 4);
    if (file.gcount() == 4 && std::string(magic, 4) == "NFV1") {
        const std::uint32_t dim = io::read_u32(file);
        if (dim < 1) throw format_error(path + ": invalid dimension 0");
        if (expected_dim && dim != *expected_dim) {
            throw format_error(path + ": dimension " + std::to_string(dim) +
                               " does not match expected " +
                               std::to_string(*expected_dim));
        }
        const std::uint64_t count = io::read_u64(file);
        EmbeddingTable table;
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::uint16_t id_len = io::read_u16(file);
            const std::string id = io::read_string(file, id_len);
            Vec v(dim);
            for (std::uint32_t j = 0; j < dim; ++j) {
                v[j] = static_cast<double>(io::read_f32(file));
            }
            if (!all_finite(v)) {
                throw format_error(path + ": non-finite value in vector for id \"" +
                                   id + "\"");
            }
            table.add(id, std::move(v));
        }
        return table;
    }
    return load_embeddings_text(path, expected_dim);
}

EmbeddingTable embed_dataset(const Dataset& dataset, std::size_t dim,
                             std::uint64_t seed) {
    EmbeddingTable table(dim);
    for (const auto& ex : dataset.examples) {
        table.add(ex.id, embed_text(ex.text, dim, seed));
    }
    return table;
}

}  // namespace nf
