#include "nf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "nf/errors.hpp"
#include "nf/rng.hpp"

namespace nf {

using json = nlohmann::json;

const char* to_string(BinaryLabel label) {
    return label == BinaryLabel::Flagged ? "flagged" : "neutral";
}

BinaryLabel label_from_string(const std::string& s) {
    if (s == "flagged") return BinaryLabel::Flagged;
    if (s == "neutral") return BinaryLabel::Neutral;
    throw validation_error("unknown label string: \"" + s + "\"");
}

const std::set<std::string>& default_fine_vocabulary() {
    static const std::set<std::string> vocab = {
        "toxic", "severe_toxic", "obscene", "threat", "insult", "identity_hate"};
    return vocab;
}

BinaryLabel map_fine_to_binary(const std::set<std::string>& raw_labels,
                               const std::set<std::string>& vocabulary) {
    bool flagged = false;
    for (const auto& label : raw_labels) {
        if (vocabulary.count(label)) {
            flagged = true;
        } else if (label != "neutral") {
            throw validation_error("raw label outside configured vocabulary: \"" +
                                   label + "\"");
        }
    }
    return flagged ? BinaryLabel::Flagged : BinaryLabel::Neutral;
}

namespace {

std::string stem_of(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base;
}

LabelCounts tally(const std::vector<Example>& examples) {
    LabelCounts counts;
    for (const auto& ex : examples) {
        if (ex.label == BinaryLabel::Flagged) {
            ++counts.flagged;
        } else {
            ++counts.neutral;
        }
    }
    return counts;
}

}  // namespace

Dataset load_jsonl(const std::string& path, std::optional<DatasetRole> role,
                   const std::set<std::string>& vocabulary) {
    std::ifstream file(path);
    if (!file) throw parse_error("cannot open dataset file: " + path);

    Dataset ds;
    ds.name = stem_of(path);

    std::unordered_set<std::string> seen_ids;
    bool any_raw = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const std::string where = path + ":" + std::to_string(line_no);
        if (!rec.is_object()) throw parse_error(where + ": record is not an object");

        Example ex;
        try {
            ex.id = rec.at("id").get<std::string>();
            ex.text = rec.at("text").get<std::string>();
            ex.lang = rec.at("lang").get<std::string>();
        } catch (const json::exception& e) {
            throw parse_error(where + ": " + e.what());
        }
        if (ex.id.empty()) throw validation_error(where + ": empty id");
        if (!seen_ids.insert(ex.id).second) {
            throw validation_error(where + ": duplicate id \"" + ex.id + "\"");
        }

        if (rec.contains("raw_labels")) {
            if (!rec["raw_labels"].is_array()) {
                throw parse_error(where + ": raw_labels must be an array");
            }
            for (const auto& item : rec["raw_labels"]) {
                if (!item.is_string()) {
                    throw parse_error(where + ": raw_labels entries must be strings");
                }
                ex.raw_labels.insert(item.get<std::string>());
            }
            any_raw = true;
        }

        try {
            if (rec.contains("label")) {
                ex.label = label_from_string(rec["label"].get<std::string>());
            } else if (rec.contains("raw_labels")) {
                ex.label = map_fine_to_binary(ex.raw_labels, vocabulary);
            } else {
                throw validation_error("record has neither label nor raw_labels");
            }
        } catch (const validation_error& e) {
            throw validation_error(where + ": " + e.what());
        }

        ds.examples.push_back(std::move(ex));
    }

    if (role) {
        if (*role == DatasetRole::Target && any_raw) {
            throw validation_error(path + ": target dataset carries raw_labels");
        }
        ds.role = *role;
    } else {
        ds.role = any_raw ? DatasetRole::Source : DatasetRole::Target;
    }
    ds.counts = tally(ds.examples);
    return ds;
}

void save_jsonl(const Dataset& dataset, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw format_error("cannot open file for writing: " + path);
    for (const auto& ex : dataset.examples) {
        json rec;
        rec["id"] = ex.id;
        rec["text"] = ex.text;
        rec["lang"] = ex.lang;
        if (!ex.raw_labels.empty()) {
            rec["raw_labels"] = ex.raw_labels;
        }
        rec["label"] = to_string(ex.label);
        file << rec.dump() << "\n";
    }
    if (!file) throw format_error("write failed: " + path);
}

Splits split(const Dataset& dataset, const SplitSpec& spec) {
    if (dataset.examples.empty()) throw argument_error("cannot split empty dataset");
    if (spec.train_fraction < 0 || spec.dev_fraction < 0 || spec.test_fraction < 0) {
        throw argument_error("split fractions must be non-negative");
    }
    const double sum = spec.train_fraction + spec.dev_fraction + spec.test_fraction;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw argument_error("split fractions must sum to 1");
    }

    // Rank examples by seeded id hash so assignment ignores file order.
    const std::size_t n = dataset.examples.size();
    std::vector<std::size_t> order(n);
    std::vector<std::uint64_t> hashes(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
        const std::string& id = dataset.examples[i].id;
        hashes[i] = fnv1a64(id.data(), id.size(), spec.seed);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
        return dataset.examples[a].id < dataset.examples[b].id;
    });

    // Largest-remainder apportionment keeps each size within one of n*f.
    const double fractions[3] = {spec.train_fraction, spec.dev_fraction,
                                 spec.test_fraction};
    std::size_t sizes[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double target = fractions[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(target + 1e-9));
        remainders[i] = target - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (remainders[i] > remainders[best] + 1e-12) best = i;
        }
        ++sizes[best];
        remainders[best] = -1.0;
        ++assigned;
    }

    Splits out;
    Dataset* parts[3] = {&out.train, &out.dev, &out.test};
    const char* suffix[3] = {"-train", "-dev", "-test"};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        parts[i]->name = dataset.name + suffix[i];
        parts[i]->role = dataset.role;
        parts[i]->examples.reserve(sizes[i]);
        for (std::size_t j = 0; j < sizes[i]; ++j, ++pos) {
            parts[i]->examples.push_back(dataset.examples[order[pos]]);
        }
        parts[i]->counts = tally(parts[i]->examples);
    }
    return out;
}

}  // namespace nf
