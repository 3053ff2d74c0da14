#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nf {

enum class BinaryLabel : std::uint8_t { Neutral = 0, Flagged = 1 };

const char* to_string(BinaryLabel label);
BinaryLabel label_from_string(const std::string& s);  // throws validation_error

struct Example {
    std::string id;
    std::string text;
    std::string lang;
    std::set<std::string> raw_labels;
    BinaryLabel label = BinaryLabel::Neutral;

    bool operator==(const Example&) const = default;
};

enum class DatasetRole { Source, Target };

struct LabelCounts {
    std::size_t flagged = 0;
    std::size_t neutral = 0;

    std::size_t total() const { return flagged + neutral; }
    bool operator==(const LabelCounts&) const = default;
};

struct Dataset {
    std::string name;
    DatasetRole role = DatasetRole::Target;
    std::vector<Example> examples;
    LabelCounts counts;

    std::size_t size() const { return examples.size(); }
    bool operator==(const Dataset&) const = default;
};

// The six fine-grained labels of the default source corpus layout.
const std::set<std::string>& default_fine_vocabulary();

// Flagged iff raw_labels intersects the vocabulary; "neutral" is always
// accepted and never flags. Any other label throws validation_error.
BinaryLabel map_fine_to_binary(const std::set<std::string>& raw_labels,
                               const std::set<std::string>& vocabulary =
                                   default_fine_vocabulary());

// One JSON record per line with keys id, text, lang, and label or
// raw_labels. Role is inferred from content (any raw_labels => Source)
// unless given explicitly; an explicit Target role rejects raw_labels.
Dataset load_jsonl(const std::string& path,
                   std::optional<DatasetRole> role = std::nullopt,
                   const std::set<std::string>& vocabulary =
                       default_fine_vocabulary());

// Writes records with a fixed key order so output is byte-deterministic.
void save_jsonl(const Dataset& dataset, const std::string& path);

struct SplitSpec {
    double train_fraction = 0.8;
    double dev_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct Splits {
    Dataset train;
    Dataset dev;
    Dataset test;
};

// Deterministic partition: examples are ranked by a seeded hash of their
// id, so the assignment does not depend on file order. Split sizes match
// the fractions to within one example.
Splits split(const Dataset& dataset, const SplitSpec& spec);

}  // namespace nf
