#pragma once

#include <cstdint>
#include <string>

#include "nf/dataset.hpp"
#include "nf/embed.hpp"

namespace nf {

// Seeded generator for the offline experiment suite: a large labelled
// source corpus and a smaller shifted target corpus embedded in a space
// where the leading dimensions carry label-irrelevant topic structure and
// the trailing dimensions carry the (linearly separable) label signal.
// Raw cosine retrieval therefore mixes labels inside each topic, which is
// exactly the failure mode the trained head has to correct.
struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t source_n = 2000;
    std::size_t target_n = 300;
    std::size_t dim = 32;

    std::size_t topics = 4;
    double source_flagged_fraction = 0.45;
    double target_flagged_fraction = 0.5;
    double topic_scale = 1.0;    // weight of the topic block
    double label_scale = 0.22;   // weight of the label block
    double topic_noise = 0.35;
    double label_noise = 0.25;
    double target_shift = 0.3;   // cluster drift between source and target

    double target_train_fraction = 0.5;
    double target_dev_fraction = 0.25;
    double target_test_fraction = 0.25;

    std::size_t topic_dims() const { return std::min<std::size_t>(16, dim / 2); }
};

struct SynthOutput {
    Dataset source;        // raw_labels drawn from the fine-grained vocabulary
    Dataset target_train;  // binary labels only
    Dataset target_dev;
    Dataset target_test;
    EmbeddingTable vectors;  // source + target ids, unit norm
};

SynthOutput make_synthetic(const SynthConfig& config);

// Writes source.jsonl, target_train.jsonl, target_dev.jsonl,
// target_test.jsonl, and vectors.nfv into out_dir.
void write_synthetic(const SynthOutput& output, const std::string& out_dir);

}  // namespace nf
