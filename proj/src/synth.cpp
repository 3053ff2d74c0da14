#include "nf/synth.hpp"

#include <cstdio>
#include <filesystem>

#include "nf/errors.hpp"
#include "nf/rng.hpp"

namespace nf {

namespace {

Vec random_unit(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    return l2_normalize(std::move(v));
}

Vec shifted_unit(const Vec& base, double shift, Rng& rng) {
    Vec v = base;
    for (double& x : v) x += shift * rng.normal();
    return l2_normalize(std::move(v));
}

struct Clusters {
    std::vector<Vec> topic_means;  // in the topic subspace
    Vec flagged_mean;              // in the label subspace
    Vec neutral_mean;
};

Vec sample_point(const SynthConfig& cfg, const Clusters& clusters,
                 std::size_t topic, bool flagged, Rng& rng) {
    const std::size_t td = cfg.topic_dims();
    const std::size_t ld = cfg.dim - td;
    Vec v(cfg.dim);
    const Vec& topic_mean = clusters.topic_means[topic];
    for (std::size_t i = 0; i < td; ++i) {
        v[i] = cfg.topic_scale * (topic_mean[i] + cfg.topic_noise * rng.normal());
    }
    const Vec& label_mean = flagged ? clusters.flagged_mean : clusters.neutral_mean;
    for (std::size_t i = 0; i < ld; ++i) {
        v[td + i] = cfg.label_scale * (label_mean[i] + cfg.label_noise * rng.normal());
    }
    return l2_normalize(std::move(v));
}

std::string make_text(const std::string& id, std::size_t topic, bool flagged,
                      Rng& rng) {
    // Token soup with a per-cluster vocabulary; the pipeline consumes the
    // generated vectors, so the text only needs to look plausible.
    static const char* flagged_words[] = {"grawk", "zuntish", "vexbol", "dramk"};
    static const char* neutral_words[] = {"melor", "quistan", "harvel", "sonnet"};
    static const char* topic_words[] = {"river", "market", "engine", "garden"};
    std::string text = topic_words[topic % 4];
    const char** pool = flagged ? flagged_words : neutral_words;
    const std::size_t words = 3 + rng.below(4);
    for (std::size_t i = 0; i < words; ++i) {
        text += ' ';
        text += pool[rng.below(4)];
    }
    text += " #" + id;
    return text;
}

std::set<std::string> pick_raw_labels(Rng& rng) {
    static const char* fine[] = {"toxic",  "severe_toxic", "obscene",
                                 "threat", "insult",       "identity_hate"};
    std::set<std::string> labels;
    labels.insert(fine[rng.below(6)]);
    if (rng.below(3) == 0) labels.insert(fine[rng.below(6)]);
    return labels;
}

}  // namespace

SynthOutput make_synthetic(const SynthConfig& cfg) {
    if (cfg.dim < 4) throw argument_error("synth: dim must be at least 4");
    if (cfg.source_n == 0 || cfg.target_n == 0) {
        throw argument_error("synth: corpus sizes must be positive");
    }

    const std::size_t td = cfg.topic_dims();
    const std::size_t ld = cfg.dim - td;

    Rng rng(cfg.seed);
    Clusters source_clusters;
    source_clusters.topic_means.reserve(cfg.topics);
    for (std::size_t t = 0; t < cfg.topics; ++t) {
        source_clusters.topic_means.push_back(random_unit(rng, td));
    }
    source_clusters.flagged_mean = random_unit(rng, ld);
    source_clusters.neutral_mean = source_clusters.flagged_mean;
    for (double& x : source_clusters.neutral_mean) x = -x;

    // The target distribution drifts: every cluster mean moves.
    Clusters target_clusters;
    target_clusters.topic_means.reserve(cfg.topics);
    for (std::size_t t = 0; t < cfg.topics; ++t) {
        target_clusters.topic_means.push_back(
            shifted_unit(source_clusters.topic_means[t], cfg.target_shift, rng));
    }
    target_clusters.flagged_mean =
        shifted_unit(source_clusters.flagged_mean, cfg.target_shift, rng);
    target_clusters.neutral_mean =
        shifted_unit(source_clusters.neutral_mean, cfg.target_shift, rng);

    SynthOutput out;
    out.vectors = EmbeddingTable(cfg.dim);

    out.source.name = "synth-source";
    out.source.role = DatasetRole::Source;
    for (std::size_t i = 0; i < cfg.source_n; ++i) {
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "s%06zu", i);
        Example ex;
        ex.id = idbuf;
        ex.lang = "en";
        const std::size_t topic = rng.below(cfg.topics);
        const bool flagged = rng.uniform01() < cfg.source_flagged_fraction;
        ex.label = flagged ? BinaryLabel::Flagged : BinaryLabel::Neutral;
        if (flagged) ex.raw_labels = pick_raw_labels(rng);
        ex.text = make_text(ex.id, topic, flagged, rng);
        out.vectors.add(ex.id, sample_point(cfg, source_clusters, topic, flagged, rng));
        if (flagged) {
            ++out.source.counts.flagged;
        } else {
            ++out.source.counts.neutral;
        }
        out.source.examples.push_back(std::move(ex));
    }

    Dataset target;
    target.name = "synth-target";
    target.role = DatasetRole::Target;
    static const char* target_langs[] = {"xa", "xb"};
    for (std::size_t i = 0; i < cfg.target_n; ++i) {
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "t%06zu", i);
        Example ex;
        ex.id = idbuf;
        ex.lang = target_langs[rng.below(2)];
        const std::size_t topic = rng.below(cfg.topics);
        const bool flagged = rng.uniform01() < cfg.target_flagged_fraction;
        ex.label = flagged ? BinaryLabel::Flagged : BinaryLabel::Neutral;
        ex.text = make_text(ex.id, topic, flagged, rng);
        out.vectors.add(ex.id, sample_point(cfg, target_clusters, topic, flagged, rng));
        if (flagged) {
            ++target.counts.flagged;
        } else {
            ++target.counts.neutral;
        }
        target.examples.push_back(std::move(ex));
    }

    SplitSpec spec;
    spec.train_fraction = cfg.target_train_fraction;
    spec.dev_fraction = cfg.target_dev_fraction;
    spec.test_fraction = cfg.target_test_fraction;
    spec.seed = cfg.seed;
    Splits splits = split(target, spec);
    out.target_train = std::move(splits.train);
    out.target_dev = std::move(splits.dev);
    out.target_test = std::move(splits.test);
    return out;
}

void write_synthetic(const SynthOutput& output, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto at = [&](const char* name) {
        return (fs::path(out_dir) / name).string();
    };
    save_jsonl(output.source, at("source.jsonl"));
    save_jsonl(output.target_train, at("target_train.jsonl"));
    save_jsonl(output.target_dev, at("target_dev.jsonl"));
    save_jsonl(output.target_test, at("target_test.jsonl"));
    save_embeddings(output.vectors, at("vectors.nfv"));
}

}  // namespace nf
