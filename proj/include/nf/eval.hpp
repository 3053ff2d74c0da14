#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nf/dataset.hpp"
#include "nf/index.hpp"
#include "nf/model.hpp"

namespace nf {

struct Tables;  // train.hpp

// Flagged is the positive class throughout.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    void add(BinaryLabel predicted, BinaryLabel gold);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const std::vector<BinaryLabel>& preds,
                          const std::vector<BinaryLabel>& golds);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Zero-denominator cases yield 0 rather than NaN.
Prf f1_flagged(const ConfusionCounts& c);

struct LangMetrics {
    Prf prf;
    std::uint64_t support = 0;
    ConfusionCounts counts;
};

struct NeighbourExplanation {
    std::string id;
    double score = 0.0;  // retrieval score (or BE score after re-ranking)
    BinaryLabel label = BinaryLabel::Neutral;
    double attention = 0.0;
    double p_agree = 0.0;
};

struct ExampleRecord {
    std::string id;
    BinaryLabel gold = BinaryLabel::Neutral;
    BinaryLabel predicted = BinaryLabel::Neutral;
    std::vector<NeighbourExplanation> neighbours;  // only when explaining
};

struct Report {
    std::string dataset;
    std::string model;
    std::map<std::string, LangMetrics> per_language;  // key: language code
    Prf overall;
    std::uint64_t support = 0;
    ConfusionCounts overall_counts;
    std::vector<ExampleRecord> examples;  // populated by predict
};

// What a predictor returns for one query.
struct Prediction {
    BinaryLabel label = BinaryLabel::Neutral;
    std::vector<NeighbourExplanation> neighbours;
};

// A predictor sees the query, its retrieval-space vector, and the
// retrieved neighbourhood. `explain` asks for per-neighbour details.
using Predictor = std::function<Prediction(const Example&, const Vec& query_vec,
                                           const Neighbourhood& hood, bool explain)>;

struct EvalOptions {
    std::size_t k = 10;
    bool explain = false;
    bool keep_examples = false;
    std::size_t threads = 1;
    std::string model_descriptor;
};

// Retrieves a neighbourhood per example, applies the predictor, and
// aggregates per-language and overall (micro) metrics. Deterministic and
// independent of the thread count.
Report evaluate(const Predictor& predictor, const Dataset& dataset,
                const Index& index, const Tables& tables, const EvalOptions& options);

// Head-model predictor (bi-encoder, or cross-encoder when tables.pairs is
// set); used by the predict/evaluate commands.
Predictor head_predictor(const HeadParams& params, const HeadConfig& config,
                         const Tables& tables);

// Fixed-key-order text serialization; metrics at 4 decimal places,
// attention weights at 6. read_report(write_report(r)) round-trips.
void write_report(const Report& report, const std::string& path);
std::string format_report(const Report& report);
Report read_report(const std::string& path);

}  // namespace nf
