#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nf/dataset.hpp"
#include "nf/embed.hpp"
#include "nf/index.hpp"
#include "nf/model.hpp"

namespace nf {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t accumulation = 8;  // queries per optimizer step
    double lr = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double early_stop_delta = 0.001;
    std::size_t early_stop_patience = 4;
    std::size_t eval_every = 4;  // evaluations per epoch
    std::size_t checkpoint_every_steps = 160;
    std::uint64_t seed = 0;
    std::string out_dir;  // checkpoints land here when non-empty

    void validate() const;
};

// The embedding tables a pipeline stage works with. `retrieval` holds
// query vectors in the index's space, `model` the head-input space; for
// the bundled toy pipeline they are the same table. `pairs` switches the
// head to cross-encoder mode: pair features are keyed by
// query_id + '\x01' + neighbour_id.
struct Tables {
    const EmbeddingTable* retrieval = nullptr;
    const EmbeddingTable* model = nullptr;
    const EmbeddingTable* pairs = nullptr;
};

std::string pair_key(const std::string& query_id, const std::string& neighbour_id);

// One query with its retrieved neighbourhood, ready for a forward pass.
struct Batch {
    std::string query_id;
    BinaryLabel query_label = BinaryLabel::Neutral;
    Vec query_vec;                   // model space (empty in cross-encoder mode)
    Neighbourhood hood;
    std::vector<Vec> neighbour_vecs; // model space (bi-encoder)
    Mat pair_features;               // k x h (cross-encoder)
    std::vector<int> targets;        // 1 where neighbour label matches query label
};

// Elementwise label-equality indicator.
std::vector<int> agreement_targets(BinaryLabel query_label,
                                   const std::vector<BinaryLabel>& neighbour_labels);

// Retrieves k neighbours and fills in model-space vectors and targets.
Batch make_batch(const Example& query, const Index& index, const Tables& tables,
                 const HeadConfig& config, const std::string* exclude_id = nullptr);

struct LossParts {
    double total = 0.0;
    double lal = 0.0;  // mean label-agreement loss over neighbours
    double cll = 0.0;  // query classification loss
};

// total = (1 - lambda) * lal + lambda * cll, natural-log cross-entropies.
LossParts loss(const ForwardTrace& trace, const std::vector<int>& targets,
               BinaryLabel query_label, double lambda);

using HeadGrads = HeadParams;  // same shapes, gradient values

struct BackwardResult {
    ForwardTrace trace;
    LossParts loss;
    HeadGrads grads;
};

// Analytic gradients of the combined loss with respect to every tensor,
// including the shared-projection paths from both branches.
BackwardResult backward(const HeadParams& params, const HeadConfig& config,
                        const Batch& batch);

struct HistoryRow {
    std::uint64_t step = 0;
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_precision = 0.0;
    double dev_recall = 0.0;
    double dev_f1 = 0.0;
};

struct TrainState {
    HeadParams params;
    HeadParams adam_m;  // first moments (zero-filled for SGD)
    HeadParams adam_v;  // second moments
    std::uint64_t step = 0;
    double best_dev_f1 = 0.0;
    bool has_best = false;
    std::size_t evals_since_improvement = 0;
    std::vector<HistoryRow> history;
};

TrainState make_train_state(const HeadConfig& config);

// One optimizer update from already-averaged gradients. Throws
// training_error on non-finite gradients.
void optimizer_step(TrainState& state, const HeadGrads& grads,
                    const TrainConfig& config);

struct TrainResult {
    HeadParams best_params;
    std::vector<HistoryRow> history;
    double best_dev_f1 = 0.0;
    std::uint64_t steps = 0;
};

// Multi-task training over target queries with neighbours from the source
// index. Evaluates dev flagged-F1 `eval_every` times per epoch, keeps the
// best parameters, stops early after `early_stop_patience` evaluations
// without an improvement > early_stop_delta, and checkpoints every
// `checkpoint_every_steps` optimizer steps plus at best-dev events.
TrainResult train_loop(const HeadConfig& head_config, const TrainConfig& train_config,
                       const Dataset& target_train, const Dataset& target_dev,
                       const Index& source_index, const Tables& tables,
                       std::optional<HeadParams> init = std::nullopt);

// Source-as-query pre-training: identical loop, but queries iterate over
// the source corpus with their own id excluded from retrieval and there is
// no dev set (no early stopping; final parameters are returned).
TrainResult cli_pretrain(const HeadConfig& head_config,
                         const TrainConfig& train_config, const Dataset& source,
                         const Index& source_index, const Tables& tables,
                         std::optional<HeadParams> init = std::nullopt);

// History file: step, epoch, train_loss (17 significant digits),
// dev_precision, dev_recall, dev_f1 — tab-separated, one row per line.
void save_history(const std::vector<HistoryRow>& history, const std::string& path);

// Central finite-difference verification of `backward` over seeded random
// instances; returns the max relative error across all parameters.
struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t instances = 0;
    std::size_t parameters_checked = 0;
};
GradCheckReport gradient_check(std::uint64_t seed, std::size_t trials,
                               double epsilon = 1e-5);

}  // namespace nf
