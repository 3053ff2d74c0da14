#include "nf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nf/errors.hpp"
#include "nf/eval.hpp"
#include "nf/rng.hpp"

namespace nf {

void TrainConfig::validate() const {
    if (epochs < 1) throw argument_error("train config: epochs must be >= 1");
    if (accumulation < 1) throw argument_error("train config: accumulation must be >= 1");
    if (!(lr > 0.0)) throw argument_error("train config: lr must be positive");
    if (early_stop_patience < 1) {
        throw argument_error("train config: patience must be >= 1");
    }
    if (eval_every < 1) throw argument_error("train config: eval_every must be >= 1");
    if (checkpoint_every_steps < 1) {
        throw argument_error("train config: checkpoint cadence must be >= 1");
    }
}

std::string pair_key(const std::string& query_id, const std::string& neighbour_id) {
    return query_id + '\x01' + neighbour_id;
}

std::vector<int> agreement_targets(BinaryLabel query_label,
                                   const std::vector<BinaryLabel>& neighbour_labels) {
    if (neighbour_labels.empty()) {
        throw argument_error("agreement_targets: empty neighbour list");
    }
    std::vector<int> targets(neighbour_labels.size());
    for (std::size_t j = 0; j < neighbour_labels.size(); ++j) {
        targets[j] = neighbour_labels[j] == query_label ? 1 : 0;
    }
    return targets;
}

Batch make_batch(const Example& query, const Index& index, const Tables& tables,
                 const HeadConfig& config, const std::string* exclude_id) {
    if (!tables.retrieval) throw argument_error("make_batch: no retrieval table");

    Batch batch;
    batch.query_id = query.id;
    batch.query_label = query.label;

    const Vec& retrieval_vec = tables.retrieval->at(query.id);
    batch.hood = query_topk(index, retrieval_vec, config.k, exclude_id);
    batch.hood.query_id = query.id;

    std::vector<BinaryLabel> labels;
    labels.reserve(batch.hood.hits.size());
    for (const auto& hit : batch.hood.hits) labels.push_back(hit.label);
    batch.targets = agreement_targets(query.label, labels);

    if (config.cross_encoder()) {
        if (!tables.pairs) {
            throw argument_error("cross-encoder mode requires a pair table");
        }
        batch.pair_features = Mat(batch.hood.hits.size(), config.h);
        for (std::size_t j = 0; j < batch.hood.hits.size(); ++j) {
            const Vec& f = tables.pairs->at(pair_key(query.id, batch.hood.hits[j].id));
            if (f.size() != config.h) {
                throw argument_error("pair feature length does not match h");
            }
            std::copy(f.begin(), f.end(), batch.pair_features[j]);
        }
    } else {
        if (!tables.model) throw argument_error("make_batch: no model table");
        batch.query_vec = tables.model->at(query.id);
        batch.neighbour_vecs.reserve(batch.hood.hits.size());
        for (const auto& hit : batch.hood.hits) {
            batch.neighbour_vecs.push_back(tables.model->at(hit.id));
        }
    }
    return batch;
}

namespace {

ForwardTrace forward_batch(const HeadParams& params, const HeadConfig& config,
                           const Batch& batch) {
    if (config.cross_encoder()) {
        return forward_features(params, batch.pair_features);
    }
    return forward(params, config, batch.query_vec, batch.neighbour_vecs);
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossParts loss(const ForwardTrace& trace, const std::vector<int>& targets,
               BinaryLabel query_label, double lambda) {
    const std::size_t k = trace.H.rows;
    if (targets.size() != k) {
        throw argument_error("loss: targets length does not match neighbourhood");
    }
    LossParts parts;
    for (std::size_t j = 0; j < k; ++j) {
        parts.lal += cross_entropy(trace.agree_logits.row(j),
                                   static_cast<std::size_t>(targets[j]));
    }
    parts.lal /= static_cast<double>(k);
    const std::size_t y = query_label == BinaryLabel::Flagged ? 1 : 0;
    parts.cll = cross_entropy(trace.class_logits, y);
    parts.total = (1.0 - lambda) * parts.lal + lambda * parts.cll;
    return parts;
}

BackwardResult backward(const HeadParams& params, const HeadConfig& config,
                        const Batch& batch) {
    BackwardResult result;
    result.trace = forward_batch(params, config, batch);
    result.loss = loss(result.trace, batch.targets, batch.query_label, config.lambda);
    result.grads = zeros_like(params);

    const ForwardTrace& trace = result.trace;
    HeadGrads& g = result.grads;
    const Mat& H = trace.H;
    const std::size_t k = H.rows;
    const std::size_t h = H.cols;
    const std::size_t h_r = params.W1.rows;
    const double lambda = config.lambda;

    // Classification branch.
    const Vec class_prob = softmax(trace.class_logits);
    const std::size_t y = batch.query_label == BinaryLabel::Flagged ? 1 : 0;
    double d_class[2];
    for (std::size_t c = 0; c < 2; ++c) {
        d_class[c] = lambda * (class_prob[c] - (c == y ? 1.0 : 0.0));
    }
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            g.W_c[c][i] += d_class[c] * trace.pooled[i];
        }
        g.b_c[0][c] += d_class[c];
    }
    Vec d_pooled(h, 0.0);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            d_pooled[i] += params.W_c[c][i] * d_class[c];
        }
    }

    // Attention: pooled = sum_j a_j H_j, a = softmax(s), s_j = W2 tanh(W1 H_j).
    Vec d_attn(k);
    for (std::size_t j = 0; j < k; ++j) d_attn[j] = dot(d_pooled, H.row(j));
    double mean_d_attn = 0.0;
    for (std::size_t j = 0; j < k; ++j) mean_d_attn += trace.attn[j] * d_attn[j];
    Vec d_scores(k);
    for (std::size_t j = 0; j < k; ++j) {
        d_scores[j] = trace.attn[j] * (d_attn[j] - mean_d_attn);
    }

    Mat d_H(k, h);
    for (std::size_t j = 0; j < k; ++j) {
        const double a = trace.attn[j];
        double* dh = d_H[j];
        for (std::size_t i = 0; i < h; ++i) dh[i] = a * d_pooled[i];
    }

    Vec hidden(h_r);
    Vec d_pre(h_r);
    for (std::size_t j = 0; j < k; ++j) {
        matvec(params.W1, H.row(j), hidden);
        for (std::size_t r = 0; r < h_r; ++r) {
            const double m = std::tanh(hidden[r]);
            g.W2[0][r] += d_scores[j] * m;
            d_pre[r] = params.W2[0][r] * d_scores[j] * (1.0 - m * m);
        }
        outer_add(g.W1, d_pre, H.row(j));
        matvec_t_add(params.W1, d_pre, d_H.row(j));
    }

    // Agreement branch.
    const double agree_scale = (1.0 - lambda) / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) {
        const Vec prob = softmax(trace.agree_logits.row(j));
        const std::size_t t = static_cast<std::size_t>(batch.targets[j]);
        double d_agree[2];
        for (std::size_t c = 0; c < 2; ++c) {
            d_agree[c] = agree_scale * (prob[c] - (c == t ? 1.0 : 0.0));
        }
        double* dh = d_H[j];
        for (std::size_t c = 0; c < 2; ++c) {
            const double* wa = params.W_a[c];
            for (std::size_t i = 0; i < h; ++i) {
                g.W_a[c][i] += d_agree[c] * H[j][i];
                dh[i] += d_agree[c] * wa[i];
            }
            g.b_a[0][c] += d_agree[c];
        }
    }

    if (config.cross_encoder()) return result;

    // Shared projection: split each d_H row into the three feature blocks.
    const std::size_t p = config.p;
    Vec d_rep_q(p, 0.0);
    Vec d_rep_n(p);
    Vec d_z(p);
    for (std::size_t j = 0; j < k; ++j) {
        const double* dh = d_H[j];
        const double* rq = trace.rep_q.data();
        const double* rn = trace.rep_n[j];
        for (std::size_t i = 0; i < p; ++i) {
            const double s = sign_of(rq[i] - rn[i]);
            d_rep_q[i] += dh[i] + s * dh[2 * p + i];
            d_rep_n[i] = dh[p + i] - s * dh[2 * p + i];
        }
        for (std::size_t i = 0; i < p; ++i) {
            d_z[i] = d_rep_n[i] * (1.0 - rn[i] * rn[i]);
        }
        outer_add(g.W_p, d_z, batch.neighbour_vecs[j]);
        for (std::size_t i = 0; i < p; ++i) g.b_p[0][i] += d_z[i];
    }
    for (std::size_t i = 0; i < p; ++i) {
        d_z[i] = d_rep_q[i] * (1.0 - trace.rep_q[i] * trace.rep_q[i]);
    }
    outer_add(g.W_p, d_z, batch.query_vec);
    for (std::size_t i = 0; i < p; ++i) g.b_p[0][i] += d_z[i];

    return result;
}

TrainState make_train_state(const HeadConfig& config) {
    TrainState state;
    state.params = init_params(config);
    state.adam_m = zeros_like(state.params);
    state.adam_v = zeros_like(state.params);
    return state;
}

namespace {

std::vector<Mat*> tensors_of(HeadParams& params) {
    std::vector<Mat*> out;
    for_each_tensor(params, [&](const char*, Mat& m) { out.push_back(&m); });
    return out;
}

std::vector<const Mat*> tensors_of(const HeadParams& params) {
    std::vector<const Mat*> out;
    for_each_tensor(params, [&](const char*, const Mat& m) { out.push_back(&m); });
    return out;
}

}  // namespace

void optimizer_step(TrainState& state, const HeadGrads& grads,
                    const TrainConfig& config) {
    const auto gs = tensors_of(grads);
    for (const Mat* m : gs) {
        if (!all_finite(m->data)) {
            throw training_error("non-finite gradient encountered");
        }
    }

    const auto ps = tensors_of(state.params);
    ++state.step;
    if (config.optimizer == Optimizer::Sgd) {
        for (std::size_t t = 0; t < ps.size(); ++t) {
            for (std::size_t i = 0; i < ps[t]->data.size(); ++i) {
                ps[t]->data[i] -= config.lr * gs[t]->data[i];
            }
        }
        return;
    }

    const auto ms = tensors_of(state.adam_m);
    const auto vs = tensors_of(state.adam_v);
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < ps.size(); ++t) {
        for (std::size_t i = 0; i < ps[t]->data.size(); ++i) {
            const double grad = gs[t]->data[i];
            double& m = ms[t]->data[i];
            double& v = vs[t]->data[i];
            m = b1 * m + (1.0 - b1) * grad;
            v = b2 * v + (1.0 - b2) * grad * grad;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            ps[t]->data[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
    }
}

namespace {

void accumulate(HeadGrads& into, const HeadGrads& grads) {
    const auto dst = tensors_of(into);
    const auto src = tensors_of(grads);
    for (std::size_t t = 0; t < dst.size(); ++t) {
        for (std::size_t i = 0; i < dst[t]->data.size(); ++i) {
            dst[t]->data[i] += src[t]->data[i];
        }
    }
}

void scale(HeadGrads& grads, double factor) {
    for_each_tensor(grads, [&](const char*, Mat& m) {
        for (double& x : m.data) x *= factor;
    });
}

Prf evaluate_dev(const HeadParams& params, const HeadConfig& config,
                 const Dataset& dev, const Index& index, const Tables& tables) {
    ConfusionCounts counts;
    for (const auto& ex : dev.examples) {
        const Batch batch = make_batch(ex, index, tables, config);
        const ForwardTrace trace = forward_batch(params, config, batch);
        counts.add(predict_label(trace.class_logits), ex.label);
    }
    return f1_flagged(counts);
}

// Query positions (1-based, within the epoch) after which dev evaluation
// runs: eval_every points spread evenly, always including the epoch end.
std::vector<std::size_t> eval_positions(std::size_t n, std::size_t eval_every) {
    std::vector<std::size_t> positions;
    for (std::size_t i = 1; i <= eval_every; ++i) {
        const std::size_t pos = (n * i) / eval_every;
        if (pos >= 1 && (positions.empty() || pos > positions.back())) {
            positions.push_back(pos);
        }
    }
    return positions;
}

TrainResult run_loop(const HeadConfig& head_config, const TrainConfig& train_config,
                     const Dataset& queries, const Dataset* dev,
                     const Index& source_index, const Tables& tables,
                     bool exclude_self, std::optional<HeadParams> init) {
    head_config.validate();
    train_config.validate();
    if (queries.examples.empty()) throw argument_error("training set is empty");
    if (dev && dev->examples.empty()) throw argument_error("dev set is empty");
    const std::size_t available =
        source_index.size() - (exclude_self ? 1 : 0);
    if (head_config.k > available) {
        throw argument_error("k exceeds the number of retrievable source rows");
    }

    TrainState state = make_train_state(head_config);
    if (init) state.params = std::move(*init);

    const bool write_files = !train_config.out_dir.empty();
    namespace fs = std::filesystem;
    if (write_files) fs::create_directories(train_config.out_dir);

    const auto ckpt_path = [&](const std::string& name) {
        return (fs::path(train_config.out_dir) / name).string();
    };

    HeadParams best_params = state.params;
    HeadGrads accum = zeros_like(state.params);
    std::size_t window = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool stop = false;

    const std::size_t n = queries.examples.size();
    const std::vector<std::size_t> positions =
        eval_positions(n, train_config.eval_every);

    const auto flush_step = [&]() {
        if (window == 0) return;
        scale(accum, 1.0 / static_cast<double>(window));
        optimizer_step(state, accum, train_config);
        scale(accum, 0.0);
        window = 0;
        if (write_files && state.step % train_config.checkpoint_every_steps == 0) {
            save_checkpoint(state.params, head_config,
                            ckpt_path("ckpt_step" + std::to_string(state.step) +
                                      ".nfp"));
        }
    };

    for (std::size_t epoch = 0; epoch < train_config.epochs && !stop; ++epoch) {
        Rng shuffle_rng(train_config.seed + epoch);
        const std::vector<std::size_t> perm = shuffle_rng.permutation(n);
        std::size_t next_eval = 0;

        for (std::size_t qi = 0; qi < n && !stop; ++qi) {
            const Example& query = queries.examples[perm[qi]];
            const std::string* exclude = exclude_self ? &query.id : nullptr;
            const Batch batch =
                make_batch(query, source_index, tables, head_config, exclude);
            BackwardResult r = backward(state.params, head_config, batch);
            if (!std::isfinite(r.loss.total)) {
                throw training_error("non-finite training loss at step " +
                                     std::to_string(state.step));
            }
            accumulate(accum, r.grads);
            ++window;
            loss_sum += r.loss.total;
            ++loss_count;
            if (window == train_config.accumulation) flush_step();

            while (next_eval < positions.size() && positions[next_eval] == qi + 1) {
                ++next_eval;
                HistoryRow row;
                row.step = state.step;
                row.epoch = epoch;
                row.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count)
                                            : 0.0;
                loss_sum = 0.0;
                loss_count = 0;
                if (dev) {
                    const Prf prf = evaluate_dev(state.params, head_config, *dev,
                                                 source_index, tables);
                    row.dev_precision = prf.precision;
                    row.dev_recall = prf.recall;
                    row.dev_f1 = prf.f1;
                    if (!state.has_best) {
                        state.has_best = true;
                        state.best_dev_f1 = prf.f1;
                        best_params = state.params;
                        if (write_files) {
                            save_checkpoint(best_params, head_config,
                                            ckpt_path("best.nfp"));
                        }
                    } else if (prf.f1 >
                               state.best_dev_f1 + train_config.early_stop_delta) {
                        state.best_dev_f1 = prf.f1;
                        state.evals_since_improvement = 0;
                        best_params = state.params;
                        if (write_files) {
                            save_checkpoint(best_params, head_config,
                                            ckpt_path("best.nfp"));
                        }
                    } else {
                        ++state.evals_since_improvement;
                        if (state.evals_since_improvement >=
                            train_config.early_stop_patience) {
                            stop = true;
                        }
                    }
                }
                state.history.push_back(row);
            }
        }
        flush_step();  // partial accumulation window at epoch end
    }
    flush_step();

    TrainResult result;
    if (!dev) best_params = state.params;  // no dev: final parameters win
    result.best_params = std::move(best_params);
    result.history = std::move(state.history);
    result.best_dev_f1 = state.best_dev_f1;
    result.steps = state.step;
    if (write_files) {
        save_checkpoint(result.best_params, head_config, ckpt_path("best.nfp"));
        save_history(result.history, ckpt_path("history.tsv"));
    }
    return result;
}

}  // namespace

TrainResult train_loop(const HeadConfig& head_config, const TrainConfig& train_config,
                       const Dataset& target_train, const Dataset& target_dev,
                       const Index& source_index, const Tables& tables,
                       std::optional<HeadParams> init) {
    return run_loop(head_config, train_config, target_train, &target_dev,
                    source_index, tables, /*exclude_self=*/false, std::move(init));
}

TrainResult cli_pretrain(const HeadConfig& head_config,
                         const TrainConfig& train_config, const Dataset& source,
                         const Index& source_index, const Tables& tables,
                         std::optional<HeadParams> init) {
    return run_loop(head_config, train_config, source, nullptr, source_index,
                    tables, /*exclude_self=*/true, std::move(init));
}

void save_history(const std::vector<HistoryRow>& history, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw format_error("cannot open file for writing: " + path);
    char buf[160];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof buf, "%llu\t%zu\t%.17g\t%.6f\t%.6f\t%.6f\n",
                      static_cast<unsigned long long>(row.step), row.epoch,
                      row.train_loss, row.dev_precision, row.dev_recall, row.dev_f1);
        file << buf;
    }
    if (!file) throw format_error("write failed: " + path);
}

GradCheckReport gradient_check(std::uint64_t seed, std::size_t trials,
                               double epsilon) {
    const std::size_t d = 32, p = 16, h_r = 8;
    const std::size_t ks[] = {1, 5, 10};
    const double lambdas[] = {0.0, 0.3, 0.5, 1.0};

    GradCheckReport report;
    report.instances = trials;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t k = ks[trial % 3];
        const double lambda = lambdas[(trial / 3) % 4];
        const HeadConfig config = HeadConfig::bi_encoder(
            d, p, h_r, k, lambda, seed ^ (trial * 0x9E3779B97F4A7C15ull));
        HeadParams params = init_params(config);

        Rng rng(seed + 0xC0FFEEull * (trial + 1));
        Batch batch;
        batch.query_label =
            rng.below(2) == 1 ? BinaryLabel::Flagged : BinaryLabel::Neutral;
        batch.targets.resize(k);
        for (auto& t : batch.targets) t = static_cast<int>(rng.below(2));

        // Redraw inputs that land near an |x| kink of the difference block;
        // central differences are invalid there.
        for (int attempt = 0; attempt < 100; ++attempt) {
            const auto draw = [&]() {
                Vec v(d);
                for (double& x : v) x = rng.normal();
                return l2_normalize(std::move(v));
            };
            batch.query_vec = draw();
            batch.neighbour_vecs.assign(k, Vec{});
            for (auto& v : batch.neighbour_vecs) v = draw();

            const Vec rep_q = project(params, batch.query_vec);
            double min_gap = 1e9;
            for (const auto& v : batch.neighbour_vecs) {
                const Vec rep_n = project(params, v);
                for (std::size_t i = 0; i < p; ++i) {
                    min_gap = std::min(min_gap, std::abs(rep_q[i] - rep_n[i]));
                }
            }
            if (min_gap > 1e-3) break;
        }

        const BackwardResult analytic = backward(params, config, batch);

        const auto loss_at = [&](const HeadParams& ps) {
            const ForwardTrace trace = forward_batch(ps, config, batch);
            return loss(trace, batch.targets, batch.query_label, config.lambda).total;
        };

        const auto analytic_tensors = tensors_of(analytic.grads);
        auto param_tensors = tensors_of(params);
        for (std::size_t t = 0; t < param_tensors.size(); ++t) {
            for (std::size_t i = 0; i < param_tensors[t]->data.size(); ++i) {
                double& theta = param_tensors[t]->data[i];
                const double saved = theta;
                theta = saved + epsilon;
                const double up = loss_at(params);
                theta = saved - epsilon;
                const double down = loss_at(params);
                theta = saved;
                const double numeric = (up - down) / (2.0 * epsilon);
                const double a = analytic_tensors[t]->data[i];
                const double rel = std::abs(a - numeric) /
                                   std::max({std::abs(a), std::abs(numeric), 1e-6});
                report.max_rel_error = std::max(report.max_rel_error, rel);
                ++report.parameters_checked;
            }
        }
    }
    return report;
}

}  // namespace nf
