#include "nf/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nf/baselines.hpp"
#include "nf/dataset.hpp"
#include "nf/embed.hpp"
#include "nf/errors.hpp"
#include "nf/eval.hpp"
#include "nf/index.hpp"
#include "nf/io.hpp"
#include "nf/model.hpp"
#include "nf/synth.hpp"
#include "nf/train.hpp"

namespace nf::cli {

namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path) || fs::is_directory(path)) {
        throw validation_error(what + " not found: " + path);
    }
}

std::vector<std::size_t> parse_k_list(const std::string& csv) {
    std::vector<std::size_t> ks;
    std::istringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const long v = std::stol(item);
            if (v < 1) throw std::out_of_range("k");
            ks.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw argument_error("bad k value in list: \"" + item + "\"");
        }
    }
    if (ks.empty()) throw argument_error("empty k list");
    return ks;
}

std::vector<double> parse_lambda_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const double v = std::stod(item);
            if (v < 0.0 || v > 1.0) throw std::out_of_range("lambda");
            out.push_back(v);
        } catch (const std::exception&) {
            throw argument_error("bad lambda value in list: \"" + item + "\"");
        }
    }
    if (out.empty()) throw argument_error("empty lambda list");
    return out;
}

EmbeddingTable load_merged_tables(const std::vector<std::string>& paths) {
    EmbeddingTable merged;
    for (const auto& path : paths) {
        require_file(path, "vector file");
        if (merged.size() == 0 && merged.dim() == 0) {
            merged = load_embeddings(path);
        } else {
            merged.merge(load_embeddings(path, merged.dim()));
        }
    }
    return merged;
}

// Model/retrieval table fallback when no vector files are given: index rows
// provide the source side, and dataset texts are toy-embedded at the index
// dimension (so the caller must have built the index from toy embeddings
// with the same seed for the spaces to line up).
EmbeddingTable table_from_index(const Index& index) {
    EmbeddingTable table(index.dim);
    Vec v(index.dim);
    for (std::size_t i = 0; i < index.size(); ++i) {
        const float* row = index.row(i);
        for (std::size_t j = 0; j < index.dim; ++j) v[j] = row[j];
        table.add(index.ids[i], v);
    }
    return table;
}

struct TableSet {
    EmbeddingTable model;
    EmbeddingTable retrieval_store;
    EmbeddingTable pairs_store;
    bool has_retrieval = false;
    bool has_pairs = false;

    Tables view() const {
        Tables t;
        t.model = &model;
        t.retrieval = has_retrieval ? &retrieval_store : &model;
        t.pairs = has_pairs ? &pairs_store : nullptr;
        return t;
    }
};

TableSet make_tables(const std::vector<std::string>& vector_paths,
                     const std::vector<std::string>& retrieval_paths,
                     const std::vector<std::string>& pair_paths,
                     const Index* fallback_index, const Dataset* fallback_dataset,
                     std::uint64_t embed_seed) {
    TableSet tables;
    if (!vector_paths.empty()) {
        tables.model = load_merged_tables(vector_paths);
    } else if (fallback_index) {
        tables.model = table_from_index(*fallback_index);
        if (fallback_dataset) {
            for (const auto& ex : fallback_dataset->examples) {
                if (!tables.model.contains(ex.id)) {
                    tables.model.add(
                        ex.id, embed_text(ex.text, fallback_index->dim, embed_seed));
                }
            }
        }
    } else {
        throw argument_error("no --vectors given and no index to fall back on");
    }
    if (!retrieval_paths.empty()) {
        tables.retrieval_store = load_merged_tables(retrieval_paths);
        tables.has_retrieval = true;
    }
    if (!pair_paths.empty()) {
        tables.pairs_store = load_merged_tables(pair_paths);
        tables.has_pairs = true;
    }
    return tables;
}

std::vector<Neighbourhood> retrieve_all(const Dataset& dataset, const Index& index,
                                        const Tables& tables, std::size_t depth) {
    std::vector<Neighbourhood> hoods;
    hoods.reserve(dataset.size());
    for (const auto& ex : dataset.examples) {
        Neighbourhood hood = query_topk(index, tables.retrieval->at(ex.id), depth);
        hood.query_id = ex.id;
        hoods.push_back(std::move(hood));
    }
    return hoods;
}

std::vector<BinaryLabel> gold_labels(const Dataset& dataset) {
    std::vector<BinaryLabel> gold;
    gold.reserve(dataset.size());
    for (const auto& ex : dataset.examples) gold.push_back(ex.label);
    return gold;
}

// Shared flag bundle for the two training commands.
struct TrainFlags {
    std::vector<std::string> vectors;
    std::vector<std::string> retrieval_vectors;
    std::vector<std::string> pair_vectors;
    std::string out_dir;
    std::string init_from;
    std::size_t p = 64;
    std::size_t h_r = 16;
    std::size_t k = 10;
    double lambda = 0.3;
    std::size_t epochs = 10;
    double lr = 1e-3;
    std::size_t accum = 8;
    std::string optimizer = "adam";
    double delta = 0.001;
    std::size_t patience = 4;
    std::size_t eval_every = 4;
    std::size_t checkpoint_every = 160;
    std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags, bool training_schedule) {
    cmd->add_option("--vectors", flags.vectors,
                    "Embedding table file(s); repeatable, ids are merged");
    cmd->add_option("--retrieval-vectors", flags.retrieval_vectors,
                    "Separate table for querying the index (defaults to --vectors)");
    cmd->add_option("--pair-vectors", flags.pair_vectors,
                    "Pair-feature table; switches the head to cross-encoder mode");
    cmd->add_option("--init-from", flags.init_from,
                    "Checkpoint to initialize parameters from");
    cmd->add_option("--p", flags.p, "Projection dimension")->capture_default_str();
    cmd->add_option("--attn-dim", flags.h_r, "Attention hidden dimension")
        ->capture_default_str();
    cmd->add_option("--k", flags.k, "Neighbourhood size")->capture_default_str();
    cmd->add_option("--lambda", flags.lambda,
                    "Classification loss weight in [0,1]")
        ->capture_default_str();
    cmd->add_option("--lr", flags.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--accum", flags.accum, "Queries per optimizer step")
        ->capture_default_str();
    cmd->add_option("--optimizer", flags.optimizer, "adam or sgd")
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Seed for init and shuffling")
        ->capture_default_str();
    if (training_schedule) {
        cmd->add_option("--epochs", flags.epochs, "Training epochs")
            ->capture_default_str();
        cmd->add_option("--delta", flags.delta, "Early-stop improvement threshold")
            ->capture_default_str();
        cmd->add_option("--patience", flags.patience,
                        "Evaluations without improvement before stopping")
            ->capture_default_str();
        cmd->add_option("--eval-every", flags.eval_every, "Evaluations per epoch")
            ->capture_default_str();
        cmd->add_option("--checkpoint-every", flags.checkpoint_every,
                        "Optimizer steps between checkpoints")
            ->capture_default_str();
    }
}

Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::Adam;
    if (name == "sgd") return Optimizer::Sgd;
    throw argument_error("unknown optimizer \"" + name + "\" (use adam or sgd)");
}

HeadConfig head_config_from(const TrainFlags& flags, std::size_t d,
                            std::size_t pair_dim) {
    if (!flags.pair_vectors.empty()) {
        return HeadConfig::cross_encoder_mode(d, pair_dim, flags.h_r, flags.k,
                                              flags.lambda, flags.seed);
    }
    return HeadConfig::bi_encoder(d, flags.p, flags.h_r, flags.k, flags.lambda,
                                  flags.seed);
}

TrainConfig train_config_from(const TrainFlags& flags) {
    TrainConfig cfg;
    cfg.epochs = flags.epochs;
    cfg.accumulation = flags.accum;
    cfg.lr = flags.lr;
    cfg.optimizer = parse_optimizer(flags.optimizer);
    cfg.early_stop_delta = flags.delta;
    cfg.early_stop_patience = flags.patience;
    cfg.eval_every = flags.eval_every;
    cfg.checkpoint_every_steps = flags.checkpoint_every;
    cfg.seed = flags.seed;
    cfg.out_dir = flags.out_dir;
    cfg.validate();
    return cfg;
}

std::optional<HeadParams> load_init(const std::string& path) {
    if (path.empty()) return std::nullopt;
    require_file(path, "checkpoint");
    return load_checkpoint(path).params;
}

HistoryRow best_history_row(const TrainResult& result) {
    HistoryRow best;
    for (const auto& row : result.history) {
        if (row.dev_f1 >= best.dev_f1) {
            if (row.dev_f1 == result.best_dev_f1) return row;
            best = row;
        }
    }
    return best;
}

int cmd_embed(const std::string& data, const std::string& out, std::size_t dim,
              std::uint64_t seed) {
    require_file(data, "dataset");
    const Dataset dataset = load_jsonl(data);
    const EmbeddingTable table = embed_dataset(dataset, dim, seed);
    save_embeddings(table, out);
    std::cout << "embedded " << table.size() << " texts at dim " << dim << " -> "
              << out << "\n";
    return 0;
}

int cmd_index_build(const std::string& data, const std::vector<std::string>& vectors,
                    const std::string& out) {
    require_file(data, "dataset");
    const Dataset dataset = load_jsonl(data);
    const EmbeddingTable table = load_merged_tables(vectors);
    const Index index = build_index(dataset, table);
    save_index(index, out);
    std::cout << "indexed " << index.size() << " rows at dim " << index.dim
              << " -> " << out << "\n";
    return 0;
}

int cmd_train(const TrainFlags& flags, const std::string& source_index_path,
              const std::string& train_path, const std::string& dev_path) {
    require_file(source_index_path, "index");
    require_file(train_path, "dataset");
    require_file(dev_path, "dataset");
    const Index index = load_index(source_index_path);
    const Dataset target_train = load_jsonl(train_path);
    const Dataset target_dev = load_jsonl(dev_path);

    TableSet tables = make_tables(flags.vectors, flags.retrieval_vectors,
                                  flags.pair_vectors, &index, nullptr, 0);
    const Tables t = tables.view();
    const HeadConfig head_config =
        head_config_from(flags, t.model->dim(), t.pairs ? t.pairs->dim() : 0);
    const TrainConfig train_config = train_config_from(flags);

    const TrainResult result = train_loop(head_config, train_config, target_train,
                                          target_dev, index, t,
                                          load_init(flags.init_from));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", result.best_dev_f1);
    std::cout << "trained " << result.steps << " steps, best dev f1 " << buf
              << ", checkpoints in " << flags.out_dir << "\n";
    return 0;
}

int cmd_cli_pretrain(const TrainFlags& flags, const std::string& source_path) {
    require_file(source_path, "dataset");
    const Dataset source = load_jsonl(source_path);

    TableSet tables = make_tables(flags.vectors, flags.retrieval_vectors,
                                  flags.pair_vectors, nullptr, nullptr, 0);
    const Tables t = tables.view();
    const Index index = build_index(source, *t.retrieval);
    const HeadConfig head_config =
        head_config_from(flags, t.model->dim(), t.pairs ? t.pairs->dim() : 0);
    const TrainConfig train_config = train_config_from(flags);

    const TrainResult result =
        cli_pretrain(head_config, train_config, source, index, t,
                     load_init(flags.init_from));
    std::cout << "pre-trained " << result.steps << " steps over " << source.size()
              << " source queries, checkpoints in " << flags.out_dir << "\n";
    return 0;
}

struct PredictFlags {
    std::string ckpt;
    std::string index_path;
    std::string data;
    std::string out;
    std::vector<std::string> vectors;
    std::vector<std::string> retrieval_vectors;
    std::vector<std::string> pair_vectors;
    std::size_t k = 0;  // 0: use the checkpoint's k
    std::uint64_t embed_seed = 0;
    std::size_t threads = 1;
    bool explain = false;
};

int run_head_eval(const PredictFlags& flags, bool keep_examples) {
    require_file(flags.ckpt, "checkpoint");
    require_file(flags.index_path, "index");
    require_file(flags.data, "dataset");
    const Checkpoint ckpt = load_checkpoint(flags.ckpt);
    const Index index = load_index(flags.index_path);
    const Dataset dataset = load_jsonl(flags.data);

    TableSet tables = make_tables(flags.vectors, flags.retrieval_vectors,
                                  flags.pair_vectors, &index, &dataset,
                                  flags.embed_seed);
    const Tables t = tables.view();

    EvalOptions options;
    options.k = flags.k > 0 ? flags.k : ckpt.config.k;
    options.explain = flags.explain;
    options.keep_examples = keep_examples;
    options.threads = flags.threads;
    options.model_descriptor =
        (ckpt.config.cross_encoder() ? std::string("ce-knn+ ckpt=")
                                     : std::string("be-knn+ ckpt=")) +
        fs::path(flags.ckpt).filename().string();

    HeadConfig config = ckpt.config;
    config.k = options.k;
    const Report report =
        evaluate(head_predictor(ckpt.params, config, t), dataset, index, t, options);
    write_report(report, flags.out);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", report.overall.f1);
    std::cout << "evaluated " << dataset.size() << " examples, flagged f1 " << buf
              << " -> " << flags.out << "\n";
    return 0;
}

int cmd_baseline(const std::string& method, const std::string& index_path,
                 const std::string& data, const std::string& k_csv,
                 const std::vector<std::string>& vectors, std::uint64_t embed_seed,
                 const std::string& out) {
    require_file(index_path, "index");
    require_file(data, "dataset");
    const Index index = load_index(index_path);
    const Dataset dataset = load_jsonl(data);
    const std::vector<std::size_t> ks = parse_k_list(k_csv);
    const std::size_t depth = *std::max_element(ks.begin(), ks.end());

    TableSet tables =
        make_tables(vectors, {}, {}, &index, &dataset, embed_seed);
    const Tables t = tables.view();

    const std::vector<Neighbourhood> hoods = retrieve_all(dataset, index, t, depth);
    const VoteMethod vm =
        method == "weighted" ? VoteMethod::Weighted : VoteMethod::Majority;
    const std::vector<SweepRow> rows = sweep_k(hoods, vm, ks, gold_labels(dataset));
    save_sweep(rows, out);
    std::cout << method << " vote sweep over " << dataset.size() << " examples -> "
              << out << "\n";
    return 0;
}

int cmd_rerank_eval(const PredictFlags& flags, const std::string& k_csv) {
    require_file(flags.ckpt, "checkpoint");
    require_file(flags.index_path, "index");
    require_file(flags.data, "dataset");
    const Checkpoint ckpt = load_checkpoint(flags.ckpt);
    const Index index = load_index(flags.index_path);
    const Dataset dataset = load_jsonl(flags.data);
    const std::vector<std::size_t> ks = parse_k_list(k_csv);
    const std::size_t depth = *std::max_element(ks.begin(), ks.end());

    TableSet tables = make_tables(flags.vectors, flags.retrieval_vectors, {},
                                  &index, &dataset, flags.embed_seed);
    const Tables t = tables.view();

    const std::vector<Neighbourhood> before = retrieve_all(dataset, index, t, depth);
    std::vector<Neighbourhood> after;
    after.reserve(before.size());
    for (const auto& hood : before) after.push_back(rerank(hood, ckpt.params, t));

    const std::vector<BinaryLabel> gold = gold_labels(dataset);
    const auto rows_before = sweep_k(before, VoteMethod::Majority, ks, gold);
    const auto rows_after = sweep_k(after, VoteMethod::Majority, ks, gold);

    std::string text =
        "k\tbefore_precision\tbefore_recall\tbefore_f1"
        "\tafter_precision\tafter_recall\tafter_f1\n";
    char buf[160];
    for (std::size_t i = 0; i < rows_before.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n",
                      rows_before[i].k, rows_before[i].prf.precision,
                      rows_before[i].prf.recall, rows_before[i].prf.f1,
                      rows_after[i].prf.precision, rows_after[i].prf.recall,
                      rows_after[i].prf.f1);
        text += buf;
    }
    io::spit(flags.out, text);
    std::cout << "re-ranking comparison over " << dataset.size() << " examples -> "
              << flags.out << "\n";
    return 0;
}

int cmd_lambda_sweep(const TrainFlags& flags, const std::string& source_index_path,
                     const std::string& train_path, const std::string& dev_path,
                     const std::string& lambda_csv, const std::string& out) {
    require_file(source_index_path, "index");
    require_file(train_path, "dataset");
    require_file(dev_path, "dataset");
    const Index index = load_index(source_index_path);
    const Dataset target_train = load_jsonl(train_path);
    const Dataset target_dev = load_jsonl(dev_path);
    const std::vector<double> lambdas = parse_lambda_list(lambda_csv);

    TableSet tables = make_tables(flags.vectors, flags.retrieval_vectors,
                                  flags.pair_vectors, &index, nullptr, 0);
    const Tables t = tables.view();

    std::string text = "lambda\tprecision\trecall\tf1\n";
    char buf[96];
    for (double lambda : lambdas) {
        TrainFlags per = flags;
        per.lambda = lambda;
        per.out_dir.clear();
        const HeadConfig head_config =
            head_config_from(per, t.model->dim(), t.pairs ? t.pairs->dim() : 0);
        TrainConfig train_config = train_config_from(per);
        const TrainResult result = train_loop(head_config, train_config,
                                              target_train, target_dev, index, t,
                                              load_init(per.init_from));
        const HistoryRow best = best_history_row(result);
        std::snprintf(buf, sizeof buf, "%g\t%.4f\t%.4f\t%.4f\n", lambda,
                      best.dev_precision, best.dev_recall, best.dev_f1);
        text += buf;
    }
    io::spit(out, text);
    std::cout << "lambda sweep (" << lambdas.size() << " values) -> " << out << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials) {
    const GradCheckReport report = gradient_check(seed, trials);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", report.max_rel_error);
    const bool ok = report.max_rel_error < 1e-4;
    std::cout << "gradcheck: trials=" << report.instances
              << " params=" << report.parameters_checked << " max_rel_err=" << buf
              << " threshold=1e-04 " << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) {
        std::cerr << "error: analytic gradients disagree with finite differences\n";
        return 3;
    }
    return 0;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::size_t source_n,
              std::size_t target_n, std::size_t dim) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.source_n = source_n;
    cfg.target_n = target_n;
    cfg.dim = dim;
    const SynthOutput output = make_synthetic(cfg);
    write_synthetic(output, out_dir);
    std::cout << "synthetic corpus: source " << output.source.size() << " (flagged "
              << output.source.counts.flagged << "), target "
              << output.target_train.size() << "/" << output.target_dev.size() << "/"
              << output.target_test.size() << " train/dev/test -> " << out_dir
              << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"nf - neighbourhood-based content flagging"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "",
                   "INI file with a [subcommand] section per command; "
                   "command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);

    // embed
    std::string embed_data, embed_out;
    std::size_t embed_dim = 256;
    std::uint64_t embed_seed = 0;
    auto* embed_cmd = app.add_subcommand("embed", "Toy-embed a dataset's texts");
    embed_cmd->add_option("--data", embed_data, "Dataset (jsonl)")->required();
    embed_cmd->add_option("--out", embed_out, "Output vector file")->required();
    embed_cmd->add_option("--dim", embed_dim, "Embedding dimension")
        ->capture_default_str();
    embed_cmd->add_option("--seed", embed_seed, "Hash seed")->capture_default_str();

    // index build
    auto* index_cmd = app.add_subcommand("index", "Index operations");
    index_cmd->require_subcommand(1);
    std::string ib_data, ib_out;
    std::vector<std::string> ib_vectors;
    auto* index_build_cmd =
        index_cmd->add_subcommand("build", "Build a retrieval index");
    index_build_cmd->add_option("--data", ib_data, "Source dataset (jsonl)")
        ->required();
    index_build_cmd->add_option("--vectors", ib_vectors, "Vector file(s)")
        ->required();
    index_build_cmd->add_option("--out", ib_out, "Output index file")->required();

    // train
    TrainFlags train_flags;
    std::string train_index, train_train, train_dev;
    auto* train_cmd =
        app.add_subcommand("train", "Train the head on target data");
    train_cmd->add_option("--source-index", train_index, "Source index file")
        ->required();
    train_cmd->add_option("--target-train", train_train, "Target training set")
        ->required();
    train_cmd->add_option("--target-dev", train_dev, "Target dev set")->required();
    train_cmd->add_option("--out-dir", train_flags.out_dir, "Checkpoint directory")
        ->required();
    add_train_flags(train_cmd, train_flags, /*training_schedule=*/true);

    // cli-pretrain
    TrainFlags pre_flags;
    pre_flags.epochs = 1;
    std::string pre_source;
    auto* pre_cmd = app.add_subcommand(
        "cli-pretrain", "Pre-train with source examples as their own queries");
    pre_cmd->add_option("--source", pre_source, "Source dataset (jsonl)")->required();
    pre_cmd->add_option("--out-dir", pre_flags.out_dir, "Checkpoint directory")
        ->required();
    pre_cmd->add_option("--epochs", pre_flags.epochs, "Pre-training epochs")
        ->capture_default_str();
    pre_cmd->add_option("--checkpoint-every", pre_flags.checkpoint_every,
                        "Optimizer steps between checkpoints")
        ->capture_default_str();
    add_train_flags(pre_cmd, pre_flags, /*training_schedule=*/false);

    // predict / evaluate
    PredictFlags predict_flags;
    auto* predict_cmd =
        app.add_subcommand("predict", "Predict labels, optionally with explanations");
    predict_cmd->add_option("--ckpt", predict_flags.ckpt, "Checkpoint")->required();
    predict_cmd->add_option("--index", predict_flags.index_path, "Index")->required();
    predict_cmd->add_option("--input", predict_flags.data, "Input dataset")
        ->required();
    predict_cmd->add_option("--out", predict_flags.out, "Report file")->required();
    predict_cmd->add_flag("--explain", predict_flags.explain,
                          "Emit attention and agreement per neighbour");
    predict_cmd->add_option("--vectors", predict_flags.vectors, "Vector file(s)");
    predict_cmd->add_option("--retrieval-vectors", predict_flags.retrieval_vectors,
                            "Separate retrieval-space table");
    predict_cmd->add_option("--pair-vectors", predict_flags.pair_vectors,
                            "Pair-feature table (cross-encoder checkpoints)");
    predict_cmd->add_option("--k", predict_flags.k, "Override the checkpoint's k");
    predict_cmd->add_option("--embed-seed", predict_flags.embed_seed,
                            "Toy-embed seed when no --vectors given");
    predict_cmd->add_option("--threads", predict_flags.threads, "Worker cap")
        ->capture_default_str();

    PredictFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a labelled dataset");
    eval_cmd->add_option("--ckpt", eval_flags.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--index", eval_flags.index_path, "Index")->required();
    eval_cmd->add_option("--data", eval_flags.data, "Labelled dataset")->required();
    eval_cmd->add_option("--out", eval_flags.out, "Report file")->required();
    eval_cmd->add_option("--vectors", eval_flags.vectors, "Vector file(s)");
    eval_cmd->add_option("--retrieval-vectors", eval_flags.retrieval_vectors,
                         "Separate retrieval-space table");
    eval_cmd->add_option("--pair-vectors", eval_flags.pair_vectors,
                         "Pair-feature table (cross-encoder checkpoints)");
    eval_cmd->add_option("--k", eval_flags.k, "Override the checkpoint's k");
    eval_cmd->add_option("--embed-seed", eval_flags.embed_seed,
                         "Toy-embed seed when no --vectors given");
    eval_cmd->add_option("--threads", eval_flags.threads, "Worker cap")
        ->capture_default_str();

    // baseline
    std::string base_method, base_index, base_data, base_out;
    std::string base_ks = "3,5,10,20";
    std::vector<std::string> base_vectors;
    std::uint64_t base_embed_seed = 0;
    auto* base_cmd = app.add_subcommand("baseline", "Voting baselines");
    base_cmd->add_option("method", base_method, "majority or weighted")
        ->required()
        ->check(CLI::IsMember({"majority", "weighted"}));
    base_cmd->add_option("--index", base_index, "Index")->required();
    base_cmd->add_option("--data", base_data, "Labelled dataset")->required();
    base_cmd->add_option("--k-sweep", base_ks, "Comma-separated k values")
        ->capture_default_str();
    base_cmd->add_option("--out", base_out, "Sweep output file")->required();
    base_cmd->add_option("--vectors", base_vectors, "Vector file(s)");
    base_cmd->add_option("--embed-seed", base_embed_seed,
                         "Toy-embed seed when no --vectors given");

    // rerank-eval
    PredictFlags rr_flags;
    std::string rr_ks = "3,5,10,20";
    auto* rr_cmd = app.add_subcommand(
        "rerank-eval", "Majority voting before vs after BE re-ranking");
    rr_cmd->add_option("--ckpt", rr_flags.ckpt, "Checkpoint")->required();
    rr_cmd->add_option("--index", rr_flags.index_path, "Index")->required();
    rr_cmd->add_option("--data", rr_flags.data, "Labelled dataset")->required();
    rr_cmd->add_option("--k-sweep", rr_ks, "Comma-separated k values")
        ->capture_default_str();
    rr_cmd->add_option("--out", rr_flags.out, "Comparison output file")->required();
    rr_cmd->add_option("--vectors", rr_flags.vectors, "Vector file(s)");
    rr_cmd->add_option("--embed-seed", rr_flags.embed_seed,
                       "Toy-embed seed when no --vectors given");

    // lambda-sweep
    TrainFlags ls_flags;
    std::string ls_index, ls_train, ls_dev, ls_out;
    std::string ls_lambdas = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
    auto* ls_cmd =
        app.add_subcommand("lambda-sweep", "Dev F1 across loss-weight values");
    ls_cmd->add_option("--source-index", ls_index, "Source index file")->required();
    ls_cmd->add_option("--target-train", ls_train, "Target training set")->required();
    ls_cmd->add_option("--target-dev", ls_dev, "Target dev set")->required();
    ls_cmd->add_option("--lambdas", ls_lambdas, "Comma-separated lambda values")
        ->capture_default_str();
    ls_cmd->add_option("--out", ls_out, "Sweep output file")->required();
    ls_cmd->add_option("--epochs", ls_flags.epochs, "Training epochs per value")
        ->capture_default_str();
    ls_cmd->add_option("--delta", ls_flags.delta, "Early-stop improvement threshold")
        ->capture_default_str();
    ls_cmd->add_option("--patience", ls_flags.patience,
                       "Evaluations without improvement before stopping")
        ->capture_default_str();
    ls_cmd->add_option("--eval-every", ls_flags.eval_every, "Evaluations per epoch")
        ->capture_default_str();
    ls_cmd->add_option("--checkpoint-every", ls_flags.checkpoint_every,
                       "Optimizer steps between checkpoints")
        ->capture_default_str();
    add_train_flags(ls_cmd, ls_flags, /*training_schedule=*/false);

    // gradcheck
    std::uint64_t gc_seed = 7;
    std::size_t gc_trials = 20;
    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "Verify analytic gradients against finite differences");
    gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();
    gc_cmd->add_option("--trials", gc_trials, "Random instances")
        ->capture_default_str();

    // synth
    std::string synth_out;
    std::uint64_t synth_seed = 7;
    std::size_t synth_source_n = 2000, synth_target_n = 300, synth_dim = 32;
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate the synthetic experiment corpus");
    synth_cmd->add_option("--out-dir", synth_out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "Seed")->capture_default_str();
    synth_cmd->add_option("--source-n", synth_source_n, "Source size")
        ->capture_default_str();
    synth_cmd->add_option("--target-n", synth_target_n, "Target size")
        ->capture_default_str();
    synth_cmd->add_option("--dim", synth_dim, "Embedding dimension")
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(embed_cmd)) {
            return cmd_embed(embed_data, embed_out, embed_dim, embed_seed);
        }
        if (app.got_subcommand(index_cmd)) {
            return cmd_index_build(ib_data, ib_vectors, ib_out);
        }
        if (app.got_subcommand(train_cmd)) {
            return cmd_train(train_flags, train_index, train_train, train_dev);
        }
        if (app.got_subcommand(pre_cmd)) {
            return cmd_cli_pretrain(pre_flags, pre_source);
        }
        if (app.got_subcommand(predict_cmd)) {
            return run_head_eval(predict_flags, /*keep_examples=*/true);
        }
        if (app.got_subcommand(eval_cmd)) {
            return run_head_eval(eval_flags, /*keep_examples=*/false);
        }
        if (app.got_subcommand(base_cmd)) {
            return cmd_baseline(base_method, base_index, base_data, base_ks,
                                base_vectors, base_embed_seed, base_out);
        }
        if (app.got_subcommand(rr_cmd)) {
            return cmd_rerank_eval(rr_flags, rr_ks);
        }
        if (app.got_subcommand(ls_cmd)) {
            return cmd_lambda_sweep(ls_flags, ls_index, ls_train, ls_dev, ls_lambdas,
                                    ls_out);
        }
        if (app.got_subcommand(gc_cmd)) {
            return cmd_gradcheck(gc_seed, gc_trials);
        }
        if (app.got_subcommand(synth_cmd)) {
            return cmd_synth(synth_out, synth_seed, synth_source_n, synth_target_n,
                             synth_dim);
        }
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const training_error& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace nf::cli
