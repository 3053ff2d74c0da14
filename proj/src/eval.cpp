#include "nf/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nf/errors.hpp"
#include "nf/io.hpp"
#include "nf/parallel.hpp"
#include "nf/train.hpp"

namespace nf {

void ConfusionCounts::add(BinaryLabel predicted, BinaryLabel gold) {
    const bool p = predicted == BinaryLabel::Flagged;
    const bool g = gold == BinaryLabel::Flagged;
    if (p && g) {
        ++tp;
    } else if (p && !g) {
        ++fp;
    } else if (!p && g) {
        ++fn;
    } else {
        ++tn;
    }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts confusion(const std::vector<BinaryLabel>& preds,
                          const std::vector<BinaryLabel>& golds) {
    if (preds.size() != golds.size() || preds.empty()) {
        throw argument_error("confusion: prediction/gold length mismatch");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) c.add(preds[i], golds[i]);
    return c;
}

Prf f1_flagged(const ConfusionCounts& c) {
    Prf out;
    const double tp = static_cast<double>(c.tp);
    if (c.tp + c.fp > 0) out.precision = tp / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) out.recall = tp / static_cast<double>(c.tp + c.fn);
    if (out.precision + out.recall > 0) {
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
}

Report evaluate(const Predictor& predictor, const Dataset& dataset,
                const Index& index, const Tables& tables,
                const EvalOptions& options) {
    if (!tables.retrieval) throw argument_error("evaluate: no retrieval table");
    if (dataset.examples.empty()) throw argument_error("evaluate: empty dataset");

    const std::size_t n = dataset.examples.size();
    std::vector<Prediction> predictions(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
        const Example& ex = dataset.examples[i];
        const Vec& qvec = tables.retrieval->at(ex.id);
        const Neighbourhood hood = query_topk(index, qvec, options.k);
        predictions[i] = predictor(ex, qvec, hood, options.explain);
    });

    Report report;
    report.dataset = dataset.name;
    report.model = options.model_descriptor;
    report.support = n;
    for (std::size_t i = 0; i < n; ++i) {
        const Example& ex = dataset.examples[i];
        LangMetrics& lm = report.per_language[ex.lang];
        lm.counts.add(predictions[i].label, ex.label);
        ++lm.support;
        report.overall_counts.add(predictions[i].label, ex.label);
        if (options.keep_examples) {
            ExampleRecord rec;
            rec.id = ex.id;
            rec.gold = ex.label;
            rec.predicted = predictions[i].label;
            if (options.explain) rec.neighbours = std::move(predictions[i].neighbours);
            report.examples.push_back(std::move(rec));
        }
    }
    for (auto& [lang, lm] : report.per_language) lm.prf = f1_flagged(lm.counts);
    report.overall = f1_flagged(report.overall_counts);
    return report;
}

Predictor head_predictor(const HeadParams& params, const HeadConfig& config,
                         const Tables& tables) {
    return [&params, config, tables](const Example& ex, const Vec&,
                                     const Neighbourhood& hood,
                                     bool explain) -> Prediction {
        ForwardTrace trace;
        if (config.cross_encoder()) {
            Mat features(hood.hits.size(), config.h);
            for (std::size_t j = 0; j < hood.hits.size(); ++j) {
                const Vec& f = tables.pairs->at(pair_key(ex.id, hood.hits[j].id));
                if (f.size() != config.h) {
                    throw argument_error("pair feature length does not match h");
                }
                std::copy(f.begin(), f.end(), features[j]);
            }
            trace = forward_features(params, std::move(features));
        } else {
            std::vector<Vec> neighbour_vecs;
            neighbour_vecs.reserve(hood.hits.size());
            for (const auto& hit : hood.hits) {
                neighbour_vecs.push_back(tables.model->at(hit.id));
            }
            trace = forward(params, config, tables.model->at(ex.id), neighbour_vecs);
        }
        Prediction pred;
        pred.label = predict_label(trace.class_logits);
        if (explain) {
            pred.neighbours.reserve(hood.hits.size());
            for (std::size_t j = 0; j < hood.hits.size(); ++j) {
                NeighbourExplanation ne;
                ne.id = hood.hits[j].id;
                ne.score = hood.hits[j].score;
                ne.label = hood.hits[j].label;
                ne.attention = trace.attn[j];
                ne.p_agree = softmax(trace.agree_logits.row(j))[1];
                pred.neighbours.push_back(std::move(ne));
            }
        }
        return pred;
    };
}

namespace {

std::string fmt(double v, int places) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

}  // namespace

std::string format_report(const Report& report) {
    std::ostringstream out;
    out << "dataset: " << report.dataset << "\n";
    out << "model: " << report.model << "\n";
    for (const auto& [lang, lm] : report.per_language) {
        out << "lang " << lang << ": precision=" << fmt(lm.prf.precision, 4)
            << " recall=" << fmt(lm.prf.recall, 4) << " f1=" << fmt(lm.prf.f1, 4)
            << " support=" << lm.support << "\n";
    }
    out << "overall: precision=" << fmt(report.overall.precision, 4)
        << " recall=" << fmt(report.overall.recall, 4)
        << " f1=" << fmt(report.overall.f1, 4) << " support=" << report.support
        << "\n";
    for (const auto& rec : report.examples) {
        out << "example " << rec.id << " gold=" << to_string(rec.gold)
            << " pred=" << to_string(rec.predicted) << "\n";
        for (std::size_t j = 0; j < rec.neighbours.size(); ++j) {
            const auto& ne = rec.neighbours[j];
            out << "  nn " << (j + 1) << " id=" << ne.id
                << " label=" << to_string(ne.label) << " score=" << fmt(ne.score, 4)
                << " attention=" << fmt(ne.attention, 6)
                << " p_agree=" << fmt(ne.p_agree, 6) << "\n";
        }
    }
    return out.str();
}

void write_report(const Report& report, const std::string& path) {
    io::spit(path, format_report(report));
}

namespace {

// Pulls `key=value` out of a report line segment.
std::string field(const std::string& line, const std::string& key,
                  const std::string& where) {
    const std::string needle = key + "=";
    const auto pos = line.find(needle);
    if (pos == std::string::npos) {
        throw format_error(where + ": missing field " + key);
    }
    const auto start = pos + needle.size();
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    return line.substr(start, end - start);
}

double num_field(const std::string& line, const std::string& key,
                 const std::string& where) {
    try {
        return std::stod(field(line, key, where));
    } catch (const std::exception&) {
        throw format_error(where + ": bad numeric field " + key);
    }
}

}  // namespace

Report read_report(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw format_error("cannot open report file: " + path);
    Report report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        if (line.rfind("dataset: ", 0) == 0) {
            report.dataset = line.substr(9);
        } else if (line.rfind("model: ", 0) == 0) {
            report.model = line.substr(7);
        } else if (line.rfind("lang ", 0) == 0) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) throw format_error(where + ": bad lang line");
            const std::string lang = line.substr(5, colon - 5);
            LangMetrics lm;
            lm.prf.precision = num_field(line, "precision", where);
            lm.prf.recall = num_field(line, "recall", where);
            lm.prf.f1 = num_field(line, "f1", where);
            lm.support = static_cast<std::uint64_t>(
                std::stoull(field(line, "support", where)));
            report.per_language[lang] = lm;
        } else if (line.rfind("overall: ", 0) == 0) {
            report.overall.precision = num_field(line, "precision", where);
            report.overall.recall = num_field(line, "recall", where);
            report.overall.f1 = num_field(line, "f1", where);
            report.support = static_cast<std::uint64_t>(
                std::stoull(field(line, "support", where)));
        } else if (line.rfind("example ", 0) == 0) {
            ExampleRecord rec;
            const auto gold_pos = line.find(" gold=");
            if (gold_pos == std::string::npos) {
                throw format_error(where + ": bad example line");
            }
            rec.id = line.substr(8, gold_pos - 8);
            rec.gold = label_from_string(field(line, "gold", where));
            rec.predicted = label_from_string(field(line, "pred", where));
            report.examples.push_back(std::move(rec));
        } else if (line.rfind("  nn ", 0) == 0) {
            if (report.examples.empty()) {
                throw format_error(where + ": neighbour line before any example");
            }
            NeighbourExplanation ne;
            ne.id = field(line, "id", where);
            ne.label = label_from_string(field(line, "label", where));
            ne.score = num_field(line, "score", where);
            ne.attention = num_field(line, "attention", where);
            ne.p_agree = num_field(line, "p_agree", where);
            report.examples.back().neighbours.push_back(std::move(ne));
        } else if (!line.empty()) {
            throw format_error(where + ": unrecognized report line");
        }
    }
    return report;
}

}  // namespace nf
