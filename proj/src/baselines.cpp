#include "nf/baselines.hpp"

#include <algorithm>
#include <cstdio>

#include "nf/errors.hpp"
#include "nf/io.hpp"
#include "nf/train.hpp"

namespace nf {

namespace {

void check_k(const Neighbourhood& hood, std::size_t k) {
    if (k == 0) throw argument_error("vote: k must be positive");
    if (k > hood.hits.size()) {
        throw argument_error("vote: k=" + std::to_string(k) +
                             " exceeds retrieved depth " +
                             std::to_string(hood.hits.size()));
    }
}

}  // namespace

VoteResult majority_vote(const Neighbourhood& hood, std::size_t k) {
    check_k(hood, k);
    VoteResult result;
    result.k_used = k;
    for (std::size_t j = 0; j < k; ++j) {
        if (hood.hits[j].label == BinaryLabel::Flagged) {
            result.flagged_weight += 1.0;
        } else {
            result.neutral_weight += 1.0;
        }
    }
    result.label = result.flagged_weight >= result.neutral_weight
                       ? BinaryLabel::Flagged
                       : BinaryLabel::Neutral;
    return result;
}

VoteResult weighted_vote(const Neighbourhood& hood, std::size_t k) {
    check_k(hood, k);
    VoteResult result;
    result.k_used = k;
    for (std::size_t j = 0; j < k; ++j) {
        if (hood.hits[j].label == BinaryLabel::Flagged) {
            result.flagged_weight += hood.hits[j].score;
        } else {
            result.neutral_weight += hood.hits[j].score;
        }
    }
    result.label = result.flagged_weight >= result.neutral_weight
                       ? BinaryLabel::Flagged
                       : BinaryLabel::Neutral;
    return result;
}

Neighbourhood rerank(const Neighbourhood& hood, const HeadParams& params,
                     const Tables& tables) {
    if (!tables.model) throw argument_error("rerank: no model table");
    const Vec* query_vec = tables.model->find(hood.query_id);
    if (!query_vec) {
        throw argument_error("rerank: no vector for query id \"" + hood.query_id +
                             "\"");
    }

    Neighbourhood out;
    out.query_id = hood.query_id;
    out.hits.reserve(hood.hits.size());
    for (const auto& hit : hood.hits) {
        const Vec* nv = tables.model->find(hit.id);
        if (!nv) {
            throw argument_error("rerank: no vector for neighbour id \"" + hit.id +
                                 "\"");
        }
        Hit rescored = hit;
        rescored.score = be_score(params, *query_vec, *nv);
        out.hits.push_back(std::move(rescored));
    }
    std::sort(out.hits.begin(), out.hits.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

std::vector<SweepRow> sweep_k(const std::vector<Neighbourhood>& neighbourhoods,
                              VoteMethod method, const std::vector<std::size_t>& ks,
                              const std::vector<BinaryLabel>& gold) {
    if (neighbourhoods.size() != gold.size()) {
        throw argument_error("sweep_k: neighbourhood/gold length mismatch");
    }
    std::vector<SweepRow> rows;
    rows.reserve(ks.size());
    for (std::size_t k : ks) {
        ConfusionCounts counts;
        for (std::size_t i = 0; i < neighbourhoods.size(); ++i) {
            const VoteResult vote = method == VoteMethod::Majority
                                        ? majority_vote(neighbourhoods[i], k)
                                        : weighted_vote(neighbourhoods[i], k);
            counts.add(vote.label, gold[i]);
        }
        rows.push_back(SweepRow{k, f1_flagged(counts)});
    }
    return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
    std::string out = "k\tprecision\trecall\tf1\n";
    char buf[96];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%zu\t%.4f\t%.4f\t%.4f\n", row.k,
                      row.prf.precision, row.prf.recall, row.prf.f1);
        out += buf;
    }
    return out;
}

void save_sweep(const std::vector<SweepRow>& rows, const std::string& path) {
    io::spit(path, format_sweep(rows));
}

}  // namespace nf
