#pragma once

#include <string>
#include <vector>

#include "nf/eval.hpp"
#include "nf/index.hpp"
#include "nf/model.hpp"

namespace nf {

struct Tables;  // train.hpp

struct VoteResult {
    BinaryLabel label = BinaryLabel::Neutral;
    double flagged_weight = 0.0;
    double neutral_weight = 0.0;
    std::size_t k_used = 0;
};

// Counts labels of the first k hits; ties go to Flagged.
VoteResult majority_vote(const Neighbourhood& hood, std::size_t k);

// Sums cosine scores per label over the first k hits (negative scores
// contribute negatively); ties go to Flagged.
VoteResult weighted_vote(const Neighbourhood& hood, std::size_t k);

// Same hit set re-sorted by descending BE score (cosine of the trained
// projections), ties by ascending id; scores are replaced by BE scores.
Neighbourhood rerank(const Neighbourhood& hood, const HeadParams& params,
                     const Tables& tables);

enum class VoteMethod { Majority, Weighted };

struct SweepRow {
    std::size_t k = 0;
    Prf prf;
};

// One F1 row per k over pre-retrieved neighbourhoods.
std::vector<SweepRow> sweep_k(const std::vector<Neighbourhood>& neighbourhoods,
                              VoteMethod method, const std::vector<std::size_t>& ks,
                              const std::vector<BinaryLabel>& gold);

// Delimited text: header k<TAB>precision<TAB>recall<TAB>f1, 4 decimals.
std::string format_sweep(const std::vector<SweepRow>& rows);
void save_sweep(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace nf
