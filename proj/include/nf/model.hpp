#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nf/dataset.hpp"
#include "nf/mat.hpp"

namespace nf {

// Hyper-parameters of the classification head. In bi-encoder mode the
// interaction dimension is fixed at h = 3p (query rep, neighbour rep,
// absolute difference). Cross-encoder mode (p = 0) takes externally
// supplied pair features of dimension h instead.
struct HeadConfig {
    std::size_t d = 0;       // input embedding dim
    std::size_t p = 64;      // projection dim (0 => cross-encoder)
    std::size_t h = 192;     // interaction feature dim
    std::size_t h_r = 16;    // attention hidden dim, h_r < h
    std::size_t k = 10;      // neighbourhood size
    double lambda = 0.3;     // classification loss weight
    std::uint64_t seed = 0;

    bool cross_encoder() const { return p == 0; }

    static HeadConfig bi_encoder(std::size_t d, std::size_t p = 64,
                                 std::size_t h_r = 16, std::size_t k = 10,
                                 double lambda = 0.3, std::uint64_t seed = 0);
    static HeadConfig cross_encoder_mode(std::size_t d, std::size_t h,
                                         std::size_t h_r = 16, std::size_t k = 10,
                                         double lambda = 0.3, std::uint64_t seed = 0);

    void validate() const;  // throws argument_error
};

// Trainable tensors. Biases are stored as 1-row matrices so every tensor
// serializes uniformly.
struct HeadParams {
    Mat W_p;  // p x d   projection
    Mat b_p;  // 1 x p
    Mat W_a;  // 2 x h   agreement head (0 = disagree, 1 = agree)
    Mat b_a;  // 1 x 2
    Mat W1;   // h_r x h attention
    Mat W2;   // 1 x h_r
    Mat W_c;  // 2 x h   classifier (0 = neutral, 1 = flagged)
    Mat b_c;  // 1 x 2
};

// Applies `fn(name, tensor)` in declaration order; the order is load-bearing
// for initialization and serialization.
template <class Params, class Fn>
void for_each_tensor(Params& params, Fn&& fn) {
    fn("W_p", params.W_p);
    fn("b_p", params.b_p);
    fn("W_a", params.W_a);
    fn("b_a", params.b_a);
    fn("W1", params.W1);
    fn("W2", params.W2);
    fn("W_c", params.W_c);
    fn("b_c", params.b_c);
}

HeadParams zeros_like(const HeadParams& params);
std::size_t param_count(const HeadParams& params);

// Weights uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)), drawn
// from one seeded stream in declaration order; biases zero.
HeadParams init_params(const HeadConfig& config);

// All intermediates of one query + neighbourhood pass.
struct ForwardTrace {
    Vec rep_q;                           // p (empty in cross-encoder mode)
    Mat rep_n;                           // k x p
    Mat H;                               // k x h
    Mat agree_logits;                    // k x 2
    Vec attn_scores;                     // k, pre-softmax
    Vec attn;                            // k, sums to 1
    Vec pooled;                          // h
    std::array<double, 2> class_logits{};
};

// rep = tanh(W_p v + b_p)
Vec project(const HeadParams& params, std::span<const double> v);

// (rep_q, rep_n, |rep_q - rep_n|), length 3p.
Vec interaction_be(std::span<const double> rep_q, std::span<const double> rep_n);

std::array<double, 2> agreement_logits(const HeadParams& params,
                                       std::span<const double> feature);

// a = softmax(W2 tanh(W1 H^T)), pooled = a H.
struct Attention {
    Vec scores;  // pre-softmax
    Vec weights;
    Vec pooled;
};
Attention attend(const HeadParams& params, const Mat& H);

std::array<double, 2> classify(const HeadParams& params,
                               std::span<const double> pooled);

// Shared tail used by both encoder modes: agreement, attention, classifier.
ForwardTrace forward_features(const HeadParams& params, Mat H);

// Bi-encoder forward pass over raw embedding-space vectors.
ForwardTrace forward(const HeadParams& params, const HeadConfig& config,
                     std::span<const double> query_vec,
                     const std::vector<Vec>& neighbour_vecs);

// Argmax with ties resolved to Neutral.
BinaryLabel predict_label(const std::array<double, 2>& class_logits);

// Cosine similarity of the projected representations; 0 when either
// projection is numerically zero.
double be_score(const HeadParams& params, std::span<const double> v_q,
                std::span<const double> v_n);

// Checkpoint format: magic "NFP1", u32 version=1, u32 d, u32 p, u32 h_r,
// u32 k, f64 lambda, then each tensor in declaration order as u32 rows,
// u32 cols, row-major f64 little-endian.
void save_checkpoint(const HeadParams& params, const HeadConfig& config,
                     const std::string& path);
struct Checkpoint {
    HeadParams params;
    HeadConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nf
