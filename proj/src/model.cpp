#include "nf/model.hpp"

#include <cmath>
#include <fstream>

#include "nf/errors.hpp"
#include "nf/io.hpp"
#include "nf/rng.hpp"

namespace nf {

HeadConfig HeadConfig::bi_encoder(std::size_t d, std::size_t p, std::size_t h_r,
                                  std::size_t k, double lambda,
                                  std::uint64_t seed) {
    HeadConfig c;
    c.d = d;
    c.p = p;
    c.h = 3 * p;
    c.h_r = h_r;
    c.k = k;
    c.lambda = lambda;
    c.seed = seed;
    c.validate();
    return c;
}

HeadConfig HeadConfig::cross_encoder_mode(std::size_t d, std::size_t h,
                                          std::size_t h_r, std::size_t k,
                                          double lambda, std::uint64_t seed) {
    HeadConfig c;
    c.d = d;
    c.p = 0;
    c.h = h;
    c.h_r = h_r;
    c.k = k;
    c.lambda = lambda;
    c.seed = seed;
    c.validate();
    return c;
}

void HeadConfig::validate() const {
    if (d == 0) throw argument_error("head config: d must be positive");
    if (p > 0 && h != 3 * p) {
        throw argument_error("head config: h must equal 3*p in bi-encoder mode");
    }
    if (h == 0) throw argument_error("head config: h must be positive");
    if (h_r == 0 || h_r >= h) {
        throw argument_error("head config: requires 0 < h_r < h");
    }
    if (k == 0) throw argument_error("head config: k must be positive");
    if (lambda < 0.0 || lambda > 1.0) {
        throw argument_error("head config: lambda must lie in [0, 1]");
    }
}

HeadParams zeros_like(const HeadParams& params) {
    HeadParams out = params;
    for_each_tensor(out, [](const char*, Mat& m) { m.fill(0.0); });
    return out;
}

std::size_t param_count(const HeadParams& params) {
    std::size_t n = 0;
    for_each_tensor(params, [&](const char*, const Mat& m) { n += m.data.size(); });
    return n;
}

HeadParams init_params(const HeadConfig& config) {
    config.validate();
    HeadParams params;
    if (config.p > 0) {
        params.W_p = Mat(config.p, config.d);
        params.b_p = Mat(1, config.p);
    }
    params.W_a = Mat(2, config.h);
    params.b_a = Mat(1, 2);
    params.W1 = Mat(config.h_r, config.h);
    params.W2 = Mat(1, config.h_r);
    params.W_c = Mat(2, config.h);
    params.b_c = Mat(1, 2);

    Rng rng(config.seed);
    for_each_tensor(params, [&](const char* name, Mat& m) {
        if (name[0] == 'b' || m.data.empty()) return;  // biases start at zero
        const double s = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
        for (double& x : m.data) x = rng.uniform(-s, s);
    });
    return params;
}

Vec project(const HeadParams& params, std::span<const double> v) {
    if (params.W_p.rows == 0) {
        throw argument_error("projection is undefined in cross-encoder mode");
    }
    if (v.size() != params.W_p.cols) {
        throw argument_error("project: vector length " + std::to_string(v.size()) +
                             " does not match d=" + std::to_string(params.W_p.cols));
    }
    Vec rep(params.W_p.rows);
    matvec(params.W_p, v, rep);
    for (std::size_t i = 0; i < rep.size(); ++i) {
        rep[i] = std::tanh(rep[i] + params.b_p[0][i]);
    }
    return rep;
}

Vec interaction_be(std::span<const double> rep_q, std::span<const double> rep_n) {
    if (rep_q.size() != rep_n.size()) {
        throw argument_error("interaction_be: representation lengths differ");
    }
    const std::size_t p = rep_q.size();
    Vec feature(3 * p);
    for (std::size_t i = 0; i < p; ++i) {
        feature[i] = rep_q[i];
        feature[p + i] = rep_n[i];
        feature[2 * p + i] = std::abs(rep_q[i] - rep_n[i]);
    }
    return feature;
}

std::array<double, 2> agreement_logits(const HeadParams& params,
                                       std::span<const double> feature) {
    if (feature.size() != params.W_a.cols) {
        throw argument_error("agreement_logits: feature length mismatch");
    }
    return {dot(params.W_a.row(0), feature) + params.b_a[0][0],
            dot(params.W_a.row(1), feature) + params.b_a[0][1]};
}

Attention attend(const HeadParams& params, const Mat& H) {
    if (H.rows == 0) throw argument_error("attend: empty neighbourhood");
    if (H.cols != params.W1.cols) {
        throw argument_error("attend: feature dim mismatch");
    }
    const std::size_t k = H.rows;
    const std::size_t h_r = params.W1.rows;

    Attention out;
    out.scores.resize(k);
    Vec hidden(h_r);
    for (std::size_t j = 0; j < k; ++j) {
        matvec(params.W1, H.row(j), hidden);
        double s = 0.0;
        for (std::size_t r = 0; r < h_r; ++r) {
            s += params.W2[0][r] * std::tanh(hidden[r]);
        }
        out.scores[j] = s;
    }
    out.weights = softmax(out.scores);
    out.pooled.assign(H.cols, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double a = out.weights[j];
        const double* row = H[j];
        for (std::size_t c = 0; c < H.cols; ++c) out.pooled[c] += a * row[c];
    }
    return out;
}

std::array<double, 2> classify(const HeadParams& params,
                               std::span<const double> pooled) {
    if (pooled.size() != params.W_c.cols) {
        throw argument_error("classify: pooled feature length mismatch");
    }
    return {dot(params.W_c.row(0), pooled) + params.b_c[0][0],
            dot(params.W_c.row(1), pooled) + params.b_c[0][1]};
}

ForwardTrace forward_features(const HeadParams& params, Mat H) {
    ForwardTrace trace;
    trace.agree_logits = Mat(H.rows, 2);
    for (std::size_t j = 0; j < H.rows; ++j) {
        const auto logits = agreement_logits(params, H.row(j));
        trace.agree_logits[j][0] = logits[0];
        trace.agree_logits[j][1] = logits[1];
    }
    Attention attention = attend(params, H);
    trace.attn_scores = std::move(attention.scores);
    trace.attn = std::move(attention.weights);
    trace.pooled = std::move(attention.pooled);
    trace.class_logits = classify(params, trace.pooled);
    trace.H = std::move(H);
    return trace;
}

ForwardTrace forward(const HeadParams& params, const HeadConfig& config,
                     std::span<const double> query_vec,
                     const std::vector<Vec>& neighbour_vecs) {
    if (neighbour_vecs.size() != config.k) {
        throw argument_error("forward: expected " + std::to_string(config.k) +
                             " neighbours, got " +
                             std::to_string(neighbour_vecs.size()));
    }
    if (config.cross_encoder()) {
        throw argument_error("forward: cross-encoder mode requires pair features");
    }

    Vec rep_q = project(params, query_vec);
    const std::size_t k = neighbour_vecs.size();
    const std::size_t p = rep_q.size();

    Mat rep_n(k, p);
    Mat H(k, 3 * p);
    for (std::size_t j = 0; j < k; ++j) {
        Vec rep = project(params, neighbour_vecs[j]);
        std::copy(rep.begin(), rep.end(), rep_n[j]);
        Vec feature = interaction_be(rep_q, rep);
        std::copy(feature.begin(), feature.end(), H[j]);
    }

    ForwardTrace trace = forward_features(params, std::move(H));
    trace.rep_q = std::move(rep_q);
    trace.rep_n = std::move(rep_n);
    return trace;
}

BinaryLabel predict_label(const std::array<double, 2>& class_logits) {
    return class_logits[1] > class_logits[0] ? BinaryLabel::Flagged
                                             : BinaryLabel::Neutral;
}

double be_score(const HeadParams& params, std::span<const double> v_q,
                std::span<const double> v_n) {
    const Vec rep_q = project(params, v_q);
    const Vec rep_n = project(params, v_n);
    return cosine(rep_q, rep_n);
}

void save_checkpoint(const HeadParams& params, const HeadConfig& config,
                     const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw format_error("cannot open file for writing: " + path);
    io::write_bytes(file, "NFP1", 4);
    io::write_u32(file, 1);  // version
    io::write_u32(file, static_cast<std::uint32_t>(config.d));
    io::write_u32(file, static_cast<std::uint32_t>(config.p));
    io::write_u32(file, static_cast<std::uint32_t>(config.h_r));
    io::write_u32(file, static_cast<std::uint32_t>(config.k));
    io::write_f64(file, config.lambda);
    for_each_tensor(params, [&](const char*, const Mat& m) {
        io::write_u32(file, static_cast<std::uint32_t>(m.rows));
        io::write_u32(file, static_cast<std::uint32_t>(m.cols));
        for (double x : m.data) io::write_f64(file, x);
    });
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw format_error("cannot open checkpoint file: " + path);
    io::expect_magic(file, "NFP1");
    const std::uint32_t version = io::read_u32(file);
    if (version != 1) {
        throw format_error(path + ": unsupported checkpoint version " +
                           std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config.d = io::read_u32(file);
    ckpt.config.p = io::read_u32(file);
    ckpt.config.h_r = io::read_u32(file);
    ckpt.config.k = io::read_u32(file);
    ckpt.config.lambda = io::read_f64(file);

    for_each_tensor(ckpt.params, [&](const char* name, Mat& m) {
        const std::uint32_t rows = io::read_u32(file);
        const std::uint32_t cols = io::read_u32(file);
        m = Mat(rows, cols);
        for (double& x : m.data) {
            x = io::read_f64(file);
            if (!std::isfinite(x)) {
                throw format_error(path + ": non-finite value in tensor " +
                                   std::string(name));
            }
        }
    });

    ckpt.config.h = ckpt.params.W_a.cols;
    ckpt.config.validate();
    if (ckpt.config.p > 0 &&
        (ckpt.params.W_p.rows != ckpt.config.p ||
         ckpt.params.W_p.cols != ckpt.config.d)) {
        throw format_error(path + ": projection shape does not match header");
    }
    if (ckpt.params.W1.rows != ckpt.config.h_r ||
        ckpt.params.W1.cols != ckpt.config.h ||
        ckpt.params.W2.cols != ckpt.config.h_r ||
        ckpt.params.W_c.cols != ckpt.config.h) {
        throw format_error(path + ": tensor shapes do not match header");
    }
    return ckpt;
}

}  // namespace nf
