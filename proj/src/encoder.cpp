#include "tabanno/encoder.hpp"

#include <cassert>
#include <cmath>

#include "tabanno/error.hpp"
#include "tabanno/kernels.hpp"
#include "tabanno/rng.hpp"

namespace tabanno {

using kernels::parallel_for;

void EncoderConfig::validate() const {
    if (num_layers < 0) throw ConfigError("encoder: num_layers must be >= 0");
    if (num_heads < 1) throw ConfigError("encoder: num_heads must be >= 1");
    if (d_model < num_heads || d_model % num_heads != 0)
        throw ConfigError("encoder: d_model must be a positive multiple of num_heads");
    if (d_ff < 1) throw ConfigError("encoder: d_ff must be >= 1");
    if (max_seq_len < 1) throw ConfigError("encoder: max_seq_len must be >= 1");
    if (vocab_size < TokenVocabulary::kNumReserved)
        throw ConfigError("encoder: vocab_size must cover the reserved tokens");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("encoder: dropout_rate must be in [0, 1)");
}

EncoderTensors EncoderTensors::zeros(const EncoderConfig& cfg) {
    EncoderTensors t;
    int d = cfg.d_model;
    t.tok_emb = Matrix(cfg.vocab_size, d);
    t.pos_emb = Matrix(cfg.max_seq_len, d);
    t.layers.resize(cfg.num_layers);
    for (auto& lt : t.layers) {
        lt.wq = Matrix(d, d);
        lt.bq = Matrix(1, d);
        lt.wk = Matrix(d, d);
        lt.bk = Matrix(1, d);
        lt.wv = Matrix(d, d);
        lt.bv = Matrix(1, d);
        lt.wo = Matrix(d, d);
        lt.bo = Matrix(1, d);
        lt.ln1_gamma = Matrix(1, d);
        lt.ln1_beta = Matrix(1, d);
        lt.wff1 = Matrix(d, cfg.d_ff);
        lt.bff1 = Matrix(1, cfg.d_ff);
        lt.wff2 = Matrix(cfg.d_ff, d);
        lt.bff2 = Matrix(1, d);
        lt.ln2_gamma = Matrix(1, d);
        lt.ln2_beta = Matrix(1, d);
    }
    t.mlm_w = Matrix(d, cfg.vocab_size);
    t.mlm_b = Matrix(1, cfg.vocab_size);
    return t;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderParams params;
    params.config = cfg;
    params.tensors = EncoderTensors::zeros(cfg);
    Rng rng(mix_seed(cfg.seed, 0x7ab5u));
    for_each_tensor(params.tensors, [&](const std::string&, TensorKind kind, Matrix& m) {
        switch (kind) {
            case TensorKind::Weight:
                for (double& v : m.data) v = rng.truncated_normal(0.02);
                break;
            case TensorKind::LayerNormScale:
                for (double& v : m.data) v = 1.0;
                break;
            case TensorKind::Bias:
            case TensorKind::LayerNormOffset:
                break;  // already zero
        }
    });
    return params;
}

namespace {

void check_finite(const Matrix& m, int layer, const char* what) {
    if (!m.all_finite())
        throw ComputeError(std::string("non-finite ") + what + " at layer " +
                           std::to_string(layer));
}

// Inverted dropout mask: entries are 0 or 1/(1-rate).
Matrix dropout_mask(int rows, int cols, double rate, Rng& rng) {
    Matrix m(rows, cols);
    double scale = 1.0 / (1.0 - rate);
    for (double& v : m.data) v = (rng.uniform() >= rate) ? scale : 0.0;
    return m;
}

void apply_mask(Matrix& x, const Matrix& mask) {
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] *= mask.data[i];
}

}  // namespace

ContextEmbeddings encoder_forward(const EncoderParams& params, const EncodedSequence& seq,
                                  bool train_mode, uint64_t dropout_seed, ForwardCache* cache) {
    const EncoderConfig& cfg = params.config;
    const EncoderTensors& t = params.tensors;
    int p = seq.length();
    int d = cfg.d_model;
    int hd = cfg.head_dim();
    if (p < 1) throw DataError("encoder: empty sequence");
    if (p > cfg.max_seq_len) throw DataError("encoder: sequence longer than max_seq_len");

    std::vector<int> valid;
    for (int i = 0; i < p; ++i) {
        int id = seq.ids[i];
        if (id < 0 || id >= cfg.vocab_size) throw DataError("encoder: token id out of range");
        if (id != TokenVocabulary::kPad) valid.push_back(i);
    }
    if (valid.empty()) throw DataError("encoder: sequence is all padding");

    bool drop = train_mode && cfg.dropout_rate > 0.0;
    Rng rng(mix_seed(dropout_seed, 0xd40bu));

    Matrix x(p, d);
    parallel_for(p, [&](int i) {
        const double* te = t.tok_emb.row(seq.ids[i]);
        const double* pe = t.pos_emb.row(i);
        double* xi = x.row(i);
        for (int j = 0; j < d; ++j) xi[j] = te[j] + pe[j];
    });

    if (cache) {
        cache->ids = seq.ids;
        cache->valid = valid;
        cache->x0 = x;
        cache->layers.assign(cfg.num_layers, LayerCache{});
    }

    double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerTensors& lt = t.layers[l];
        LayerCache local;
        LayerCache& lc = cache ? cache->layers[l] : local;
        lc.x_in = x;

        kernels::linear_forward(x, lt.wq, lt.bq, lc.q);
        kernels::linear_forward(x, lt.wk, lt.bk, lc.k);
        kernels::linear_forward(x, lt.wv, lt.bv, lc.v);

        lc.att_probs.assign(cfg.num_heads, Matrix());
        if (drop) lc.att_mask.assign(cfg.num_heads, Matrix());
        lc.ctx = Matrix(p, d);
        for (int h = 0; h < cfg.num_heads; ++h) {
            int off = h * hd;
            Matrix scores(p, p);
            parallel_for(p, [&](int i) {
                const double* qi = lc.q.row(i) + off;
                double* si = scores.row(i);
                for (int j = 0; j < p; ++j) {
                    const double* kj = lc.k.row(j) + off;
                    double s = 0.0;
                    for (int e = 0; e < hd; ++e) s += qi[e] * kj[e];
                    si[j] = s * inv_sqrt_hd;
                }
            });
            kernels::softmax_rows_masked(scores, valid);
            lc.att_probs[h] = scores;
            Matrix used = scores;
            if (drop) {
                lc.att_mask[h] = dropout_mask(p, p, cfg.dropout_rate, rng);
                apply_mask(used, lc.att_mask[h]);
            }
            parallel_for(p, [&](int i) {
                const double* ai = used.row(i);
                double* ci = lc.ctx.row(i) + off;
                for (int e = 0; e < hd; ++e) ci[e] = 0.0;
                for (int j = 0; j < p; ++j) {
                    double a = ai[j];
                    if (a == 0.0) continue;
                    const double* vj = lc.v.row(j) + off;
                    for (int e = 0; e < hd; ++e) ci[e] += a * vj[e];
                }
            });
        }

        kernels::linear_forward(lc.ctx, lt.wo, lt.bo, lc.attn_out);
        Matrix attn_dropped = lc.attn_out;
        if (drop) {
            lc.attn_mask = dropout_mask(p, d, cfg.dropout_rate, rng);
            apply_mask(attn_dropped, lc.attn_mask);
        }
        lc.res1 = lc.x_in;
        kernels::add_inplace(lc.res1, attn_dropped);
        kernels::layernorm_forward(lc.res1, lt.ln1_gamma, lt.ln1_beta, lc.y1, lc.mean1, lc.rstd1);

        kernels::linear_forward(lc.y1, lt.wff1, lt.bff1, lc.ff1);
        kernels::gelu_forward(lc.ff1, lc.gelu_out);
        kernels::linear_forward(lc.gelu_out, lt.wff2, lt.bff2, lc.ff2);
        Matrix ffn_dropped = lc.ff2;
        if (drop) {
            lc.ffn_mask = dropout_mask(p, d, cfg.dropout_rate, rng);
            apply_mask(ffn_dropped, lc.ffn_mask);
        }
        lc.res2 = lc.y1;
        kernels::add_inplace(lc.res2, ffn_dropped);
        kernels::layernorm_forward(lc.res2, lt.ln2_gamma, lt.ln2_beta, lc.y2, lc.mean2, lc.rstd2);

        check_finite(lc.y2, l, "activations");
        x = lc.y2;
    }
    return x;
}

void encoder_backward(const EncoderParams& params, const ForwardCache& cache, const Matrix& d_out,
                      EncoderTensors& grads) {
    const EncoderConfig& cfg = params.config;
    const EncoderTensors& t = params.tensors;
    int p = static_cast<int>(cache.ids.size());
    int d = cfg.d_model;
    int hd = cfg.head_dim();
    assert(d_out.rows == p && d_out.cols == d);
    double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

    Matrix dx = d_out;
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const LayerTensors& lt = t.layers[l];
        LayerTensors& gt = grads.layers[l];
        const LayerCache& lc = cache.layers[l];
        bool drop = !lc.att_mask.empty();

        // ln2
        Matrix d_res2;
        kernels::layernorm_backward(lc.res2, lt.ln2_gamma, lc.mean2, lc.rstd2, dx, d_res2,
                                    gt.ln2_gamma, gt.ln2_beta);
        // res2 = y1 + drop(ff2)
        Matrix d_y1 = d_res2;
        Matrix d_ff2 = d_res2;
        if (drop) apply_mask(d_ff2, lc.ffn_mask);
        // ff2 = gelu_out * wff2 + bff2
        Matrix d_gelu;
        kernels::linear_backward(lc.gelu_out, lt.wff2, d_ff2, d_gelu, gt.wff2, gt.bff2);
        Matrix d_ff1;
        kernels::gelu_backward(lc.ff1, d_gelu, d_ff1);
        Matrix d_y1_ff;
        kernels::linear_backward(lc.y1, lt.wff1, d_ff1, d_y1_ff, gt.wff1, gt.bff1);
        kernels::add_inplace(d_y1, d_y1_ff);

        // ln1
        Matrix d_res1;
        kernels::layernorm_backward(lc.res1, lt.ln1_gamma, lc.mean1, lc.rstd1, d_y1, d_res1,
                                    gt.ln1_gamma, gt.ln1_beta);
        // res1 = x_in + drop(attn_out)
        Matrix d_x_in = d_res1;
        Matrix d_attn_out = d_res1;
        if (drop) apply_mask(d_attn_out, lc.attn_mask);
        Matrix d_ctx;
        kernels::linear_backward(lc.ctx, lt.wo, d_attn_out, d_ctx, gt.wo, gt.bo);

        Matrix d_q(p, d), d_k(p, d), d_v(p, d);
        for (int h = 0; h < cfg.num_heads; ++h) {
            int off = h * hd;
            const Matrix& probs = lc.att_probs[h];
            // dA_used[i][j] = d_ctx_h[i] . v_h[j]
            Matrix d_att(p, p);
            parallel_for(p, [&](int i) {
                const double* dci = d_ctx.row(i) + off;
                double* dai = d_att.row(i);
                for (int j = 0; j < p; ++j) {
                    const double* vj = lc.v.row(j) + off;
                    double s = 0.0;
                    for (int e = 0; e < hd; ++e) s += dci[e] * vj[e];
                    dai[j] = s;
                }
            });
            // d_v_h[j] += sum_i used[i][j] * d_ctx_h[i]
            parallel_for(p, [&](int j) {
                double* dvj = d_v.row(j) + off;
                for (int i = 0; i < p; ++i) {
                    double a = probs.at(i, j);
                    if (drop) a *= lc.att_mask[h].at(i, j);
                    if (a == 0.0) continue;
                    const double* dci = d_ctx.row(i) + off;
                    for (int e = 0; e < hd; ++e) dvj[e] += a * dci[e];
                }
            });
            if (drop) apply_mask(d_att, lc.att_mask[h]);
            // softmax backward: dS = A o (dA - rowsum(dA o A))
            parallel_for(p, [&](int i) {
                const double* ai = probs.row(i);
                double* dai = d_att.row(i);
                double dot = 0.0;
                for (int j = 0; j < p; ++j) dot += dai[j] * ai[j];
                for (int j = 0; j < p; ++j) dai[j] = ai[j] * (dai[j] - dot);
            });
            // scores = q_h k_h^T / sqrt(hd)
            parallel_for(p, [&](int i) {
                const double* dsi = d_att.row(i);
                double* dqi = d_q.row(i) + off;
                for (int j = 0; j < p; ++j) {
                    double s = dsi[j] * inv_sqrt_hd;
                    if (s == 0.0) continue;
                    const double* kj = lc.k.row(j) + off;
                    for (int e = 0; e < hd; ++e) dqi[e] += s * kj[e];
                }
            });
            parallel_for(p, [&](int j) {
                double* dkj = d_k.row(j) + off;
                for (int i = 0; i < p; ++i) {
                    double s = d_att.at(i, j) * inv_sqrt_hd;
                    if (s == 0.0) continue;
                    const double* qi = lc.q.row(i) + off;
                    for (int e = 0; e < hd; ++e) dkj[e] += s * qi[e];
                }
            });
        }

        Matrix d_x_q, d_x_k, d_x_v;
        kernels::linear_backward(lc.x_in, lt.wq, d_q, d_x_q, gt.wq, gt.bq);
        kernels::linear_backward(lc.x_in, lt.wk, d_k, d_x_k, gt.wk, gt.bk);
        kernels::linear_backward(lc.x_in, lt.wv, d_v, d_x_v, gt.wv, gt.bv);
        kernels::add_inplace(d_x_in, d_x_q);
        kernels::add_inplace(d_x_in, d_x_k);
        kernels::add_inplace(d_x_in, d_x_v);
        dx = std::move(d_x_in);
    }

    // Embedding scatter-add; parallel over the feature dimension keeps every
    // write disjoint and the summation order fixed.
    parallel_for(d, [&](int j) {
        for (int i = 0; i < p; ++i) {
            grads.tok_emb.at(cache.ids[i], j) += dx.at(i, j);
            grads.pos_emb.at(i, j) += dx.at(i, j);
        }
    });
}

AttentionTensor attention_maps(const EncoderParams& params, const EncodedSequence& seq) {
    ForwardCache cache;
    encoder_forward(params, seq, /*train_mode=*/false, 0, &cache);
    AttentionTensor out;
    out.weights.resize(params.config.num_layers);
    for (int l = 0; l < params.config.num_layers; ++l) out.weights[l] = cache.layers[l].att_probs;
    return out;
}

Matrix mlm_project(const EncoderParams& params, const Matrix& embeddings,
                   const std::vector<int>& positions) {
    int d = params.config.d_model;
    Matrix rows(static_cast<int>(positions.size()), d);
    for (size_t i = 0; i < positions.size(); ++i)
        std::copy(embeddings.row(positions[i]), embeddings.row(positions[i]) + d, rows.row(i));
    Matrix logits;
    kernels::linear_forward(rows, params.tensors.mlm_w, params.tensors.mlm_b, logits);
    return logits;
}

void mlm_project_backward(const EncoderParams& params, const Matrix& embeddings,
                          const std::vector<int>& positions, const Matrix& d_logits,
                          Matrix& d_embeddings, EncoderTensors& grads) {
    int d = params.config.d_model;
    Matrix rows(static_cast<int>(positions.size()), d);
    for (size_t i = 0; i < positions.size(); ++i)
        std::copy(embeddings.row(positions[i]), embeddings.row(positions[i]) + d, rows.row(i));
    Matrix d_rows;
    kernels::linear_backward(rows, params.tensors.mlm_w, d_logits, d_rows, grads.mlm_w,
                             grads.mlm_b);
    for (size_t i = 0; i < positions.size(); ++i) {
        double* dst = d_embeddings.row(positions[i]);
        const double* src = d_rows.row(static_cast<int>(i));
        for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
}

Matrix mlm_logits(const EncoderParams& params, const EncodedSequence& seq,
                  const std::vector<int>& positions) {
    for (int pos : positions) {
        if (pos < 0 || pos >= seq.length())
            throw DataError("mlm_logits: position out of range");
        if (seq.ids[pos] != TokenVocabulary::kMask)
            throw DataError("mlm_logits: position " + std::to_string(pos) + " is not masked");
    }
    ContextEmbeddings emb = encoder_forward(params, seq, /*train_mode=*/false);
    return mlm_project(params, emb, positions);
}

double loss_gradients(const EncoderParams& params, const EncodedSequence& seq, bool train_mode,
                      uint64_t dropout_seed,
                      const std::function<double(const ContextEmbeddings&, Matrix&)>& loss_fn,
                      EncoderTensors& grads) {
    ForwardCache cache;
    ContextEmbeddings emb = encoder_forward(params, seq, train_mode, dropout_seed, &cache);
    Matrix d_emb(emb.rows, emb.cols);
    double loss = loss_fn(emb, d_emb);
    if (!std::isfinite(loss)) throw ComputeError("loss_gradients: non-finite loss");
    encoder_backward(params, cache, d_emb, grads);
    return loss;
}

}  // namespace tabanno
