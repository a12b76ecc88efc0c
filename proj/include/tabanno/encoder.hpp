#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tabanno/serializer.hpp"
#include "tabanno/tensor.hpp"

namespace tabanno {

struct EncoderConfig {
    int num_layers = 2;
    int num_heads = 4;
    int d_model = 64;
    int d_ff = 256;
    int max_seq_len = 512;
    int vocab_size = 0;
    double dropout_rate = 0.1;
    uint64_t seed = 0;

    int head_dim() const { return d_model / num_heads; }
    void validate() const;
};

enum class TensorKind { Weight, Bias, LayerNormScale, LayerNormOffset };

struct LayerTensors {
    Matrix wq, bq, wk, bk, wv, bv, wo, bo;  // attention projections, d x d (+ 1 x d biases)
    Matrix ln1_gamma, ln1_beta;
    Matrix wff1, bff1;  // d x d_ff
    Matrix wff2, bff2;  // d_ff x d
    Matrix ln2_gamma, ln2_beta;
};

struct EncoderTensors {
    Matrix tok_emb;  // vocab_size x d
    Matrix pos_emb;  // max_seq_len x d
    std::vector<LayerTensors> layers;
    Matrix mlm_w, mlm_b;  // d x vocab_size, 1 x vocab_size

    static EncoderTensors zeros(const EncoderConfig& cfg);
};

// Visits every tensor in a fixed canonical order (the order used by
// initialization, Adam, checkpoints, and gradient checks).
template <class Tensors, class F>
void for_each_tensor(Tensors& t, F&& f) {
    f("tok_emb", TensorKind::Weight, t.tok_emb);
    f("pos_emb", TensorKind::Weight, t.pos_emb);
    for (size_t l = 0; l < t.layers.size(); ++l) {
        auto& lt = t.layers[l];
        std::string p = "layer" + std::to_string(l) + ".";
        f(p + "wq", TensorKind::Weight, lt.wq);
        f(p + "bq", TensorKind::Bias, lt.bq);
        f(p + "wk", TensorKind::Weight, lt.wk);
        f(p + "bk", TensorKind::Bias, lt.bk);
        f(p + "wv", TensorKind::Weight, lt.wv);
        f(p + "bv", TensorKind::Bias, lt.bv);
        f(p + "wo", TensorKind::Weight, lt.wo);
        f(p + "bo", TensorKind::Bias, lt.bo);
        f(p + "ln1_gamma", TensorKind::LayerNormScale, lt.ln1_gamma);
        f(p + "ln1_beta", TensorKind::LayerNormOffset, lt.ln1_beta);
        f(p + "wff1", TensorKind::Weight, lt.wff1);
        f(p + "bff1", TensorKind::Bias, lt.bff1);
        f(p + "wff2", TensorKind::Weight, lt.wff2);
        f(p + "bff2", TensorKind::Bias, lt.bff2);
        f(p + "ln2_gamma", TensorKind::LayerNormScale, lt.ln2_gamma);
        f(p + "ln2_beta", TensorKind::LayerNormOffset, lt.ln2_beta);
    }
    f("mlm_w", TensorKind::Weight, t.mlm_w);
    f("mlm_b", TensorKind::Bias, t.mlm_b);
}

struct EncoderParams {
    EncoderConfig config;
    EncoderTensors tensors;

    // Truncated normal (std 0.02) weights, zero biases, unit layer-norm
    // scales; reproducible from config.seed.
    static EncoderParams init(const EncoderConfig& cfg);
};

// Per-token context-aware embeddings LM(T): one d-dimensional row per token.
using ContextEmbeddings = Matrix;

struct LayerCache {
    Matrix x_in;
    Matrix q, k, v;
    std::vector<Matrix> att_probs;  // per head, p x p, post-softmax
    std::vector<Matrix> att_mask;   // dropout scale masks (empty in eval)
    Matrix ctx;                     // concatenated head outputs
    Matrix attn_out;                // after output projection, pre-dropout
    Matrix attn_mask;
    Matrix res1;
    std::vector<double> mean1, rstd1;
    Matrix y1;
    Matrix ff1;  // pre-activation
    Matrix gelu_out;
    Matrix ff2;  // pre-dropout
    Matrix ffn_mask;
    Matrix res2;
    std::vector<double> mean2, rstd2;
    Matrix y2;
};

struct ForwardCache {
    std::vector<int> ids;
    std::vector<int> valid;  // non-[PAD] positions, ascending
    Matrix x0;               // token + position embeddings
    std::vector<LayerCache> layers;
};

// Full (unmasked) self-attention among all non-pad positions; dropout only
// when train_mode. `cache` may be null for inference-only calls.
ContextEmbeddings encoder_forward(const EncoderParams& params, const EncodedSequence& seq,
                                  bool train_mode, uint64_t dropout_seed = 0,
                                  ForwardCache* cache = nullptr);

// Accumulates exact reverse-mode gradients of a scalar loss into `grads`,
// given d(loss)/d(output embeddings).
void encoder_backward(const EncoderParams& params, const ForwardCache& cache, const Matrix& d_out,
                      EncoderTensors& grads);

struct AttentionTensor {
    // weights[layer][head] is p x p; each non-pad query row sums to 1.
    std::vector<std::vector<Matrix>> weights;
};

AttentionTensor attention_maps(const EncoderParams& params, const EncodedSequence& seq);

// Logits for masked positions: |positions| x vocab_size. Every listed
// position must hold [MASK].
Matrix mlm_logits(const EncoderParams& params, const EncodedSequence& seq,
                  const std::vector<int>& positions);

// Training-path pieces: project embedding rows through the MLM head and
// back-propagate into embeddings + head gradients.
Matrix mlm_project(const EncoderParams& params, const Matrix& embeddings,
                   const std::vector<int>& positions);
void mlm_project_backward(const EncoderParams& params, const Matrix& embeddings,
                          const std::vector<int>& positions, const Matrix& d_logits,
                          Matrix& d_embeddings, EncoderTensors& grads);

// Runs forward in the given mode, lets `loss_fn` fill d(loss)/d(embeddings),
// then accumulates parameter gradients. Returns the loss.
double loss_gradients(const EncoderParams& params, const EncodedSequence& seq, bool train_mode,
                      uint64_t dropout_seed,
                      const std::function<double(const ContextEmbeddings&, Matrix&)>& loss_fn,
                      EncoderTensors& grads);

}  // namespace tabanno
