#include "tabanno/annotator.hpp"

#include <algorithm>
#include <cmath>

#include "tabanno/error.hpp"
#include "tabanno/rng.hpp"

namespace tabanno {

TypeHead TypeHead::init(int d_model, int num_classes, uint64_t seed) {
    TypeHead h;
    h.w = Matrix(d_model, num_classes);
    h.b = Matrix(1, num_classes);
    Rng rng(mix_seed(seed, 0x7e4du));
    for (double& v : h.w.data) v = rng.truncated_normal(0.02);
    return h;
}

RelationHead RelationHead::init(int d_model, int num_classes, uint64_t seed) {
    RelationHead h;
    h.w = Matrix(2 * d_model, num_classes);
    h.b = Matrix(1, num_classes);
    Rng rng(mix_seed(seed, 0x4e1du));
    for (double& v : h.w.data) v = rng.truncated_normal(0.02);
    return h;
}

std::vector<double> type_logits(const TypeHead& head, const ContextEmbeddings& emb,
                                int cls_position) {
    if (cls_position < 0 || cls_position >= emb.rows)
        throw DataError("type head: cls position out of range");
    int d = head.w.rows, c = head.w.cols;
    if (emb.cols != d) throw DataError("type head: embedding dimension mismatch");
    std::vector<double> logits(c);
    const double* h = emb.row(cls_position);
    for (int j = 0; j < c; ++j) {
        double s = head.b.at(0, j);
        for (int i = 0; i < d; ++i) s += h[i] * head.w.at(i, j);
        logits[j] = s;
    }
    return logits;
}

std::vector<double> relation_logits(const RelationHead& head, const ContextEmbeddings& emb,
                                    int subject_cls, int object_cls) {
    if (subject_cls < 0 || subject_cls >= emb.rows || object_cls < 0 || object_cls >= emb.rows)
        throw DataError("relation head: cls position out of range");
    int d = emb.cols, c = head.w.cols;
    if (head.w.rows != 2 * d) throw DataError("relation head: embedding dimension mismatch");
    std::vector<double> logits(c);
    const double* hs = emb.row(subject_cls);
    const double* ho = emb.row(object_cls);
    for (int j = 0; j < c; ++j) {
        double s = head.b.at(0, j);
        for (int i = 0; i < d; ++i) s += hs[i] * head.w.at(i, j);
        for (int i = 0; i < d; ++i) s += ho[i] * head.w.at(d + i, j);
        logits[j] = s;
    }
    return logits;
}

std::vector<double> probabilities_from_logits(const std::vector<double>& logits, LabelMode mode) {
    std::vector<double> probs(logits.size());
    if (mode == LabelMode::Multiclass) {
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (size_t i = 0; i < logits.size(); ++i) {
            probs[i] = std::exp(logits[i] - mx);
            sum += probs[i];
        }
        for (double& v : probs) v /= sum;
    } else {
        for (size_t i = 0; i < logits.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    }
    return probs;
}

std::vector<std::vector<double>> predict_types(const AnnotationModel& model,
                                               const EncodedSequence& seq) {
    ContextEmbeddings emb = encoder_forward(model.encoder, seq, /*train_mode=*/false);
    std::vector<std::vector<double>> out;
    out.reserve(seq.cls_positions.size());
    for (int pos : seq.cls_positions)
        out.push_back(
            probabilities_from_logits(type_logits(model.type_head, emb, pos), model.type_mode));
    return out;
}

std::vector<std::vector<double>> predict_relations(const AnnotationModel& model,
                                                   const EncodedSequence& seq,
                                                   const PairSelection& pairs) {
    ContextEmbeddings emb = encoder_forward(model.encoder, seq, /*train_mode=*/false);
    std::vector<std::vector<double>> out;
    out.reserve(pairs.size());
    for (auto [subj, obj] : pairs) {
        int si = seq.cls_positions.at(seq.cls_slot_for_column(subj));
        int oi = seq.cls_positions.at(seq.cls_slot_for_column(obj));
        out.push_back(probabilities_from_logits(
            relation_logits(model.relation_head, emb, si, oi), model.relation_mode));
    }
    return out;
}

namespace {

double stable_bce(double logit, double target) {
    // max(z,0) - z*y + log(1 + exp(-|z|))
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::fabs(logit)));
}

}  // namespace

double task_loss(const std::vector<std::vector<double>>& logits,
                 const std::vector<std::set<int>>& golds, LabelMode mode) {
    std::vector<std::vector<double>> d;
    return task_loss_grad(logits, golds, mode, d);
}

double task_loss_grad(const std::vector<std::vector<double>>& logits,
                      const std::vector<std::set<int>>& golds, LabelMode mode,
                      std::vector<std::vector<double>>& d_logits) {
    if (logits.empty()) throw DataError("task loss: empty annotated set");
    if (logits.size() != golds.size()) throw DataError("task loss: logits/golds length mismatch");
    size_t n = logits.size();
    d_logits.assign(n, {});
    double total = 0.0;
    double inv_n = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& z = logits[i];
        const auto& gold = golds[i];
        if (gold.empty()) throw DataError("task loss: empty gold label set");
        for (int g : gold)
            if (g < 0 || g >= static_cast<int>(z.size()))
                throw DataError("task loss: label id out of range");
        d_logits[i].assign(z.size(), 0.0);
        if (mode == LabelMode::Multiclass) {
            int y = *gold.begin();
            double mx = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (double v : z) sum += std::exp(v - mx);
            double lse = mx + std::log(sum);
            total += lse - z[y];
            for (size_t j = 0; j < z.size(); ++j) {
                double p = std::exp(z[j] - lse);
                d_logits[i][j] = (p - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_n;
            }
        } else {
            double inv_c = 1.0 / static_cast<double>(z.size());
            double item = 0.0;
            for (size_t j = 0; j < z.size(); ++j) {
                double y = gold.count(static_cast<int>(j)) ? 1.0 : 0.0;
                item += stable_bce(z[j], y);
                double sig = 1.0 / (1.0 + std::exp(-z[j]));
                d_logits[i][j] = (sig - y) * inv_c * inv_n;
            }
            total += item * inv_c;
        }
    }
    return total * inv_n;
}

std::set<int> decide_labels(const std::vector<double>& probabilities, LabelMode mode,
                            double threshold) {
    if (probabilities.empty()) return {};
    int argmax = 0;
    for (size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[argmax]) argmax = static_cast<int>(i);
    if (mode == LabelMode::Multiclass) return {argmax};
    std::set<int> out;
    for (size_t i = 0; i < probabilities.size(); ++i)
        if (probabilities[i] >= threshold) out.insert(static_cast<int>(i));
    if (out.empty()) out.insert(argmax);  // keep predictions non-empty for F1
    return out;
}

void type_head_backward(const TypeHead& head, const ContextEmbeddings& emb, int cls_position,
                        const std::vector<double>& d_logits, Matrix& d_emb, TypeHead& grads) {
    int d = head.w.rows, c = head.w.cols;
    const double* h = emb.row(cls_position);
    double* dh = d_emb.row(cls_position);
    for (int j = 0; j < c; ++j) {
        double g = d_logits[j];
        if (g == 0.0) continue;
        grads.b.at(0, j) += g;
        for (int i = 0; i < d; ++i) {
            grads.w.at(i, j) += h[i] * g;
            dh[i] += head.w.at(i, j) * g;
        }
    }
}

void relation_head_backward(const RelationHead& head, const ContextEmbeddings& emb,
                            int subject_cls, int object_cls, const std::vector<double>& d_logits,
                            Matrix& d_emb, RelationHead& grads) {
    int d = emb.cols, c = head.w.cols;
    const double* hs = emb.row(subject_cls);
    const double* ho = emb.row(object_cls);
    double* dhs = d_emb.row(subject_cls);
    double* dho = d_emb.row(object_cls);
    for (int j = 0; j < c; ++j) {
        double g = d_logits[j];
        if (g == 0.0) continue;
        grads.b.at(0, j) += g;
        for (int i = 0; i < d; ++i) {
            grads.w.at(i, j) += hs[i] * g;
            grads.w.at(d + i, j) += ho[i] * g;
            dhs[i] += head.w.at(i, j) * g;
            dho[i] += head.w.at(d + i, j) * g;
        }
    }
}

}  // namespace tabanno
