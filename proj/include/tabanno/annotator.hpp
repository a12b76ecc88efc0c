#pragma once

#include <set>
#include <vector>

#include "tabanno/encoder.hpp"

namespace tabanno {

struct TypeHead {
    Matrix w;  // d x |C_type|
    Matrix b;  // 1 x |C_type|

    int num_classes() const { return w.cols; }
    static TypeHead init(int d_model, int num_classes, uint64_t seed);
};

struct RelationHead {
    Matrix w;  // 2d x |C_rel|
    Matrix b;  // 1 x |C_rel|

    int num_classes() const { return w.cols; }
    static RelationHead init(int d_model, int num_classes, uint64_t seed);
};

// Shared encoder plus one output head per task (hard parameter sharing).
struct AnnotationModel {
    EncoderParams encoder;
    TypeHead type_head;
    RelationHead relation_head;
    LabelMode type_mode = LabelMode::Multiclass;
    LabelMode relation_mode = LabelMode::Multiclass;
};

using PairSelection = std::vector<std::pair<int, int>>;  // (subject, object) column indices

// Type logits for one column: head applied to the [CLS] embedding row.
std::vector<double> type_logits(const TypeHead& head, const ContextEmbeddings& emb,
                                int cls_position);
// Relation logits: head applied to subject-then-object concatenation.
std::vector<double> relation_logits(const RelationHead& head, const ContextEmbeddings& emb,
                                    int subject_cls, int object_cls);

std::vector<double> probabilities_from_logits(const std::vector<double>& logits, LabelMode mode);

// One probability vector per serialized column.
std::vector<std::vector<double>> predict_types(const AnnotationModel& model,
                                               const EncodedSequence& seq);
// One probability vector per requested pair.
std::vector<std::vector<double>> predict_relations(const AnnotationModel& model,
                                                   const EncodedSequence& seq,
                                                   const PairSelection& pairs);

// Mean loss over annotated items: categorical cross-entropy (multiclass) or
// mean element-wise binary cross-entropy (multilabel), both from logits.
double task_loss(const std::vector<std::vector<double>>& logits,
                 const std::vector<std::set<int>>& golds, LabelMode mode);
// Same loss; also emits d(loss)/d(logits).
double task_loss_grad(const std::vector<std::vector<double>>& logits,
                      const std::vector<std::set<int>>& golds, LabelMode mode,
                      std::vector<std::vector<double>>& d_logits);

// Multiclass: singleton argmax (ties -> lowest id). Multilabel: classes with
// probability >= threshold, falling back to the argmax when none qualify.
std::set<int> decide_labels(const std::vector<double>& probabilities, LabelMode mode,
                            double threshold = 0.5);

// Gradient plumbing used by the trainer: routes d_logits back into the head
// gradients and the encoder-output gradient rows.
void type_head_backward(const TypeHead& head, const ContextEmbeddings& emb, int cls_position,
                        const std::vector<double>& d_logits, Matrix& d_emb, TypeHead& grads);
void relation_head_backward(const RelationHead& head, const ContextEmbeddings& emb,
                            int subject_cls, int object_cls, const std::vector<double>& d_logits,
                            Matrix& d_emb, RelationHead& grads);

}  // namespace tabanno
