#pragma once

#include <set>
#include <string>
#include <vector>

#include "tabanno/annotator.hpp"

namespace tabanno {

struct ClassScore {
    int label = 0;
    double precision = 0, recall = 0, f1 = 0;
    long support = 0;  // gold occurrences
};

struct EvalReport {
    double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    std::vector<ClassScore> per_class;
    long item_count = 0;

    std::string to_json(const std::vector<std::string>& label_names = {}) const;
    std::string per_class_csv(const std::vector<std::string>& label_names = {}) const;
};

// Micro scores pool TP/FP/FN over every (item, class) decision; macro scores
// average per-class F1 over classes with gold support. Zero denominators
// score 0.
EvalReport evaluate(const std::vector<std::set<int>>& predictions,
                    const std::vector<std::set<int>>& golds, LabelMode mode);

struct ClusterReport {
    double homogeneity = 0, completeness = 0, v_measure = 0;
    int num_pred_clusters = 0, num_gold_clusters = 0;

    std::string to_json() const;
};

// Entropy-based scores with natural logs: h = 1 - H(gold|pred)/H(gold),
// c = 1 - H(pred|gold)/H(pred), v = 2hc/(h+c).
ClusterReport clustering_scores(const std::vector<int>& pred_assignments,
                                const std::vector<int>& gold_assignments);

// exp(-mean log-likelihood). Exposed separately so closed-form fixtures can
// bypass the model.
double perplexity_from_logprobs(const std::vector<double>& logprobs);

// Masked pseudo-log-likelihood: each non-special position is masked one at a
// time and scored by the MLM softmax probability of the true token.
std::vector<double> masked_token_logprobs(const EncoderParams& params, const EncodedSequence& seq);

double perplexity(const EncoderParams& params, const EncodedSequence& seq);

}  // namespace tabanno
