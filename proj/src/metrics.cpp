#include "tabanno/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tabanno/error.hpp"
#include "tabanno/kernels.hpp"

namespace tabanno {

using nlohmann::json;

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

EvalReport evaluate(const std::vector<std::set<int>>& predictions,
                    const std::vector<std::set<int>>& golds, LabelMode mode) {
    if (predictions.size() != golds.size())
        throw DataError("evaluate: prediction/gold length mismatch");
    if (predictions.empty()) throw DataError("evaluate: empty input");
    (void)mode;  // the counting is identical; the mode is fixed upstream

    std::map<int, long> tp, fp, fn, support;
    long total_tp = 0, total_fp = 0, total_fn = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        for (int c : golds[i]) ++support[c];
        for (int c : predictions[i]) {
            if (golds[i].count(c)) {
                ++tp[c];
                ++total_tp;
            } else {
                ++fp[c];
                ++total_fp;
            }
        }
        for (int c : golds[i])
            if (!predictions[i].count(c)) {
                ++fn[c];
                ++total_fn;
            }
    }

    EvalReport report;
    report.item_count = static_cast<long>(predictions.size());
    report.micro_precision = safe_div(total_tp, total_tp + total_fp);
    report.micro_recall = safe_div(total_tp, total_tp + total_fn);
    report.micro_f1 = f1_of(report.micro_precision, report.micro_recall);

    // Per-class rows for every class seen in gold or predictions; macro
    // averages skip classes without gold support.
    std::set<int> classes;
    for (auto& [c, _] : support) classes.insert(c);
    for (auto& [c, _] : fp) classes.insert(c);
    double macro_p = 0, macro_r = 0, macro_f = 0;
    long supported = 0;
    for (int c : classes) {
        ClassScore cs;
        cs.label = c;
        long tpc = tp.count(c) ? tp[c] : 0;
        long fpc = fp.count(c) ? fp[c] : 0;
        long fnc = fn.count(c) ? fn[c] : 0;
        cs.support = support.count(c) ? support[c] : 0;
        cs.precision = safe_div(tpc, tpc + fpc);
        cs.recall = safe_div(tpc, tpc + fnc);
        cs.f1 = f1_of(cs.precision, cs.recall);
        if (cs.support > 0) {
            macro_p += cs.precision;
            macro_r += cs.recall;
            macro_f += cs.f1;
            ++supported;
        }
        report.per_class.push_back(cs);
    }
    if (supported > 0) {
        report.macro_precision = macro_p / supported;
        report.macro_recall = macro_r / supported;
        report.macro_f1 = macro_f / supported;
    }
    return report;
}

std::string EvalReport::to_json(const std::vector<std::string>& label_names) const {
    json j;
    j["micro"] = {{"precision", micro_precision}, {"recall", micro_recall}, {"f1", micro_f1}};
    j["macro"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["items"] = item_count;
    json pc = json::array();
    for (const auto& c : per_class) {
        json row;
        row["label"] = (c.label >= 0 && c.label < static_cast<int>(label_names.size()))
                           ? json(label_names[c.label])
                           : json(c.label);
        row["precision"] = c.precision;
        row["recall"] = c.recall;
        row["f1"] = c.f1;
        row["support"] = c.support;
        pc.push_back(std::move(row));
    }
    j["per_class"] = std::move(pc);
    return j.dump(2);
}

std::string EvalReport::per_class_csv(const std::vector<std::string>& label_names) const {
    std::ostringstream out;
    out << "label,precision,recall,f1,support\n";
    char buf[64];
    for (const auto& c : per_class) {
        if (c.label >= 0 && c.label < static_cast<int>(label_names.size()))
            out << label_names[c.label];
        else
            out << c.label;
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%ld\n", c.precision, c.recall, c.f1,
                      c.support);
        out << buf;
    }
    return out.str();
}

namespace {

double entropy_of_counts(const std::map<int, long>& counts, long n) {
    double h = 0.0;
    for (auto& [_, c] : counts) {
        double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

ClusterReport clustering_scores(const std::vector<int>& pred_assignments,
                                const std::vector<int>& gold_assignments) {
    if (pred_assignments.size() != gold_assignments.size())
        throw DataError("clustering_scores: assignment length mismatch");
    if (pred_assignments.empty()) throw DataError("clustering_scores: empty input");
    long n = static_cast<long>(pred_assignments.size());

    std::map<int, long> pred_counts, gold_counts;
    std::map<std::pair<int, int>, long> joint;
    for (size_t i = 0; i < pred_assignments.size(); ++i) {
        ++pred_counts[pred_assignments[i]];
        ++gold_counts[gold_assignments[i]];
        ++joint[{pred_assignments[i], gold_assignments[i]}];
    }
    double h_gold = entropy_of_counts(gold_counts, n);
    double h_pred = entropy_of_counts(pred_counts, n);

    double h_gold_given_pred = 0.0, h_pred_given_gold = 0.0;
    for (auto& [key, c] : joint) {
        double p_joint = static_cast<double>(c) / n;
        double p_pred = static_cast<double>(pred_counts[key.first]) / n;
        double p_gold = static_cast<double>(gold_counts[key.second]) / n;
        h_gold_given_pred -= p_joint * std::log(p_joint / p_pred);
        h_pred_given_gold -= p_joint * std::log(p_joint / p_gold);
    }

    ClusterReport r;
    r.num_pred_clusters = static_cast<int>(pred_counts.size());
    r.num_gold_clusters = static_cast<int>(gold_counts.size());
    r.homogeneity = h_gold == 0.0 ? 1.0 : 1.0 - h_gold_given_pred / h_gold;
    r.completeness = h_pred == 0.0 ? 1.0 : 1.0 - h_pred_given_gold / h_pred;
    double hc = r.homogeneity + r.completeness;
    r.v_measure = hc == 0.0 ? 0.0 : 2.0 * r.homogeneity * r.completeness / hc;
    return r;
}

std::string ClusterReport::to_json() const {
    json j;
    j["homogeneity"] = homogeneity;
    j["completeness"] = completeness;
    j["v_measure"] = v_measure;
    j["num_pred_clusters"] = num_pred_clusters;
    j["num_gold_clusters"] = num_gold_clusters;
    return j.dump(2);
}

double perplexity_from_logprobs(const std::vector<double>& logprobs) {
    if (logprobs.empty()) throw DataError("perplexity: zero scorable tokens");
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    return std::exp(-sum / static_cast<double>(logprobs.size()));
}

std::vector<double> masked_token_logprobs(const EncoderParams& params,
                                          const EncodedSequence& seq) {
    std::vector<int> scorable;
    for (int i = 0; i < seq.length(); ++i)
        if (seq.ids[i] >= TokenVocabulary::kNumReserved) scorable.push_back(i);
    if (scorable.empty()) throw DataError("perplexity: zero scorable tokens");

    std::vector<double> logprobs(scorable.size());
    // Each position is an independent eval-mode forward pass.
    kernels::parallel_for(static_cast<int>(scorable.size()), [&](int idx) {
        int pos = scorable[idx];
        EncodedSequence masked = seq;
        masked.ids[pos] = TokenVocabulary::kMask;
        Matrix logits = mlm_logits(params, masked, {pos});
        const double* z = logits.row(0);
        int v = logits.cols;
        double mx = z[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (int j = 0; j < v; ++j) sum += std::exp(z[j] - mx);
        logprobs[idx] = (z[seq.ids[pos]] - mx) - std::log(sum);
    });
    return logprobs;
}

double perplexity(const EncoderParams& params, const EncodedSequence& seq) {
    return perplexity_from_logprobs(masked_token_logprobs(params, seq));
}

}  // namespace tabanno
