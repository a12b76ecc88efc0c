#pragma once

#include <map>
#include <string>
#include <vector>

#include "tabanno/checkpoint.hpp"
#include "tabanno/trainer.hpp"

namespace tabanno {

// Type-by-type attention dependency. values[a][b] is the zero-referenced
// mean [CLS]->[CLS] attention weight from columns of type a to columns of
// type b; counts[a][b] is the number of co-occurring column pairs behind it
// (0 marks an absent cell). Generally asymmetric.
struct DependencyMatrix {
    std::vector<std::string> labels;
    Matrix values;
    Matrix counts;

    std::string values_csv() const;
    std::string counts_csv() const;
};

DependencyMatrix column_dependency_matrix(const AnnotationModel& model, const Corpus& corpus,
                                          const SerializerConfig& ser,
                                          const TokenVocabulary& vocab);

// Rows of the encoder output at the table's [CLS] positions (eval mode).
Matrix extract_column_embeddings(const EncoderParams& params, const Table& table,
                                 const SerializerConfig& ser, const TokenVocabulary& vocab);

struct KMeansResult {
    std::vector<int> assignments;
    Matrix centroids;
    double inertia = 0;
    int iterations = 0;
    std::vector<double> inertia_curve;  // one entry per Lloyd iteration
};

// Lloyd's algorithm with k-means++ seeding; deterministic per seed.
KMeansResult kmeans(const Matrix& vectors, int k, uint64_t seed, int max_iters = 100);

// Shared context for the sweep drivers: corpora, vocabulary, and the model /
// training configuration every run starts from.
struct SweepSetup {
    const Corpus* train = nullptr;
    const Corpus* valid = nullptr;
    const Corpus* test = nullptr;
    const TokenVocabulary* vocab = nullptr;
    EncoderConfig encoder;
    TrainConfig train_cfg;
    LabelMode mode = LabelMode::Multiclass;
    bool with_relations = true;
};

struct SweepRow {
    std::string setting;
    std::string variant;  // "multi" | "single-task:type" | "single-task:relation"
    int max_cols = 0;
    bool has_type = false, has_relation = false;
    EvalReport type_report, relation_report;
    double seconds = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::string to_csv() const;
};

// Full train+eval per budget, everything else (seeds included) fixed.
SweepReport token_budget_sweep(const SweepSetup& setup, const std::vector<int>& budgets);

// Nested training subsets (smaller fraction contained in larger), trained
// once per fraction for the multi-task model and per-task single-task runs.
SweepReport learning_curve(const SweepSetup& setup, const std::vector<double>& fractions);

// Returns the table positions each fraction trains on; exposed so tests can
// assert the nesting property directly.
std::vector<std::vector<int>> fraction_subsets(int num_tables, const std::vector<double>& fractions,
                                               uint64_t seed);

enum class ShuffleMode { Rows, Columns };

Corpus shuffle_corpus(const Corpus& corpus, ShuffleMode mode, uint64_t seed);

// Baseline vs shuffled-data retraining from the same initialization seed.
SweepReport shuffle_robustness(const SweepSetup& setup, ShuffleMode mode, uint64_t seed);

}  // namespace tabanno
