#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tabanno/annotator.hpp"
#include "tabanno/metrics.hpp"
#include "tabanno/optimizer.hpp"
#include "tabanno/serializer.hpp"

namespace tabanno {

enum class TaskKind { ColumnType, ColumnRelation };

// Table-wise feeds whole serialized tables; single-column feeds one column
// (or one column pair) per sequence.
enum class SerializationMode { TableWise, SingleColumn };

struct TaskSpec {
    std::string name;  // history label, e.g. "type" / "relation"
    TaskKind kind = TaskKind::ColumnType;
    const Corpus* train = nullptr;  // caller keeps corpora alive
    const Corpus* valid = nullptr;  // may be null/empty: no checkpoint signal
    LabelMode mode = LabelMode::Multiclass;
    int batch_size = 16;
};

struct TrainConfig {
    int num_epochs = 30;
    double learning_rate = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 0.0;  // off by default
    uint64_t seed = 0;
    SerializationMode serialization = SerializationMode::TableWise;
    SerializerConfig serializer;
};

struct EpochTaskRecord {
    int epoch = 0;  // 1-based
    std::string task;
    double train_loss = 0;
    double val_f1 = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochTaskRecord> records;
    int best_epoch = 0;  // 1-based; the checkpoint the model was restored to
    double best_score = 0;
    std::vector<long> dropped_items;  // per task: tables too wide to serialize

    // Deterministic columns only; wall times go to timing_csv().
    std::string to_csv() const;
    std::string timing_csv() const;
};

// Highest mean validation score, earliest epoch on ties. 1-based.
int select_checkpoint(const TrainHistory& history);

struct PhaseInfo {
    int epoch = 0;       // 1-based
    int task_index = 0;  // into the task list
    const AnnotationModel* model = nullptr;
    const std::vector<AdamState>* adam_states = nullptr;  // one per task
};

struct TrainHooks {
    std::function<void(const PhaseInfo&)> before_phase;
    std::function<void(const PhaseInfo&)> after_phase;
};

// Epoch-level task alternation with task-local optimizers and schedules;
// restores the checkpoint with the best mean validation micro F1.
TrainHistory train_multitask(AnnotationModel& model, const std::vector<TaskSpec>& tasks,
                             const TrainConfig& cfg, const TokenVocabulary& vocab,
                             const TrainHooks* hooks = nullptr);

// Single-task convenience wrapper over the same loop.
TrainHistory train_single_task(AnnotationModel& model, const TaskSpec& task,
                               const TrainConfig& cfg, const TokenVocabulary& vocab);

struct MLMConfig {
    double mask_prob = 0.15;
    int epochs = 5;
    double learning_rate = 1e-3;
    int batch_size = 16;
    uint64_t seed = 0;
    SerializerConfig serializer;
};

// Masked-token pretraining over serialized tables. Returns the per-epoch
// mean masked cross-entropy curve; params are updated in place.
std::vector<double> pretrain_mlm(EncoderParams& params, const Corpus& corpus,
                                 const MLMConfig& cfg, const TokenVocabulary& vocab);

struct ColumnPrediction {
    std::string table_id;
    int column_index = 0;
    std::vector<double> probs;
    std::set<int> pred;
    std::set<int> gold;
};

struct RelationPrediction {
    std::string table_id;
    int subject_index = 0;
    int object_index = 0;
    std::vector<double> probs;
    std::set<int> pred;
    std::set<int> gold;
};

// One prediction per annotated column / pair; tables too wide to serialize
// are skipped.
std::vector<ColumnPrediction> predict_corpus_types(const AnnotationModel& model,
                                                   const Corpus& corpus, SerializationMode ser_mode,
                                                   const SerializerConfig& ser,
                                                   const TokenVocabulary& vocab);
std::vector<RelationPrediction> predict_corpus_relations(const AnnotationModel& model,
                                                         const Corpus& corpus,
                                                         SerializationMode ser_mode,
                                                         const SerializerConfig& ser,
                                                         const TokenVocabulary& vocab);

EvalReport evaluate_task(const AnnotationModel& model, const Corpus& corpus, TaskKind kind,
                         SerializationMode ser_mode, const SerializerConfig& ser,
                         const TokenVocabulary& vocab);

}  // namespace tabanno
