#include "tabanno/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "tabanno/error.hpp"
#include "tabanno/rng.hpp"

namespace tabanno {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TypeTarget {
    int cls_position;
    std::set<int> gold;
};

struct RelationTarget {
    int subject_position;
    int object_position;
    std::set<int> gold;
};

struct TrainItem {
    EncodedSequence seq;
    std::vector<TypeTarget> type_targets;
    std::vector<RelationTarget> rel_targets;
};

int target_count(const TrainItem& item) {
    return static_cast<int>(item.type_targets.size() + item.rel_targets.size());
}

// Algorithm-style pre-serialization of one task's training set. Tables whose
// column count exceeds the budget capacity are dropped, not truncated.
std::vector<TrainItem> build_items(const Corpus& corpus, TaskKind kind, SerializationMode ser_mode,
                                   const SerializerConfig& ser, const TokenVocabulary& vocab,
                                   long& dropped) {
    std::vector<TrainItem> items;
    auto type_by_table = corpus.type_annotations_by_table();
    auto rel_by_table = corpus.relation_annotations_by_table();
    for (size_t ti = 0; ti < corpus.tables.size(); ++ti) {
        const Table& table = corpus.tables[ti];
        if (ser_mode == SerializationMode::TableWise) {
            if (table.num_columns() > max_columns(ser)) {
                ++dropped;
                continue;
            }
            TrainItem item;
            item.seq = serialize_table(table, ser, vocab);
            if (kind == TaskKind::ColumnType) {
                for (int ai : type_by_table[ti]) {
                    const TypeAnnotation& a = corpus.type_annotations[ai];
                    int pos = item.seq.cls_positions[item.seq.cls_slot_for_column(a.column_index)];
                    item.type_targets.push_back({pos, a.labels});
                }
            } else {
                for (int ai : rel_by_table[ti]) {
                    const RelationAnnotation& a = corpus.relation_annotations[ai];
                    int sp = item.seq.cls_positions[item.seq.cls_slot_for_column(a.subject_index)];
                    int op = item.seq.cls_positions[item.seq.cls_slot_for_column(a.object_index)];
                    item.rel_targets.push_back({sp, op, a.labels});
                }
            }
            if (target_count(item) > 0) items.push_back(std::move(item));
        } else {
            std::string header;
            if (kind == TaskKind::ColumnType) {
                for (int ai : type_by_table[ti]) {
                    const TypeAnnotation& a = corpus.type_annotations[ai];
                    const Column& col = table.columns[a.column_index];
                    header = table.headers ? (*table.headers)[a.column_index] : "";
                    TrainItem item;
                    item.seq = serialize_single_column(col, ser, vocab, header);
                    item.seq.table_id = table.id;
                    item.type_targets.push_back({item.seq.cls_positions[0], a.labels});
                    items.push_back(std::move(item));
                }
            } else {
                for (int ai : rel_by_table[ti]) {
                    const RelationAnnotation& a = corpus.relation_annotations[ai];
                    TrainItem item;
                    std::string ha = table.headers ? (*table.headers)[a.subject_index] : "";
                    std::string hb = table.headers ? (*table.headers)[a.object_index] : "";
                    item.seq = serialize_column_pair(table.columns[a.subject_index],
                                                     table.columns[a.object_index], ser, vocab, ha,
                                                     hb);
                    item.seq.table_id = table.id;
                    // Pair sequences carry one [CLS]; both halves of the
                    // relation input read it.
                    int pos = item.seq.cls_positions[0];
                    item.rel_targets.push_back({pos, pos, a.labels});
                    items.push_back(std::move(item));
                }
            }
        }
    }
    return items;
}

struct FlatParams {
    std::vector<double*> params;
    std::vector<const double*> grads;
    std::vector<size_t> sizes;
    size_t total = 0;
};

FlatParams flat_view(EncoderTensors& params, const EncoderTensors& grads) {
    FlatParams v;
    for_each_tensor(params, [&](const std::string&, TensorKind, Matrix& m) {
        v.params.push_back(m.data.data());
        v.sizes.push_back(m.size());
        v.total += m.size();
    });
    for_each_tensor(const_cast<EncoderTensors&>(grads),
                    [&](const std::string&, TensorKind, Matrix& m) {
                        v.grads.push_back(m.data.data());
                    });
    return v;
}

void append_head(FlatParams& v, Matrix& w, Matrix& b, const Matrix& gw, const Matrix& gb) {
    v.params.push_back(w.data.data());
    v.grads.push_back(gw.data.data());
    v.sizes.push_back(w.size());
    v.total += w.size();
    v.params.push_back(b.data.data());
    v.grads.push_back(gb.data.data());
    v.sizes.push_back(b.size());
    v.total += b.size();
}

void zero_tensors(EncoderTensors& t) {
    for_each_tensor(t, [](const std::string&, TensorKind, Matrix& m) { m.zero(); });
}

// One batch of forward/backward passes; returns the summed unnormalized loss
// and the number of annotated items it covers.
std::pair<double, int> batch_gradients(const AnnotationModel& model, TaskKind kind,
                                       const std::vector<TrainItem>& items,
                                       const std::vector<int>& order, size_t begin, size_t end,
                                       uint64_t step_seed, EncoderTensors& enc_grads,
                                       TypeHead& type_grads, RelationHead& rel_grads) {
    int n_targets = 0;
    for (size_t i = begin; i < end; ++i) n_targets += target_count(items[order[i]]);
    if (n_targets == 0) return {0.0, 0};
    double inv_n = 1.0 / n_targets;

    double total_loss = 0.0;
    for (size_t i = begin; i < end; ++i) {
        const TrainItem& item = items[order[i]];
        ForwardCache cache;
        ContextEmbeddings emb = encoder_forward(model.encoder, item.seq, /*train_mode=*/true,
                                                mix_seed(step_seed, i), &cache);
        Matrix d_emb(emb.rows, emb.cols);
        if (kind == TaskKind::ColumnType) {
            for (const TypeTarget& t : item.type_targets) {
                auto logits = type_logits(model.type_head, emb, t.cls_position);
                std::vector<std::vector<double>> dl;
                total_loss += task_loss_grad({logits}, {t.gold}, model.type_mode, dl);
                for (double& g : dl[0]) g *= inv_n;
                type_head_backward(model.type_head, emb, t.cls_position, dl[0], d_emb, type_grads);
            }
        } else {
            for (const RelationTarget& t : item.rel_targets) {
                auto logits = relation_logits(model.relation_head, emb, t.subject_position,
                                              t.object_position);
                std::vector<std::vector<double>> dl;
                total_loss += task_loss_grad({logits}, {t.gold}, model.relation_mode, dl);
                for (double& g : dl[0]) g *= inv_n;
                relation_head_backward(model.relation_head, emb, t.subject_position,
                                       t.object_position, dl[0], d_emb, rel_grads);
            }
        }
        encoder_backward(model.encoder, cache, d_emb, enc_grads);
    }
    return {total_loss, n_targets};
}

}  // namespace

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,task,loss,val_f1\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n", r.epoch, r.task.c_str(),
                      r.train_loss, r.val_f1);
        out += buf;
    }
    return out;
}

std::string TrainHistory::timing_csv() const {
    std::string out = "epoch,task,seconds\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.3f\n", r.epoch, r.task.c_str(), r.seconds);
        out += buf;
    }
    return out;
}

int select_checkpoint(const TrainHistory& history) {
    if (history.records.empty()) throw DataError("select_checkpoint: empty history");
    std::map<int, std::pair<double, int>> per_epoch;  // epoch -> (sum, count)
    for (const auto& r : history.records) {
        auto& [sum, count] = per_epoch[r.epoch];
        sum += r.val_f1;
        ++count;
    }
    int best = 0;
    double best_score = -1.0;
    for (const auto& [epoch, sc] : per_epoch) {
        double mean = sc.first / sc.second;
        if (mean > best_score + 1e-15) {
            best_score = mean;
            best = epoch;
        }
    }
    return best;
}

TrainHistory train_multitask(AnnotationModel& model, const std::vector<TaskSpec>& tasks,
                             const TrainConfig& cfg, const TokenVocabulary& vocab,
                             const TrainHooks* hooks) {
    if (tasks.empty()) throw ConfigError("train: empty task list");
    if (cfg.num_epochs < 1) throw ConfigError("train: num_epochs must be positive");
    if (cfg.learning_rate <= 0) throw ConfigError("train: learning rate must be positive");
    cfg.serializer.validate();

    int num_tasks = static_cast<int>(tasks.size());
    TrainHistory history;
    history.dropped_items.assign(num_tasks, 0);

    // Algorithm lines 3-4: serialize every training set once, up front.
    std::vector<std::vector<TrainItem>> task_items(num_tasks);
    for (int i = 0; i < num_tasks; ++i) {
        const TaskSpec& task = tasks[i];
        if (!task.train || task.train->tables.empty())
            throw ConfigError("train: task " + task.name + " has an empty training set");
        if (task.batch_size < 1) throw ConfigError("train: batch size must be positive");
        task_items[i] = build_items(*task.train, task.kind, cfg.serialization, cfg.serializer,
                                    vocab, history.dropped_items[i]);
        if (task_items[i].empty())
            throw ConfigError("train: task " + task.name + " has no serializable annotated items");
        if (history.dropped_items[i] > 0)
            std::fprintf(stderr, "train: task %s dropped %ld over-wide tables\n",
                         task.name.c_str(), history.dropped_items[i]);
    }

    // Task-local optimizers over (encoder + that task's head), with
    // task-local linear-decay schedules.
    EncoderTensors enc_grads = EncoderTensors::zeros(model.encoder.config);
    TypeHead type_grads;
    type_grads.w = Matrix(model.type_head.w.rows, model.type_head.w.cols);
    type_grads.b = Matrix(1, model.type_head.b.cols);
    RelationHead rel_grads;
    rel_grads.w = Matrix(model.relation_head.w.rows, model.relation_head.w.cols);
    rel_grads.b = Matrix(1, model.relation_head.b.cols);

    std::vector<FlatParams> views(num_tasks);
    std::vector<AdamState> adam(num_tasks);
    for (int i = 0; i < num_tasks; ++i) {
        views[i] = flat_view(model.encoder.tensors, enc_grads);
        if (tasks[i].kind == TaskKind::ColumnType)
            append_head(views[i], model.type_head.w, model.type_head.b, type_grads.w,
                        type_grads.b);
        else
            append_head(views[i], model.relation_head.w, model.relation_head.b, rel_grads.w,
                        rel_grads.b);
        long steps_per_epoch =
            (static_cast<long>(task_items[i].size()) + tasks[i].batch_size - 1) /
            tasks[i].batch_size;
        AdamConfig acfg;
        acfg.learning_rate = cfg.learning_rate;
        acfg.beta1 = cfg.beta1;
        acfg.beta2 = cfg.beta2;
        acfg.epsilon = cfg.epsilon;
        acfg.clip_norm = cfg.clip_norm;
        acfg.total_steps = steps_per_epoch * cfg.num_epochs;
        adam[i] = AdamState(acfg, views[i].total);
    }

    bool has_validation = false;
    for (const TaskSpec& t : tasks) has_validation |= (t.valid && !t.valid->tables.empty());

    AnnotationModel best_model = model;
    double best_score = -1.0;
    int best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.num_epochs; ++epoch) {
        std::vector<double> epoch_loss(num_tasks, 0.0);
        std::vector<double> epoch_seconds(num_tasks, 0.0);
        for (int i = 0; i < num_tasks; ++i) {
            if (hooks && hooks->before_phase)
                hooks->before_phase({epoch, i, &model, &adam});
            auto t0 = Clock::now();
            const TaskSpec& task = tasks[i];
            auto& items = task_items[i];

            std::vector<int> order(items.size());
            for (size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
            Rng shuffle_rng(mix_seed(cfg.seed, 0x5u, epoch, i));
            shuffle_rng.shuffle(order);

            double loss_sum = 0.0;
            long loss_items = 0;
            size_t batch = static_cast<size_t>(task.batch_size);
            long step_index = 0;
            for (size_t start = 0; start < order.size(); start += batch, ++step_index) {
                size_t stop = std::min(order.size(), start + batch);
                zero_tensors(enc_grads);
                type_grads.w.zero();
                type_grads.b.zero();
                rel_grads.w.zero();
                rel_grads.b.zero();
                uint64_t step_seed = mix_seed(cfg.seed, epoch, i, step_index);
                auto [loss, n] = batch_gradients(model, task.kind, items, order, start, stop,
                                                 step_seed, enc_grads, type_grads, rel_grads);
                if (!std::isfinite(loss))
                    throw ComputeError("training diverged (non-finite loss) at epoch " +
                                       std::to_string(epoch) + ", task " + task.name);
                if (n == 0) continue;
                loss_sum += loss;
                loss_items += n;
                adam[i].step(views[i].params, views[i].grads, views[i].sizes);
            }
            epoch_loss[i] = loss_items > 0 ? loss_sum / loss_items : 0.0;
            epoch_seconds[i] = seconds_since(t0);
            if (hooks && hooks->after_phase)
                hooks->after_phase({epoch, i, &model, &adam});
        }

        // Validation at epoch end so the selection score matches the stored
        // end-of-epoch parameters.
        double score_sum = 0.0;
        std::vector<double> val_f1(num_tasks, 0.0);
        for (int i = 0; i < num_tasks; ++i) {
            const TaskSpec& task = tasks[i];
            if (task.valid && !task.valid->tables.empty()) {
                EvalReport rep = evaluate_task(model, *task.valid, task.kind, cfg.serialization,
                                               cfg.serializer, vocab);
                val_f1[i] = rep.micro_f1;
            }
            score_sum += val_f1[i];
            history.records.push_back(
                {epoch, task.name, epoch_loss[i], val_f1[i], epoch_seconds[i]});
        }
        if (has_validation) {
            double score = score_sum / num_tasks;
            if (score > best_score + 1e-15) {
                best_score = score;
                best_epoch = epoch;
                best_model = model;
            }
        }
    }

    if (has_validation && best_epoch > 0) {
        model = best_model;
        history.best_epoch = best_epoch;
        history.best_score = best_score;
    } else {
        history.best_epoch = cfg.num_epochs;
        history.best_score = 0.0;
    }
    return history;
}

TrainHistory train_single_task(AnnotationModel& model, const TaskSpec& task,
                               const TrainConfig& cfg, const TokenVocabulary& vocab) {
    return train_multitask(model, {task}, cfg, vocab);
}

std::vector<double> pretrain_mlm(EncoderParams& params, const Corpus& corpus,
                                 const MLMConfig& cfg, const TokenVocabulary& vocab) {
    if (cfg.mask_prob <= 0.0 || cfg.mask_prob >= 1.0)
        throw ConfigError("mlm: mask probability must lie in (0, 1)");
    if (cfg.epochs < 1) throw ConfigError("mlm: epochs must be positive");
    if (corpus.tables.empty()) throw ConfigError("mlm: empty corpus");
    cfg.serializer.validate();

    long dropped = 0;
    std::vector<EncodedSequence> seqs;
    for (const Table& t : corpus.tables) {
        if (t.num_columns() > max_columns(cfg.serializer)) {
            ++dropped;
            continue;
        }
        seqs.push_back(serialize_table(t, cfg.serializer, vocab));
    }
    if (seqs.empty()) throw ConfigError("mlm: no serializable tables");

    EncoderTensors grads = EncoderTensors::zeros(params.config);
    FlatParams view = flat_view(params.tensors, grads);
    AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    AdamState adam(acfg, view.total);

    std::vector<double> curve;
    long total_masked_ever = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> order(seqs.size());
        for (size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
        Rng shuffle_rng(mix_seed(cfg.seed, 0x31a5u, epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        long epoch_masked = 0;
        size_t batch = static_cast<size_t>(std::max(1, cfg.batch_size));
        long step_index = 0;
        for (size_t start = 0; start < order.size(); start += batch, ++step_index) {
            size_t stop = std::min(order.size(), start + batch);
            zero_tensors(grads);
            uint64_t step_seed = mix_seed(cfg.seed, 0x917fu, epoch, step_index);

            // Two passes: count masked targets first so the batch loss is a
            // clean mean, then run the gradient pass with the same masks.
            struct MaskedSeq {
                EncodedSequence seq;
                std::vector<int> positions;
                std::vector<int> truth;
            };
            std::vector<MaskedSeq> masked;
            int n_targets = 0;
            for (size_t i = start; i < stop; ++i) {
                const EncodedSequence& base = seqs[order[i]];
                Rng mask_rng(mix_seed(step_seed, 0x6ea3u, i));
                MaskedSeq ms;
                ms.seq = base;
                for (int pos = 0; pos < base.length(); ++pos) {
                    if (base.ids[pos] < TokenVocabulary::kNumReserved) continue;
                    if (mask_rng.uniform() < cfg.mask_prob) {
                        ms.positions.push_back(pos);
                        ms.truth.push_back(base.ids[pos]);
                        ms.seq.ids[pos] = TokenVocabulary::kMask;
                    }
                }
                if (!ms.positions.empty()) {
                    n_targets += static_cast<int>(ms.positions.size());
                    masked.push_back(std::move(ms));
                }
            }
            if (n_targets == 0) continue;
            double inv_n = 1.0 / n_targets;

            double batch_loss = 0.0;
            for (size_t mi = 0; mi < masked.size(); ++mi) {
                const MaskedSeq& ms = masked[mi];
                ForwardCache cache;
                ContextEmbeddings emb = encoder_forward(params, ms.seq, /*train_mode=*/true,
                                                        mix_seed(step_seed, 0x77u, mi), &cache);
                Matrix logits = mlm_project(params, emb, ms.positions);
                Matrix d_logits(logits.rows, logits.cols);
                for (int r = 0; r < logits.rows; ++r) {
                    const double* z = logits.row(r);
                    double mx = z[0];
                    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, z[j]);
                    double sum = 0.0;
                    for (int j = 0; j < logits.cols; ++j) sum += std::exp(z[j] - mx);
                    double lse = mx + std::log(sum);
                    batch_loss += lse - z[ms.truth[r]];
                    double* dz = d_logits.row(r);
                    for (int j = 0; j < logits.cols; ++j) {
                        double p = std::exp(z[j] - lse);
                        dz[j] = (p - (j == ms.truth[r] ? 1.0 : 0.0)) * inv_n;
                    }
                }
                Matrix d_emb(emb.rows, emb.cols);
                mlm_project_backward(params, emb, ms.positions, d_logits, d_emb, grads);
                encoder_backward(params, cache, d_emb, grads);
            }
            if (!std::isfinite(batch_loss))
                throw ComputeError("mlm pretraining diverged at epoch " + std::to_string(epoch));
            adam.step(view.params, view.grads, view.sizes);
            epoch_loss += batch_loss;
            epoch_masked += n_targets;
        }
        if (epoch_masked == 0 && epoch == 1)
            throw DataError("mlm: corpus yielded no masked positions");
        total_masked_ever += epoch_masked;
        curve.push_back(epoch_masked > 0 ? epoch_loss / epoch_masked : 0.0);
    }
    if (total_masked_ever == 0) throw DataError("mlm: corpus yielded no masked positions");
    (void)dropped;
    return curve;
}

std::vector<ColumnPrediction> predict_corpus_types(const AnnotationModel& model,
                                                   const Corpus& corpus, SerializationMode ser_mode,
                                                   const SerializerConfig& ser,
                                                   const TokenVocabulary& vocab) {
    std::vector<ColumnPrediction> out;
    auto type_by_table = corpus.type_annotations_by_table();
    for (size_t ti = 0; ti < corpus.tables.size(); ++ti) {
        const Table& table = corpus.tables[ti];
        if (type_by_table[ti].empty()) continue;
        if (ser_mode == SerializationMode::TableWise) {
            if (table.num_columns() > max_columns(ser)) continue;
            EncodedSequence seq = serialize_table(table, ser, vocab);
            ContextEmbeddings emb = encoder_forward(model.encoder, seq, false);
            for (int ai : type_by_table[ti]) {
                const TypeAnnotation& a = corpus.type_annotations[ai];
                int pos = seq.cls_positions[seq.cls_slot_for_column(a.column_index)];
                auto probs = probabilities_from_logits(type_logits(model.type_head, emb, pos),
                                                       model.type_mode);
                ColumnPrediction cp;
                cp.table_id = table.id;
                cp.column_index = a.column_index;
                cp.pred = decide_labels(probs, model.type_mode);
                cp.probs = std::move(probs);
                cp.gold = a.labels;
                out.push_back(std::move(cp));
            }
        } else {
            for (int ai : type_by_table[ti]) {
                const TypeAnnotation& a = corpus.type_annotations[ai];
                std::string header = table.headers ? (*table.headers)[a.column_index] : "";
                EncodedSequence seq =
                    serialize_single_column(table.columns[a.column_index], ser, vocab, header);
                ContextEmbeddings emb = encoder_forward(model.encoder, seq, false);
                auto probs = probabilities_from_logits(
                    type_logits(model.type_head, emb, seq.cls_positions[0]), model.type_mode);
                ColumnPrediction cp;
                cp.table_id = table.id;
                cp.column_index = a.column_index;
                cp.pred = decide_labels(probs, model.type_mode);
                cp.probs = std::move(probs);
                cp.gold = a.labels;
                out.push_back(std::move(cp));
            }
        }
    }
    return out;
}

std::vector<RelationPrediction> predict_corpus_relations(const AnnotationModel& model,
                                                         const Corpus& corpus,
                                                         SerializationMode ser_mode,
                                                         const SerializerConfig& ser,
                                                         const TokenVocabulary& vocab) {
    std::vector<RelationPrediction> out;
    auto rel_by_table = corpus.relation_annotations_by_table();
    for (size_t ti = 0; ti < corpus.tables.size(); ++ti) {
        const Table& table = corpus.tables[ti];
        if (rel_by_table[ti].empty()) continue;
        if (ser_mode == SerializationMode::TableWise) {
            if (table.num_columns() > max_columns(ser)) continue;
            EncodedSequence seq = serialize_table(table, ser, vocab);
            ContextEmbeddings emb = encoder_forward(model.encoder, seq, false);
            for (int ai : rel_by_table[ti]) {
                const RelationAnnotation& a = corpus.relation_annotations[ai];
                int sp = seq.cls_positions[seq.cls_slot_for_column(a.subject_index)];
                int op = seq.cls_positions[seq.cls_slot_for_column(a.object_index)];
                auto probs = probabilities_from_logits(
                    relation_logits(model.relation_head, emb, sp, op), model.relation_mode);
                RelationPrediction rp;
                rp.table_id = table.id;
                rp.subject_index = a.subject_index;
                rp.object_index = a.object_index;
                rp.pred = decide_labels(probs, model.relation_mode);
                rp.probs = std::move(probs);
                rp.gold = a.labels;
                out.push_back(std::move(rp));
            }
        } else {
            for (int ai : rel_by_table[ti]) {
                const RelationAnnotation& a = corpus.relation_annotations[ai];
                std::string ha = table.headers ? (*table.headers)[a.subject_index] : "";
                std::string hb = table.headers ? (*table.headers)[a.object_index] : "";
                EncodedSequence seq =
                    serialize_column_pair(table.columns[a.subject_index],
                                          table.columns[a.object_index], ser, vocab, ha, hb);
                ContextEmbeddings emb = encoder_forward(model.encoder, seq, false);
                int pos = seq.cls_positions[0];
                auto probs = probabilities_from_logits(
                    relation_logits(model.relation_head, emb, pos, pos), model.relation_mode);
                RelationPrediction rp;
                rp.table_id = table.id;
                rp.subject_index = a.subject_index;
                rp.object_index = a.object_index;
                rp.pred = decide_labels(probs, model.relation_mode);
                rp.probs = std::move(probs);
                rp.gold = a.labels;
                out.push_back(std::move(rp));
            }
        }
    }
    return out;
}

EvalReport evaluate_task(const AnnotationModel& model, const Corpus& corpus, TaskKind kind,
                         SerializationMode ser_mode, const SerializerConfig& ser,
                         const TokenVocabulary& vocab) {
    std::vector<std::set<int>> preds, golds;
    if (kind == TaskKind::ColumnType) {
        auto ps = predict_corpus_types(model, corpus, ser_mode, ser, vocab);
        if (ps.empty()) throw DataError("evaluate_task: no type predictions");
        for (auto& p : ps) {
            preds.push_back(p.pred);
            golds.push_back(p.gold);
        }
        return evaluate(preds, golds, model.type_mode);
    }
    auto ps = predict_corpus_relations(model, corpus, ser_mode, ser, vocab);
    if (ps.empty()) throw DataError("evaluate_task: no relation predictions");
    for (auto& p : ps) {
        preds.push_back(p.pred);
        golds.push_back(p.gold);
    }
    return evaluate(preds, golds, model.relation_mode);
}

}  // namespace tabanno
