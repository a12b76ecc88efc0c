#include "tabanno/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tabanno/error.hpp"
#include "tabanno/rng.hpp"

namespace tabanno {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string csv_number(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string DependencyMatrix::values_csv() const {
    std::string out = "type";
    for (const auto& l : labels) out += "," + l;
    out += "\n";
    for (int i = 0; i < values.rows; ++i) {
        out += labels[i];
        for (int j = 0; j < values.cols; ++j) {
            out += ",";
            if (counts.at(i, j) > 0) out += csv_number(values.at(i, j));
        }
        out += "\n";
    }
    return out;
}

std::string DependencyMatrix::counts_csv() const {
    std::string out = "type";
    for (const auto& l : labels) out += "," + l;
    out += "\n";
    for (int i = 0; i < counts.rows; ++i) {
        out += labels[i];
        for (int j = 0; j < counts.cols; ++j)
            out += "," + std::to_string(static_cast<long>(counts.at(i, j)));
        out += "\n";
    }
    return out;
}

DependencyMatrix column_dependency_matrix(const AnnotationModel& model, const Corpus& corpus,
                                          const SerializerConfig& ser,
                                          const TokenVocabulary& vocab) {
    if (corpus.type_annotations.empty())
        throw DataError("dependency matrix: corpus has no type annotations");
    int n_types = corpus.type_labels.size();
    DependencyMatrix dep;
    dep.labels = corpus.type_labels.names;
    dep.values = Matrix(n_types, n_types);
    dep.counts = Matrix(n_types, n_types);

    auto type_by_table = corpus.type_annotations_by_table();
    int num_heads = model.encoder.config.num_heads;
    int last = model.encoder.config.num_layers - 1;
    if (last < 0) throw DataError("dependency matrix: encoder has no attention layers");

    bool any_table = false;
    for (size_t ti = 0; ti < corpus.tables.size(); ++ti) {
        const Table& table = corpus.tables[ti];
        if (type_by_table[ti].empty()) continue;
        if (table.num_columns() > max_columns(ser)) continue;
        EncodedSequence seq = serialize_table(table, ser, vocab);
        AttentionTensor att = attention_maps(model.encoder, seq);
        any_table = true;

        // Mean over heads, kept only at [CLS]-[CLS] coordinates.
        const auto& heads = att.weights[last];
        for (int a : type_by_table[ti]) {
            const TypeAnnotation& aa = corpus.type_annotations[a];
            int ia = seq.cls_positions[seq.cls_slot_for_column(aa.column_index)];
            for (int b : type_by_table[ti]) {
                const TypeAnnotation& ab = corpus.type_annotations[b];
                int ib = seq.cls_positions[seq.cls_slot_for_column(ab.column_index)];
                double w = 0.0;
                for (int h = 0; h < num_heads; ++h) w += heads[h].at(ia, ib);
                w /= num_heads;
                for (int la : aa.labels)
                    for (int lb : ab.labels) {
                        dep.values.at(la, lb) += w;
                        dep.counts.at(la, lb) += 1.0;
                    }
            }
        }
    }
    if (!any_table) throw DataError("dependency matrix: no serializable annotated tables");

    // Zero reference point: subtract the count-weighted global mean, so the
    // count-weighted mean of the normalized cells is exactly zero.
    double total_w = 0.0, total_c = 0.0;
    for (size_t i = 0; i < dep.values.data.size(); ++i) {
        total_w += dep.values.data[i];
        total_c += dep.counts.data[i];
    }
    double reference = total_w / total_c;
    for (size_t i = 0; i < dep.values.data.size(); ++i) {
        if (dep.counts.data[i] > 0)
            dep.values.data[i] = dep.values.data[i] / dep.counts.data[i] - reference;
        else
            dep.values.data[i] = 0.0;
    }
    return dep;
}

Matrix extract_column_embeddings(const EncoderParams& params, const Table& table,
                                 const SerializerConfig& ser, const TokenVocabulary& vocab) {
    EncodedSequence seq = serialize_table(table, ser, vocab);
    ContextEmbeddings emb = encoder_forward(params, seq, /*train_mode=*/false);
    Matrix out(static_cast<int>(seq.cls_positions.size()), emb.cols);
    for (size_t i = 0; i < seq.cls_positions.size(); ++i)
        std::copy(emb.row(seq.cls_positions[i]), emb.row(seq.cls_positions[i]) + emb.cols,
                  out.row(static_cast<int>(i)));
    return out;
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        double dl = a[i] - b[i];
        s += dl * dl;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const Matrix& vectors, int k, uint64_t seed, int max_iters) {
    int n = vectors.rows, d = vectors.cols;
    if (n == 0) throw ConfigError("kmeans: empty input");
    if (k < 1 || k > n) throw ConfigError("kmeans: k must lie in [1, n]");

    Rng rng(mix_seed(seed, 0x4b9u));
    KMeansResult res;
    res.centroids = Matrix(k, d);

    // k-means++ seeding.
    std::vector<double> dist2(n, std::numeric_limits<double>::max());
    int first = rng.uniform_int(n);
    std::copy(vectors.row(first), vectors.row(first) + d, res.centroids.row(0));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double dd = sq_dist(vectors.row(i), res.centroids.row(c - 1), d);
            dist2[i] = std::min(dist2[i], dd);
            total += dist2[i];
        }
        int chosen = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            chosen = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.uniform_int(n);
        }
        std::copy(vectors.row(chosen), vectors.row(chosen) + d, res.centroids.row(c));
    }

    res.assignments.assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(vectors.row(i), res.centroids.row(0), d);
            for (int c = 1; c < k; ++c) {
                double dd = sq_dist(vectors.row(i), res.centroids.row(c), d);
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        res.inertia = inertia;
        res.inertia_curve.push_back(inertia);
        res.iterations = iter + 1;
        if (!changed) break;

        Matrix sums(k, d);
        std::vector<long> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            int c = res.assignments[i];
            ++counts[c];
            const double* v = vectors.row(i);
            double* s = sums.row(c);
            for (int j = 0; j < d; ++j) s[j] += v[j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // keep the previous centroid
            double inv = 1.0 / counts[c];
            double* ctr = res.centroids.row(c);
            const double* s = sums.row(c);
            for (int j = 0; j < d; ++j) ctr[j] = s[j] * inv;
        }
    }
    return res;
}

namespace {

// One full train+eval cycle for a sweep row.
SweepRow run_sweep_config(const SweepSetup& setup, const SerializerConfig& ser,
                          const Corpus& train, const std::string& setting,
                          const std::string& variant, bool do_type, bool do_relation) {
    auto t0 = Clock::now();
    EncoderConfig enc = setup.encoder;
    enc.vocab_size = setup.vocab->size();

    AnnotationModel model;
    model.encoder = EncoderParams::init(enc);
    model.type_head =
        TypeHead::init(enc.d_model, std::max(1, setup.train->type_labels.size()), enc.seed);
    model.relation_head =
        RelationHead::init(enc.d_model, std::max(1, setup.train->relation_labels.size()),
                           enc.seed);
    model.type_mode = setup.mode;
    model.relation_mode = setup.mode;

    TrainConfig cfg = setup.train_cfg;
    cfg.serializer = ser;

    std::vector<TaskSpec> tasks;
    if (do_type)
        tasks.push_back({"type", TaskKind::ColumnType, &train, setup.valid, setup.mode, 16});
    if (do_relation)
        tasks.push_back({"relation", TaskKind::ColumnRelation, &train, setup.valid, setup.mode, 16});
    train_multitask(model, tasks, cfg, *setup.vocab);

    SweepRow row;
    row.setting = setting;
    row.variant = variant;
    row.max_cols = max_columns(ser);
    const Corpus* eval_corpus = setup.test ? setup.test : setup.valid;
    if (do_type && eval_corpus) {
        row.type_report = evaluate_task(model, *eval_corpus, TaskKind::ColumnType,
                                        cfg.serialization, ser, *setup.vocab);
        row.has_type = true;
    }
    if (do_relation && eval_corpus) {
        row.relation_report = evaluate_task(model, *eval_corpus, TaskKind::ColumnRelation,
                                            cfg.serialization, ser, *setup.vocab);
        row.has_relation = true;
    }
    row.seconds = seconds_since(t0);
    return row;
}

}  // namespace

std::string SweepReport::to_csv() const {
    std::string out =
        "setting,variant,max_columns,type_micro_f1,type_macro_f1,relation_micro_f1,relation_macro_"
        "f1,seconds\n";
    for (const auto& r : rows) {
        out += r.setting + "," + r.variant + "," + std::to_string(r.max_cols) + ",";
        out += (r.has_type ? csv_number(r.type_report.micro_f1) : std::string()) + ",";
        out += (r.has_type ? csv_number(r.type_report.macro_f1) : std::string()) + ",";
        out += (r.has_relation ? csv_number(r.relation_report.micro_f1) : std::string()) + ",";
        out += (r.has_relation ? csv_number(r.relation_report.macro_f1) : std::string()) + ",";
        out += csv_number(r.seconds) + "\n";
    }
    return out;
}

SweepReport token_budget_sweep(const SweepSetup& setup, const std::vector<int>& budgets) {
    if (budgets.empty()) throw ConfigError("budget sweep: no budgets given");
    for (int b : budgets)
        if (b < 1) throw ConfigError("budget sweep: budgets must be >= 1");
    SweepReport report;
    for (int b : budgets) {
        SerializerConfig ser = setup.train_cfg.serializer;
        ser.max_tokens_per_column = b;
        report.rows.push_back(run_sweep_config(setup, ser, *setup.train,
                                               "budget=" + std::to_string(b), "multi", true,
                                               setup.with_relations));
    }
    return report;
}

std::vector<std::vector<int>> fraction_subsets(int num_tables,
                                               const std::vector<double>& fractions,
                                               uint64_t seed) {
    std::vector<int> order(num_tables);
    for (int i = 0; i < num_tables; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0xf4acu));
    rng.shuffle(order);
    std::vector<std::vector<int>> subsets;
    for (double f : fractions) {
        if (f <= 0.0 || f > 1.0) throw ConfigError("learning curve: fractions must lie in (0, 1]");
        int n = static_cast<int>(std::floor(f * num_tables));
        if (n < 1) throw ConfigError("learning curve: fraction yields zero tables");
        std::vector<int> subset(order.begin(), order.begin() + n);
        std::sort(subset.begin(), subset.end());
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

SweepReport learning_curve(const SweepSetup& setup, const std::vector<double>& fractions) {
    if (fractions.empty()) throw ConfigError("learning curve: no fractions given");
    auto subsets = fraction_subsets(setup.train->num_tables(), fractions, setup.train_cfg.seed);
    SweepReport report;
    for (size_t fi = 0; fi < fractions.size(); ++fi) {
        Corpus sub;
        sub.type_labels = setup.train->type_labels;
        sub.relation_labels = setup.train->relation_labels;
        std::set<std::string> ids;
        for (int pos : subsets[fi]) {
            sub.tables.push_back(setup.train->tables[pos]);
            ids.insert(setup.train->tables[pos].id);
        }
        for (const auto& a : setup.train->type_annotations)
            if (ids.count(a.table_id)) sub.type_annotations.push_back(a);
        for (const auto& a : setup.train->relation_annotations)
            if (ids.count(a.table_id)) sub.relation_annotations.push_back(a);

        char label[32];
        std::snprintf(label, sizeof(label), "fraction=%g", fractions[fi]);
        report.rows.push_back(run_sweep_config(setup, setup.train_cfg.serializer, sub, label,
                                               "multi", true, setup.with_relations));
        report.rows.push_back(run_sweep_config(setup, setup.train_cfg.serializer, sub, label,
                                               "single-task:type", true, false));
        if (setup.with_relations)
            report.rows.push_back(run_sweep_config(setup, setup.train_cfg.serializer, sub, label,
                                                   "single-task:relation", false, true));
    }
    return report;
}

Corpus shuffle_corpus(const Corpus& corpus, ShuffleMode mode, uint64_t seed) {
    Corpus out = corpus;
    Rng rng(mix_seed(seed, mode == ShuffleMode::Rows ? 0x105u : 0xc015u));
    if (mode == ShuffleMode::Rows) {
        for (Table& t : out.tables) {
            size_t rows = t.columns.front().values.size();
            bool rectangular = true;
            for (const Column& c : t.columns) rectangular &= (c.values.size() == rows);
            if (!rectangular || rows < 2) continue;
            std::vector<int> perm(rows);
            for (size_t r = 0; r < rows; ++r) perm[r] = static_cast<int>(r);
            rng.shuffle(perm);
            for (Column& c : t.columns) {
                std::vector<std::string> nv(rows);
                for (size_t r = 0; r < rows; ++r) nv[r] = c.values[perm[r]];
                c.values = std::move(nv);
            }
        }
        return out;
    }
    // Column shuffle: permute columns and re-index annotations so every gold
    // label follows its column.
    std::unordered_map<std::string, std::vector<int>> perms;
    for (Table& t : out.tables) {
        int n = t.num_columns();
        std::vector<int> perm(n);  // perm[new_index] = old_index
        for (int c = 0; c < n; ++c) perm[c] = c;
        rng.shuffle(perm);
        std::vector<Column> cols(n);
        for (int c = 0; c < n; ++c) cols[c] = t.columns[perm[c]];
        t.columns = std::move(cols);
        if (t.headers) {
            std::vector<std::string> hs(n);
            for (int c = 0; c < n; ++c) hs[c] = (*t.headers)[perm[c]];
            t.headers = hs;
        }
        perms[t.id] = perm;
    }
    for (TypeAnnotation& a : out.type_annotations) {
        const auto& perm = perms.at(a.table_id);
        // old index -> new index
        for (size_t c = 0; c < perm.size(); ++c)
            if (perm[c] == a.column_index) {
                a.column_index = static_cast<int>(c);
                break;
            }
    }
    for (RelationAnnotation& a : out.relation_annotations) {
        const auto& perm = perms.at(a.table_id);
        int ns = a.subject_index, no = a.object_index;
        for (size_t c = 0; c < perm.size(); ++c) {
            if (perm[c] == a.subject_index) ns = static_cast<int>(c);
            if (perm[c] == a.object_index) no = static_cast<int>(c);
        }
        a.subject_index = ns;
        a.object_index = no;
    }
    return out;
}

SweepReport shuffle_robustness(const SweepSetup& setup, ShuffleMode mode, uint64_t seed) {
    SweepReport report;
    report.rows.push_back(run_sweep_config(setup, setup.train_cfg.serializer, *setup.train,
                                           "baseline", "multi", true, setup.with_relations));
    Corpus shuffled = shuffle_corpus(*setup.train, mode, seed);
    std::string label = mode == ShuffleMode::Rows ? "shuffled-rows" : "shuffled-cols";
    report.rows.push_back(run_sweep_config(setup, setup.train_cfg.serializer, shuffled, label,
                                           "multi", true, setup.with_relations));
    return report;
}

}  // namespace tabanno
