#include "tabanno/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tabanno/error.hpp"
#include "tabanno/rng.hpp"

namespace tabanno {

using nlohmann::json;

int LabelVocabulary::intern(const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index.emplace(name, id);
    return id;
}

int LabelVocabulary::id_of(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("unknown label: " + name);
    return it->second;
}

int Corpus::table_index(const std::string& id) const {
    for (size_t i = 0; i < tables.size(); ++i)
        if (tables[i].id == id) return static_cast<int>(i);
    return -1;
}

const Table& Corpus::table_by_id(const std::string& id) const {
    int idx = table_index(id);
    if (idx < 0) throw DataError("unknown table id: " + id);
    return tables[idx];
}

std::vector<std::vector<int>> Corpus::type_annotations_by_table() const {
    std::unordered_map<std::string, int> pos;
    for (size_t i = 0; i < tables.size(); ++i) pos[tables[i].id] = static_cast<int>(i);
    std::vector<std::vector<int>> out(tables.size());
    for (size_t a = 0; a < type_annotations.size(); ++a)
        out[pos.at(type_annotations[a].table_id)].push_back(static_cast<int>(a));
    return out;
}

std::vector<std::vector<int>> Corpus::relation_annotations_by_table() const {
    std::unordered_map<std::string, int> pos;
    for (size_t i = 0; i < tables.size(); ++i) pos[tables[i].id] = static_cast<int>(i);
    std::vector<std::vector<int>> out(tables.size());
    for (size_t a = 0; a < relation_annotations.size(); ++a)
        out[pos.at(relation_annotations[a].table_id)].push_back(static_cast<int>(a));
    return out;
}

void Corpus::validate(LabelMode mode) const {
    std::unordered_map<std::string, int> pos;
    for (size_t i = 0; i < tables.size(); ++i) {
        const Table& t = tables[i];
        if (t.columns.empty()) throw DataError("table " + t.id + ": no columns");
        for (const Column& c : t.columns)
            if (c.values.empty()) throw DataError("table " + t.id + ": empty column");
        if (t.headers && static_cast<int>(t.headers->size()) != t.num_columns())
            throw DataError("table " + t.id + ": header count != column count");
        if (!pos.emplace(t.id, static_cast<int>(i)).second)
            throw DataError("duplicate table id: " + t.id);
    }
    std::set<std::pair<std::string, int>> seen_type;
    for (const TypeAnnotation& a : type_annotations) {
        auto it = pos.find(a.table_id);
        if (it == pos.end()) throw DataError("type annotation references unknown table " + a.table_id);
        const Table& t = tables[it->second];
        if (a.column_index < 0 || a.column_index >= t.num_columns())
            throw DataError("table " + a.table_id + ": type annotation column out of range");
        if (a.labels.empty()) throw DataError("table " + a.table_id + ": empty type label set");
        if (mode == LabelMode::Multiclass && a.labels.size() != 1)
            throw DataError("table " + a.table_id + ": multiclass mode requires a single type label");
        for (int l : a.labels)
            if (l < 0 || l >= type_labels.size())
                throw DataError("table " + a.table_id + ": type label id out of range");
        if (!seen_type.insert({a.table_id, a.column_index}).second)
            throw DataError("table " + a.table_id + ": duplicate type annotation for column " +
                            std::to_string(a.column_index));
    }
    for (const RelationAnnotation& a : relation_annotations) {
        auto it = pos.find(a.table_id);
        if (it == pos.end())
            throw DataError("relation annotation references unknown table " + a.table_id);
        const Table& t = tables[it->second];
        if (a.subject_index == a.object_index)
            throw DataError("table " + a.table_id + ": subject equals object");
        if (a.subject_index < 0 || a.subject_index >= t.num_columns() || a.object_index < 0 ||
            a.object_index >= t.num_columns())
            throw DataError("table " + a.table_id + ": relation column out of range");
        if (a.labels.empty()) throw DataError("table " + a.table_id + ": empty relation label set");
        if (mode == LabelMode::Multiclass && a.labels.size() != 1)
            throw DataError("table " + a.table_id +
                            ": multiclass mode requires a single relation label");
        for (int l : a.labels)
            if (l < 0 || l >= relation_labels.size())
                throw DataError("table " + a.table_id + ": relation label id out of range");
    }
}

Corpus load_corpus(const std::string& path, LabelMode mode) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            Table t;
            t.id = j.at("id").get<std::string>();
            if (j.contains("headers") && !j["headers"].is_null())
                t.headers = j["headers"].get<std::vector<std::string>>();
            for (const auto& col : j.at("columns")) {
                Column c;
                c.values = col.get<std::vector<std::string>>();
                t.columns.push_back(std::move(c));
            }
            if (j.contains("types")) {
                const auto& types = j["types"];
                if (static_cast<int>(types.size()) != t.num_columns())
                    throw DataError("types array length != column count");
                for (int ci = 0; ci < static_cast<int>(types.size()); ++ci) {
                    auto labels = types[ci].get<std::vector<std::string>>();
                    if (labels.empty()) continue;  // unannotated column
                    TypeAnnotation a;
                    a.table_id = t.id;
                    a.column_index = ci;
                    for (const auto& name : labels) a.labels.insert(corpus.type_labels.intern(name));
                    corpus.type_annotations.push_back(std::move(a));
                }
            }
            if (j.contains("relations")) {
                for (const auto& r : j["relations"]) {
                    RelationAnnotation a;
                    a.table_id = t.id;
                    a.subject_index = r.at("subj").get<int>();
                    a.object_index = r.at("obj").get<int>();
                    for (const auto& name : r.at("labels").get<std::vector<std::string>>())
                        a.labels.insert(corpus.relation_labels.intern(name));
                    corpus.relation_annotations.push_back(std::move(a));
                }
            }
            corpus.tables.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw DataError("invalid record at line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    corpus.validate(mode);
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus file: " + path);
    auto by_table_t = corpus.type_annotations_by_table();
    auto by_table_r = corpus.relation_annotations_by_table();
    for (size_t i = 0; i < corpus.tables.size(); ++i) {
        const Table& t = corpus.tables[i];
        json j;
        j["id"] = t.id;
        j["headers"] = t.headers ? json(*t.headers) : json(nullptr);
        json cols = json::array();
        for (const Column& c : t.columns) cols.push_back(c.values);
        j["columns"] = std::move(cols);
        json types = json::array();
        for (int ci = 0; ci < t.num_columns(); ++ci) types.push_back(json::array());
        for (int ai : by_table_t[i]) {
            const TypeAnnotation& a = corpus.type_annotations[ai];
            json names = json::array();
            for (int l : a.labels) names.push_back(corpus.type_labels.names[l]);
            types[a.column_index] = std::move(names);
        }
        j["types"] = std::move(types);
        json rels = json::array();
        for (int ai : by_table_r[i]) {
            const RelationAnnotation& a = corpus.relation_annotations[ai];
            json r;
            r["subj"] = a.subject_index;
            r["obj"] = a.object_index;
            json names = json::array();
            for (int l : a.labels) names.push_back(corpus.relation_labels.names[l]);
            r["labels"] = std::move(names);
            rels.push_back(std::move(r));
        }
        j["relations"] = std::move(rels);
        out << j.dump() << "\n";
    }
}

namespace {

// Sub-corpus containing the given table positions, annotations included.
// Label vocabularies are inherited whole so ids stay aligned across splits.
Corpus take_tables(const Corpus& corpus, const std::vector<int>& positions) {
    Corpus out;
    out.type_labels = corpus.type_labels;
    out.relation_labels = corpus.relation_labels;
    std::set<std::string> ids;
    for (int p : positions) {
        out.tables.push_back(corpus.tables[p]);
        ids.insert(corpus.tables[p].id);
    }
    for (const auto& a : corpus.type_annotations)
        if (ids.count(a.table_id)) out.type_annotations.push_back(a);
    for (const auto& a : corpus.relation_annotations)
        if (ids.count(a.table_id)) out.relation_annotations.push_back(a);
    return out;
}

}  // namespace

SplitResult split_corpus(const Corpus& corpus, double train_frac, double valid_frac,
                         double test_frac, uint64_t seed) {
    if (corpus.tables.empty()) throw DataError("cannot split an empty corpus");
    if (train_frac <= 0 || valid_frac < 0 || test_frac < 0)
        throw ConfigError("split fractions must be positive");
    if (std::fabs(train_frac + valid_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");

    int n = corpus.num_tables();
    int n_valid = static_cast<int>(std::floor(valid_frac * n));
    int n_test = static_cast<int>(std::floor(test_frac * n));
    int n_train = n - n_valid - n_test;  // remainder goes to train
    if (n >= 3) {
        if ((valid_frac > 0 && n_valid == 0) || (test_frac > 0 && n_test == 0) || n_train == 0)
            throw ConfigError("a split with positive fraction received zero tables");
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<int> tr(order.begin(), order.begin() + n_train);
    std::vector<int> va(order.begin() + n_train, order.begin() + n_train + n_valid);
    std::vector<int> te(order.begin() + n_train + n_valid, order.end());
    return {take_tables(corpus, tr), take_tables(corpus, va), take_tables(corpus, te)};
}

LabelVocabulary build_label_vocabulary(const Corpus& corpus, LabelKind kind) {
    LabelVocabulary vocab;
    vocab.kind = kind;
    if (kind == LabelKind::Type) {
        if (corpus.type_annotations.empty()) throw DataError("corpus has no type annotations");
        for (const auto& a : corpus.type_annotations)
            for (int l : a.labels) vocab.intern(corpus.type_labels.names[l]);
    } else {
        if (corpus.relation_annotations.empty())
            throw DataError("corpus has no relation annotations");
        for (const auto& a : corpus.relation_annotations)
            for (int l : a.labels) vocab.intern(corpus.relation_labels.names[l]);
    }
    return vocab;
}

void SyntheticSpec::validate() const {
    if (num_tables < 1) throw ConfigError("synthetic: num_tables must be positive");
    if (num_topics < 2) throw ConfigError("synthetic: need at least 2 topics");
    if (num_ambiguous_pairs < 1) throw ConfigError("synthetic: need at least 1 ambiguous pair");
    if (pool_size < 1 || topic_vocab_size < 1) throw ConfigError("synthetic: empty value pool");
    if (min_columns < 2 || max_columns < min_columns)
        throw ConfigError("synthetic: need a topic column plus at least one ambiguous column");
    if (min_rows < 1 || max_rows < min_rows) throw ConfigError("synthetic: bad row range");
}

namespace {

// Base-26 word, always alphabetic so it tokenizes as a single token.
std::string word26(int v, int width) {
    std::string s(width, 'a');
    for (int i = width - 1; i >= 0; --i) {
        s[i] = static_cast<char>('a' + v % 26);
        v /= 26;
    }
    return s;
}

}  // namespace

std::string synthetic_topic_type(int topic) { return "anchor_" + std::to_string(topic); }

std::string synthetic_ambiguous_type(int pair, int member) {
    return "amb" + std::to_string(pair) + "_m" + std::to_string(member);
}

std::string synthetic_relation_label(int topic, int pair) {
    return "rel_t" + std::to_string(topic) + "_p" + std::to_string(pair);
}

std::string synthetic_topic_word(int topic, int index) {
    return "z" + word26(topic, 2) + word26(index, 3);
}

std::string synthetic_pool_word(int pair, int index) {
    return "q" + word26(pair, 2) + word26(index, 3);
}

Corpus generate_synthetic_corpus(const SyntheticSpec& spec, uint64_t seed) {
    spec.validate();
    Corpus corpus;
    // Register every label up front in a canonical order so vocabularies are
    // identical across seeds and table counts.
    for (int k = 0; k < spec.num_topics; ++k) corpus.type_labels.intern(synthetic_topic_type(k));
    for (int a = 0; a < spec.num_ambiguous_pairs; ++a)
        for (int m = 0; m < 2; ++m) corpus.type_labels.intern(synthetic_ambiguous_type(a, m));
    for (int k = 0; k < spec.num_topics; ++k)
        for (int a = 0; a < spec.num_ambiguous_pairs; ++a)
            corpus.relation_labels.intern(synthetic_relation_label(k, a));

    Rng rng(seed);
    for (int t = 0; t < spec.num_tables; ++t) {
        int topic = rng.uniform_int(spec.num_topics);
        int n_cols = spec.min_columns + rng.uniform_int(spec.max_columns - spec.min_columns + 1);
        int n_rows = spec.min_rows + rng.uniform_int(spec.max_rows - spec.min_rows + 1);

        Table tab;
        tab.id = "syn" + std::to_string(t);
        if (spec.with_headers) {
            std::vector<std::string> headers;
            for (int c = 0; c < n_cols; ++c) headers.push_back("h" + word26(c, 2));
            tab.headers = headers;
        }

        Column topic_col;
        for (int r = 0; r < n_rows; ++r)
            topic_col.values.push_back(
                synthetic_topic_word(topic, rng.uniform_int(spec.topic_vocab_size)));
        tab.columns.push_back(std::move(topic_col));

        TypeAnnotation ta;
        ta.table_id = tab.id;
        ta.column_index = 0;
        ta.labels = {corpus.type_labels.id_of(synthetic_topic_type(topic))};
        corpus.type_annotations.push_back(std::move(ta));

        for (int c = 1; c < n_cols; ++c) {
            int pair = (c - 1) % spec.num_ambiguous_pairs;
            // The pair member is a function of the topic alone; the cell values
            // below are drawn from the shared pool independently of it.
            int member = topic % 2;
            Column col;
            for (int r = 0; r < n_rows; ++r)
                col.values.push_back(synthetic_pool_word(pair, rng.uniform_int(spec.pool_size)));
            tab.columns.push_back(std::move(col));

            TypeAnnotation a;
            a.table_id = tab.id;
            a.column_index = c;
            a.labels = {corpus.type_labels.id_of(synthetic_ambiguous_type(pair, member))};
            corpus.type_annotations.push_back(std::move(a));

            RelationAnnotation r;
            r.table_id = tab.id;
            r.subject_index = 0;
            r.object_index = c;
            r.labels = {corpus.relation_labels.id_of(synthetic_relation_label(topic, pair))};
            corpus.relation_annotations.push_back(std::move(r));
        }
        corpus.tables.push_back(std::move(tab));
    }
    return corpus;
}

Corpus generate_bigram_corpus(int num_tables, int num_pairs, int rows_per_column,
                              int columns_per_table, uint64_t seed) {
    if (num_tables < 1 || num_pairs < 1 || rows_per_column < 1 || columns_per_table < 1)
        throw ConfigError("bigram corpus: all dimensions must be positive");
    Rng rng(seed);
    Corpus corpus;
    for (int t = 0; t < num_tables; ++t) {
        Table tab;
        tab.id = "bg" + std::to_string(t);
        for (int c = 0; c < columns_per_table; ++c) {
            Column col;
            for (int r = 0; r < rows_per_column; ++r) {
                int i = rng.uniform_int(num_pairs);
                col.values.push_back("ga" + word26(i, 3) + " gb" + word26(i, 3));
            }
            tab.columns.push_back(std::move(col));
        }
        corpus.tables.push_back(std::move(tab));
    }
    return corpus;
}

}  // namespace tabanno
