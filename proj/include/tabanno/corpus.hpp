#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace tabanno {

struct Column {
    std::vector<std::string> values;
};

struct Table {
    std::string id;
    std::vector<Column> columns;
    std::optional<std::vector<std::string>> headers;  // one per column when present

    int num_columns() const { return static_cast<int>(columns.size()); }
};

struct TypeAnnotation {
    std::string table_id;
    int column_index = 0;
    std::set<int> labels;  // ids into the type vocabulary
};

struct RelationAnnotation {
    std::string table_id;
    int subject_index = 0;
    int object_index = 0;
    std::set<int> labels;  // ids into the relation vocabulary
};

enum class LabelKind { Type, Relation };

struct LabelVocabulary {
    LabelKind kind = LabelKind::Type;
    std::vector<std::string> names;  // id -> name, order of first appearance
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(names.size()); }
    bool empty() const { return names.empty(); }
    // Returns the id, registering the name if unseen.
    int intern(const std::string& name);
    int id_of(const std::string& name) const;  // throws DataError if unknown
};

enum class LabelMode { Multiclass, Multilabel };

struct Corpus {
    std::vector<Table> tables;
    std::vector<TypeAnnotation> type_annotations;
    std::vector<RelationAnnotation> relation_annotations;
    LabelVocabulary type_labels{LabelKind::Type};
    LabelVocabulary relation_labels{LabelKind::Relation};

    int num_tables() const { return static_cast<int>(tables.size()); }
    int table_index(const std::string& id) const;  // -1 if absent
    const Table& table_by_id(const std::string& id) const;

    // Annotation indices grouped by table position, in annotation file order.
    std::vector<std::vector<int>> type_annotations_by_table() const;
    std::vector<std::vector<int>> relation_annotations_by_table() const;

    void validate(LabelMode mode) const;  // throws DataError on violations
};

Corpus load_corpus(const std::string& path, LabelMode mode);
void save_corpus(const Corpus& corpus, const std::string& path);

struct SplitResult {
    Corpus train, valid, test;
};

SplitResult split_corpus(const Corpus& corpus, double train_frac, double valid_frac,
                         double test_frac, uint64_t seed);

LabelVocabulary build_label_vocabulary(const Corpus& corpus, LabelKind kind);

// Synthetic tables whose ambiguous columns are Bayes-undecidable from their
// own values: both members of an ambiguous type pair draw cells from one
// shared pool, and only the topic column (column 0) resolves the pair member.
struct SyntheticSpec {
    int num_tables = 1000;
    int min_columns = 2;  // column 0 is the topic column
    int max_columns = 3;
    int min_rows = 2;
    int max_rows = 4;
    int num_topics = 2;
    int num_ambiguous_pairs = 1;
    int topic_vocab_size = 40;  // disjoint per topic
    int pool_size = 40;         // shared per ambiguous pair
    bool with_headers = true;

    void validate() const;  // throws ConfigError
};

Corpus generate_synthetic_corpus(const SyntheticSpec& spec, uint64_t seed);

// Names used by the synthetic generator; exposed so tests and analyses can
// identify topic/ambiguous columns from gold labels.
std::string synthetic_topic_type(int topic);
std::string synthetic_ambiguous_type(int pair, int member);
std::string synthetic_relation_label(int topic, int pair);
std::string synthetic_topic_word(int topic, int index);
std::string synthetic_pool_word(int pair, int index);

// Unlabeled corpus of two-token cells "a_i b_i" with a_i <-> b_i bijective,
// so each masked token is exactly determined by its partner.
Corpus generate_bigram_corpus(int num_tables, int num_pairs, int rows_per_column,
                              int columns_per_table, uint64_t seed);

}  // namespace tabanno
