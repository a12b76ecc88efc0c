#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tabanno/corpus.hpp"
#include "tabanno/tokenizer.hpp"

namespace tabanno {

enum class SerializationScheme { SingleColumn, ColumnPair, Table };

// Token ids plus the bookkeeping the encoder and heads rely on: where the
// [CLS] markers sit and which token range belongs to which column.
struct EncodedSequence {
    std::vector<int> ids;
    std::vector<int> cls_positions;                  // one per [CLS], ascending
    std::vector<std::pair<int, int>> column_spans;   // half-open, one per column
    std::string table_id;
    std::vector<int> column_indices;                 // source columns, in order
    SerializationScheme scheme = SerializationScheme::Table;

    int length() const { return static_cast<int>(ids.size()); }
    // Index into cls_positions for a source column; for pair sequences both
    // columns share the single [CLS] at position 0.
    int cls_slot_for_column(int column_index) const;
};

struct SerializerConfig {
    int max_tokens_per_column = 32;  // value-token budget per column
    int max_seq_len = 512;
    bool include_metadata = false;   // prepend header tokens inside the budget

    void validate() const;
};

int max_columns(const SerializerConfig& cfg);

EncodedSequence serialize_single_column(const Column& column, const SerializerConfig& cfg,
                                        const TokenVocabulary& vocab,
                                        const std::string& header = "");

EncodedSequence serialize_column_pair(const Column& a, const Column& b,
                                      const SerializerConfig& cfg, const TokenVocabulary& vocab,
                                      const std::string& header_a = "",
                                      const std::string& header_b = "");

EncodedSequence serialize_table(const Table& table, const SerializerConfig& cfg,
                                const TokenVocabulary& vocab);

// Token-string rendering (the --dump-serialized debug view).
std::string render_tokens(const EncodedSequence& seq, const TokenVocabulary& vocab);

// Structural checks for tests and debug builds; throws DataError.
void check_sequence_invariants(const EncodedSequence& seq, const SerializerConfig& cfg);

}  // namespace tabanno
