#include "tabanno/serializer.hpp"

#include <algorithm>

#include "tabanno/error.hpp"

namespace tabanno {

void SerializerConfig::validate() const {
    if (max_tokens_per_column < 1) throw ConfigError("serializer: per-column budget must be >= 1");
    if (max_seq_len < max_tokens_per_column + 2)
        throw ConfigError("serializer: max_seq_len must be >= budget + 2");
}

int max_columns(const SerializerConfig& cfg) {
    return (cfg.max_seq_len - 1) / (cfg.max_tokens_per_column + 1);
}

int EncodedSequence::cls_slot_for_column(int column_index) const {
    if (scheme == SerializationScheme::ColumnPair) return 0;
    for (size_t i = 0; i < column_indices.size(); ++i)
        if (column_indices[i] == column_index) return static_cast<int>(i);
    throw DataError("column " + std::to_string(column_index) + " not present in sequence for table " +
                    table_id);
}

namespace {

// Cell tokens in row order, truncated to the budget; header tokens (metadata
// mode) come first and count against the same budget.
std::vector<int> column_tokens(const Column& column, const SerializerConfig& cfg,
                               const TokenVocabulary& vocab, const std::string& header) {
    std::vector<int> out;
    int budget = cfg.max_tokens_per_column;
    if (cfg.include_metadata && !header.empty()) {
        for (const auto& tok : tokenize_cell(header)) {
            if (static_cast<int>(out.size()) >= budget) return out;
            out.push_back(vocab.encode_token(tok));
        }
    }
    for (const auto& cell : column.values) {
        for (const auto& tok : tokenize_cell(cell)) {
            if (static_cast<int>(out.size()) >= budget) return out;
            out.push_back(vocab.encode_token(tok));
        }
    }
    return out;
}

}  // namespace

EncodedSequence serialize_single_column(const Column& column, const SerializerConfig& cfg,
                                        const TokenVocabulary& vocab, const std::string& header) {
    cfg.validate();
    if (column.values.empty()) throw DataError("cannot serialize an empty column");
    EncodedSequence seq;
    seq.scheme = SerializationScheme::SingleColumn;
    seq.ids.push_back(TokenVocabulary::kCls);
    seq.cls_positions.push_back(0);
    for (int id : column_tokens(column, cfg, vocab, header)) seq.ids.push_back(id);
    seq.column_spans.emplace_back(0, seq.length());
    seq.ids.push_back(TokenVocabulary::kSep);
    seq.column_indices = {0};
    return seq;
}

EncodedSequence serialize_column_pair(const Column& a, const Column& b,
                                      const SerializerConfig& cfg, const TokenVocabulary& vocab,
                                      const std::string& header_a, const std::string& header_b) {
    cfg.validate();
    if (a.values.empty() || b.values.empty()) throw DataError("cannot serialize an empty column");
    EncodedSequence seq;
    seq.scheme = SerializationScheme::ColumnPair;
    seq.ids.push_back(TokenVocabulary::kCls);
    seq.cls_positions.push_back(0);
    for (int id : column_tokens(a, cfg, vocab, header_a)) seq.ids.push_back(id);
    seq.column_spans.emplace_back(0, seq.length());
    seq.ids.push_back(TokenVocabulary::kSep);
    int b_start = seq.length();
    for (int id : column_tokens(b, cfg, vocab, header_b)) seq.ids.push_back(id);
    seq.column_spans.emplace_back(b_start, seq.length());
    seq.ids.push_back(TokenVocabulary::kSep);
    seq.column_indices = {0, 1};
    return seq;
}

EncodedSequence serialize_table(const Table& table, const SerializerConfig& cfg,
                                const TokenVocabulary& vocab) {
    cfg.validate();
    if (table.columns.empty()) throw DataError("cannot serialize an empty table");
    int cap = max_columns(cfg);
    if (table.num_columns() > cap)
        throw DataError("table " + table.id + " has " + std::to_string(table.num_columns()) +
                        " columns; at most " + std::to_string(cap) +
                        " fit this budget (max_columns=" + std::to_string(cap) + ")");
    EncodedSequence seq;
    seq.scheme = SerializationScheme::Table;
    seq.table_id = table.id;
    for (int c = 0; c < table.num_columns(); ++c) {
        int start = seq.length();
        seq.cls_positions.push_back(start);
        seq.ids.push_back(TokenVocabulary::kCls);
        std::string header = table.headers ? (*table.headers)[c] : "";
        for (int id : column_tokens(table.columns[c], cfg, vocab, header)) seq.ids.push_back(id);
        seq.column_spans.emplace_back(start, seq.length());
        seq.column_indices.push_back(c);
    }
    seq.ids.push_back(TokenVocabulary::kSep);
    return seq;
}

std::string render_tokens(const EncodedSequence& seq, const TokenVocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < seq.ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.decode_token(seq.ids[i]);
    }
    return out;
}

void check_sequence_invariants(const EncodedSequence& seq, const SerializerConfig& cfg) {
    if (seq.length() > cfg.max_seq_len) throw DataError("sequence exceeds max_seq_len");
    if (seq.ids.empty() || seq.ids.back() != TokenVocabulary::kSep)
        throw DataError("sequence must end with [SEP]");
    size_t cp = 0;
    for (int i = 0; i < seq.length(); ++i) {
        bool is_cls = seq.ids[i] == TokenVocabulary::kCls;
        bool listed = cp < seq.cls_positions.size() && seq.cls_positions[cp] == i;
        if (is_cls != listed) throw DataError("cls_positions disagree with [CLS] ids");
        if (listed) ++cp;
    }
    if (cp != seq.cls_positions.size()) throw DataError("cls_positions disagree with [CLS] ids");
    if (seq.column_spans.size() != seq.column_indices.size())
        throw DataError("span/column bookkeeping mismatch");
    if (seq.scheme != SerializationScheme::ColumnPair &&
        seq.cls_positions.size() != seq.column_spans.size())
        throw DataError("one [CLS] per serialized column expected");
    int prev_end = -1;
    for (size_t s = 0; s < seq.column_spans.size(); ++s) {
        auto [lo, hi] = seq.column_spans[s];
        if (lo >= hi || lo <= prev_end) throw DataError("spans must be ordered and disjoint");
        if (seq.scheme != SerializationScheme::ColumnPair || s == 0) {
            if (seq.ids[lo] != TokenVocabulary::kCls &&
                seq.scheme != SerializationScheme::ColumnPair)
                throw DataError("span must begin at its [CLS]");
        }
        int budget_used = hi - lo - (seq.ids[lo] == TokenVocabulary::kCls ? 1 : 0);
        if (budget_used > cfg.max_tokens_per_column) throw DataError("span exceeds column budget");
        prev_end = hi - 1;
    }
}

}  // namespace tabanno
