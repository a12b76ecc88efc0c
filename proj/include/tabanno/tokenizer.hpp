#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tabanno/corpus.hpp"

namespace tabanno {

// Word-level vocabulary with a fixed reserved-id layout. [PAD]=0 keeps
// padding masks testable bit-exactly.
struct TokenVocabulary {
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kSep = 2;
    static constexpr int kMask = 3;
    static constexpr int kUnk = 4;
    static constexpr int kNumReserved = 5;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int encode_token(const std::string& token) const;
    const std::string& decode_token(int id) const;

    static TokenVocabulary with_reserved();
    void save(const std::string& path) const;
    static TokenVocabulary load(const std::string& path);
};

// Lowercase, split on Unicode whitespace, punctuation characters become
// standalone tokens, digit runs stay whole. Total and deterministic.
std::vector<std::string> tokenize_cell(const std::string& text);

TokenVocabulary build_token_vocabulary(const Corpus& corpus, int max_size, int min_freq);

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const TokenVocabulary& vocab);

}  // namespace tabanno
