#include "tabanno/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "tabanno/error.hpp"

namespace tabanno {

namespace {

const char* kReserved[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};

// Decodes one UTF-8 codepoint starting at `i`; advances `i`. Malformed bytes
// are passed through as single-byte codepoints.
uint32_t next_codepoint(const std::string& s, size_t& i) {
    unsigned char c = s[i];
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra = 0;
    uint32_t cp = 0;
    if ((c >> 5) == 0x6) {
        cp = c & 0x1f;
        extra = 1;
    } else if ((c >> 4) == 0xe) {
        cp = c & 0x0f;
        extra = 2;
    } else if ((c >> 3) == 0x1e) {
        cp = c & 0x07;
        extra = 3;
    } else {
        ++i;
        return c;
    }
    size_t j = i + 1;
    for (int k = 0; k < extra; ++k, ++j) {
        if (j >= s.size() || (static_cast<unsigned char>(s[j]) >> 6) != 0x2) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (static_cast<unsigned char>(s[j]) & 0x3f);
    }
    i = j;
    return cp;
}

void append_codepoint(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

bool is_space_cp(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
        case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

bool is_digit_cp(uint32_t cp) { return cp >= '0' && cp <= '9'; }

// ASCII punctuation splits off; codepoints >= 0x80 that are not whitespace
// count as word characters (no multilingual classification beyond that).
bool is_punct_cp(uint32_t cp) {
    return cp < 0x80 && std::ispunct(static_cast<int>(cp));
}

uint32_t lower_cp(uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    return cp;
}

}  // namespace

std::vector<std::string> tokenize_cell(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    bool current_is_digit = false;
    auto flush = [&]() {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    size_t i = 0;
    while (i < text.size()) {
        uint32_t cp = lower_cp(next_codepoint(text, i));
        if (is_space_cp(cp)) {
            flush();
        } else if (is_punct_cp(cp)) {
            flush();
            std::string p;
            append_codepoint(p, cp);
            tokens.push_back(p);
        } else if (is_digit_cp(cp)) {
            if (!current.empty() && !current_is_digit) flush();
            current_is_digit = true;
            append_codepoint(current, cp);
        } else {
            if (!current.empty() && current_is_digit) flush();
            current_is_digit = false;
            append_codepoint(current, cp);
        }
    }
    flush();
    return tokens;
}

TokenVocabulary TokenVocabulary::with_reserved() {
    TokenVocabulary v;
    for (const char* t : kReserved) {
        v.token_to_id.emplace(t, static_cast<int>(v.id_to_token.size()));
        v.id_to_token.emplace_back(t);
    }
    return v;
}

int TokenVocabulary::encode_token(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& TokenVocabulary::decode_token(int id) const {
    if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
    return id_to_token[id];
}

void TokenVocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    for (const auto& t : id_to_token) out << t << "\n";
}

TokenVocabulary TokenVocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    TokenVocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        v.token_to_id.emplace(line, static_cast<int>(v.id_to_token.size()));
        v.id_to_token.push_back(line);
    }
    for (int i = 0; i < kNumReserved; ++i)
        if (i >= v.size() || v.id_to_token[i] != kReserved[i])
            throw DataError("vocabulary file missing reserved tokens: " + path);
    return v;
}

TokenVocabulary build_token_vocabulary(const Corpus& corpus, int max_size, int min_freq) {
    if (max_size <= TokenVocabulary::kNumReserved)
        throw ConfigError("vocabulary max_size must exceed the reserved token count");
    if (corpus.tables.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

    // Header tokens are counted too: metadata-mode serialization emits them.
    std::unordered_map<std::string, long> freq;
    for (const Table& t : corpus.tables) {
        for (const Column& c : t.columns)
            for (const std::string& cell : c.values)
                for (auto& tok : tokenize_cell(cell)) ++freq[tok];
        if (t.headers)
            for (const std::string& h : *t.headers)
                for (auto& tok : tokenize_cell(h)) ++freq[tok];
    }

    std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    TokenVocabulary vocab = TokenVocabulary::with_reserved();
    for (const auto& [tok, count] : items) {
        if (vocab.size() >= max_size) break;
        if (count < min_freq) break;
        vocab.token_to_id.emplace(tok, vocab.size());
        vocab.id_to_token.push_back(tok);
    }
    return vocab;
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const TokenVocabulary& vocab) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.encode_token(t));
    return ids;
}

}  // namespace tabanno
