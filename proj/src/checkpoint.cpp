#include "tabanno/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "tabanno/error.hpp"

namespace tabanno {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json matrix_to_json(const Matrix& m) {
    json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["data"] = m.data;
    return j;
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.size()) throw DataError("checkpoint: tensor size mismatch");
    m.data = std::move(data);
    return m;
}

json encoder_to_json(const EncoderParams& params) {
    json j;
    json cfg;
    cfg["num_layers"] = params.config.num_layers;
    cfg["num_heads"] = params.config.num_heads;
    cfg["d_model"] = params.config.d_model;
    cfg["d_ff"] = params.config.d_ff;
    cfg["max_seq_len"] = params.config.max_seq_len;
    cfg["vocab_size"] = params.config.vocab_size;
    cfg["dropout_rate"] = params.config.dropout_rate;
    cfg["seed"] = params.config.seed;
    j["config"] = std::move(cfg);
    json tensors;
    for_each_tensor(const_cast<EncoderTensors&>(params.tensors),
                    [&](const std::string& name, TensorKind, Matrix& m) {
                        tensors[name] = matrix_to_json(m);
                    });
    j["tensors"] = std::move(tensors);
    return j;
}

EncoderParams encoder_from_json(const json& j) {
    const json& cfg = j.at("config");
    EncoderConfig c;
    c.num_layers = cfg.at("num_layers").get<int>();
    c.num_heads = cfg.at("num_heads").get<int>();
    c.d_model = cfg.at("d_model").get<int>();
    c.d_ff = cfg.at("d_ff").get<int>();
    c.max_seq_len = cfg.at("max_seq_len").get<int>();
    c.vocab_size = cfg.at("vocab_size").get<int>();
    c.dropout_rate = cfg.at("dropout_rate").get<double>();
    c.seed = cfg.at("seed").get<uint64_t>();
    EncoderParams params;
    params.config = c;
    params.tensors = EncoderTensors::zeros(c);
    const json& tensors = j.at("tensors");
    for_each_tensor(params.tensors, [&](const std::string& name, TensorKind, Matrix& m) {
        Matrix loaded = matrix_from_json(tensors.at(name));
        if (!loaded.same_shape(m)) throw DataError("checkpoint: shape mismatch for " + name);
        m = std::move(loaded);
    });
    return params;
}

json vocab_to_json(const TokenVocabulary& v) { return json(v.id_to_token); }

TokenVocabulary vocab_from_json(const json& j) {
    TokenVocabulary v;
    for (const auto& tok : j.get<std::vector<std::string>>()) {
        v.token_to_id.emplace(tok, v.size());
        v.id_to_token.push_back(tok);
    }
    return v;
}

json labels_to_json(const LabelVocabulary& v) { return json(v.names); }

LabelVocabulary labels_from_json(const json& j, LabelKind kind) {
    LabelVocabulary v;
    v.kind = kind;
    for (const auto& name : j.get<std::vector<std::string>>()) v.intern(name);
    return v;
}

json serializer_to_json(const SerializerConfig& s) {
    json j;
    j["max_tokens_per_column"] = s.max_tokens_per_column;
    j["max_seq_len"] = s.max_seq_len;
    j["include_metadata"] = s.include_metadata;
    return j;
}

SerializerConfig serializer_from_json(const json& j) {
    SerializerConfig s;
    s.max_tokens_per_column = j.at("max_tokens_per_column").get<int>();
    s.max_seq_len = j.at("max_seq_len").get<int>();
    s.include_metadata = j.at("include_metadata").get<bool>();
    return s;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint parse error in " + path + ": " + e.what());
    }
    return j;
}

void require_version(const json& j, const std::string& path) {
    if (!j.contains("version")) throw DataError("checkpoint missing version field: " + path);
    if (j["version"].get<int>() != kCheckpointVersion)
        throw DataError("unsupported checkpoint version in " + path);
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
    json j;
    j["version"] = kCheckpointVersion;
    j["kind"] = "annotation_model";
    j["encoder"] = encoder_to_json(bundle.model.encoder);
    j["type_head"] = {{"w", matrix_to_json(bundle.model.type_head.w)},
                      {"b", matrix_to_json(bundle.model.type_head.b)}};
    j["relation_head"] = {{"w", matrix_to_json(bundle.model.relation_head.w)},
                          {"b", matrix_to_json(bundle.model.relation_head.b)}};
    j["type_mode"] = bundle.model.type_mode == LabelMode::Multiclass ? "multiclass" : "multilabel";
    j["relation_mode"] =
        bundle.model.relation_mode == LabelMode::Multiclass ? "multiclass" : "multilabel";
    j["token_vocab"] = vocab_to_json(bundle.vocab);
    j["type_labels"] = labels_to_json(bundle.type_labels);
    j["relation_labels"] = labels_to_json(bundle.relation_labels);
    j["serializer"] = serializer_to_json(bundle.serializer);
    j["serialization"] =
        bundle.serialization == SerializationMode::TableWise ? "table" : "single-column";
    j["rng_state"] = bundle.rng_state;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

ModelBundle load_checkpoint(const std::string& path) {
    json j = load_json_file(path);
    require_version(j, path);
    if (j.value("kind", "") != "annotation_model")
        throw DataError("not an annotation model checkpoint: " + path);
    ModelBundle b;
    b.model.encoder = encoder_from_json(j.at("encoder"));
    b.model.type_head.w = matrix_from_json(j.at("type_head").at("w"));
    b.model.type_head.b = matrix_from_json(j.at("type_head").at("b"));
    b.model.relation_head.w = matrix_from_json(j.at("relation_head").at("w"));
    b.model.relation_head.b = matrix_from_json(j.at("relation_head").at("b"));
    b.model.type_mode =
        j.at("type_mode").get<std::string>() == "multiclass" ? LabelMode::Multiclass
                                                             : LabelMode::Multilabel;
    b.model.relation_mode =
        j.at("relation_mode").get<std::string>() == "multiclass" ? LabelMode::Multiclass
                                                                 : LabelMode::Multilabel;
    b.vocab = vocab_from_json(j.at("token_vocab"));
    b.type_labels = labels_from_json(j.at("type_labels"), LabelKind::Type);
    b.relation_labels = labels_from_json(j.at("relation_labels"), LabelKind::Relation);
    b.serializer = serializer_from_json(j.at("serializer"));
    b.serialization = j.at("serialization").get<std::string>() == "table"
                          ? SerializationMode::TableWise
                          : SerializationMode::SingleColumn;
    b.rng_state = j.value("rng_state", "");
    return b;
}

void save_encoder_checkpoint(const EncoderParams& params, const TokenVocabulary& vocab,
                             const SerializerConfig& serializer, const std::string& path) {
    json j;
    j["version"] = kCheckpointVersion;
    j["kind"] = "encoder";
    j["encoder"] = encoder_to_json(params);
    j["token_vocab"] = vocab_to_json(vocab);
    j["serializer"] = serializer_to_json(serializer);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

EncoderBundle load_encoder_checkpoint(const std::string& path) {
    json j = load_json_file(path);
    require_version(j, path);
    if (j.value("kind", "") != "encoder") throw DataError("not an encoder checkpoint: " + path);
    EncoderBundle b;
    b.params = encoder_from_json(j.at("encoder"));
    b.vocab = vocab_from_json(j.at("token_vocab"));
    b.serializer = serializer_from_json(j.at("serializer"));
    return b;
}

}  // namespace tabanno
