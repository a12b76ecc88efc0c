#pragma once

#include <string>

#include "tabanno/annotator.hpp"
#include "tabanno/serializer.hpp"
#include "tabanno/trainer.hpp"

namespace tabanno {

// Everything needed to reload and run a trained model: encoder config and
// tensors, heads, label modes, vocabularies, and the serializer settings it
// was trained with.
struct ModelBundle {
    AnnotationModel model;
    TokenVocabulary vocab;
    LabelVocabulary type_labels{LabelKind::Type};
    LabelVocabulary relation_labels{LabelKind::Relation};
    SerializerConfig serializer;
    SerializationMode serialization = SerializationMode::TableWise;
    std::string rng_state;  // informational
};

void save_checkpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

// Same tensor payload as an encoder-only checkpoint (pretraining output).
void save_encoder_checkpoint(const EncoderParams& params, const TokenVocabulary& vocab,
                             const SerializerConfig& serializer, const std::string& path);
struct EncoderBundle {
    EncoderParams params;
    TokenVocabulary vocab;
    SerializerConfig serializer;
};
EncoderBundle load_encoder_checkpoint(const std::string& path);

}  // namespace tabanno
