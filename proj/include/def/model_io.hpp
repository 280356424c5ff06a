#pragma once

#include <cstdint>
#include <string>

#include "def/decoder.hpp"
#include "def/encoder.hpp"

namespace def {

// Versioned binary container: magic "DEFM", little-endian fixed-width
// integers, doubles as raw IEEE-754 bytes (bit-exact round trip).
struct ModelFile {
    static constexpr uint32_t kVersion = 1;

    CodeConfig config;
    EncoderModel encoder;
    DecoderModel decoder;
    uint64_t train_seed = 0;
    uint64_t history_digest = 0;
};

void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

// Content hash over (config, encoder, decoder); independent of the training
// metadata, stable across save/load.
uint64_t model_fingerprint(const CodeConfig& cfg, const EncoderModel& enc,
                           const DecoderModel& dec);

}  // namespace def
