#pragma once

#include <string>

#include "def/channel.hpp"
#include "def/encoder.hpp"
#include "def/training.hpp"

namespace def {

struct RunConfig {
    CodeConfig code;
    TrainConfig train;
    ChannelParams channel;
};

// Flat key=value files; '#' starts a comment, blank lines ignored. Keys mirror
// the struct field names (e.g. l_info, deltas, lr_initial, feedback_snr_db).
// feedback_snr_db accepts the word "noiseless". Unknown keys are an error.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies a single key=value assignment (shared with CLI overrides).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace def
