#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "def/channel.hpp"
#include "def/decoder.hpp"
#include "def/encoder.hpp"
#include "def/numerics.hpp"

namespace def {

struct TrainConfig {
    int epochs = 2000;
    int batches_per_epoch = 10;
    int batch_size = 2000;
    double train_snr_db = 0.0;
    double lr_initial = 0.02;
    double lr_drop_factor = 10.0;
    int lr_drop_after_batches = 1000;
    double clip_norm = 1.0;
    bool clip_elementwise = false;
    double rollback_factor = 10.0;
    int w_train_start_epoch = 100;
    int a_train_start_epoch = 200;
    std::vector<uint64_t> seeds{1, 2, 3};
    long calib_codewords = 100000;
    long selection_codewords = 100000;
    int message_multiplier = 1;  // train with message_multiplier * L_info info bits
    int workers = 1;
    AdamConfig adam;

    long total_batches() const { return static_cast<long>(epochs) * batches_per_epoch; }
    void validate() const;
};

// Mean over all bits of -[b ln p + (1-b) ln(1-p)], probs clamped to
// [1e-12, 1-1e-12].
double bce_loss(const Vec& probs, const Bits& bits);

// lr_initial until lr_drop_after_batches, then divided by lr_drop_factor.
double lr_at(long batch_index, const TrainConfig& cfg);

// discard iff new_loss >= factor * prev_loss (boundary inclusive)
bool rollback_discard(double prev_loss, double new_loss, double factor = 10.0);

// One batch's messages and frozen channel noise realizations. Noise is
// exogenous, so a whole batch can be pre-sampled; gradients treat these
// buffers as constants.
struct BatchData {
    std::vector<Bits> messages;          // padded, length L each
    std::vector<Vec> n0, g0;             // [cw], length K
    std::vector<std::vector<Vec>> v, g;  // [cw][k], length P

    size_t size() const { return messages.size(); }
};

BatchData sample_batch(const CodeConfig& cfg, const ChannelParams& channel, int batch_size,
                       Rng& rng);

// Full differentiable episode for one batch: encoder with batch-mode parity
// normalization, channel, decoder with batch-mode state normalization, BCE.
// Deterministic for a given BatchData regardless of `workers`.
double batch_loss(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                  const BatchData& data, int workers = 1, std::vector<Vec>* probs_out = nullptr);

// Same forward pass plus analytic gradients of the batch BCE w.r.t. every
// encoder and decoder parameter, accumulated into the zero-initialized
// gradient holders.
double batch_loss_and_grads(const EncoderModel& enc, const DecoderModel& dec,
                            const CodeConfig& cfg, const BatchData& data, EncoderModel& enc_grads,
                            DecoderModel& dec_grads, int workers = 1,
                            std::vector<Vec>* probs_out = nullptr);

struct TrainHistory {
    std::vector<double> losses;  // computed loss of every batch, rolled back or not
    std::vector<long> rollbacks;
    std::vector<std::pair<long, double>> lr_changes;  // (batch index, new lr)
    uint64_t digest() const;
};

struct BatchResult {
    double loss = 0.0;
    bool rolled_back = false;
    double grad_norm = 0.0;
    double lr = 0.0;
};

// Joint encoder/decoder training loop state for one seed.
class Trainer {
  public:
    Trainer(EncoderModel enc, DecoderModel dec, CodeConfig code_cfg, TrainConfig train_cfg,
            ChannelParams channel);

    BatchResult train_one_batch(Rng& rng);

    const EncoderModel& encoder() const { return enc_; }
    const DecoderModel& decoder() const { return dec_; }
    const EncoderModel& best_encoder() const { return best_enc_; }
    const DecoderModel& best_decoder() const { return best_dec_; }
    double best_loss() const { return best_loss_; }
    const TrainHistory& history() const { return history_; }
    long batch_index() const { return batch_index_; }
    const AdamState& adam_state() const { return adam_; }

  private:
    EncoderModel enc_;
    DecoderModel dec_;
    CodeConfig code_cfg_;
    TrainConfig train_cfg_;
    ChannelParams channel_;
    AdamState adam_;
    TrainHistory history_;
    long batch_index_ = 0;
    std::optional<double> prev_loss_;
    // weights/optimizer state that produced prev_loss_, restored on roll-back
    EncoderModel saved_enc_;
    DecoderModel saved_dec_;
    AdamState saved_adam_;
    bool have_snapshot_ = false;
    EncoderModel best_enc_;
    DecoderModel best_dec_;
    double best_loss_ = 0.0;
    bool have_best_ = false;
};

struct SnapshotEval {
    uint64_t seed = 0;
    std::string kind;  // "final" or "best"
    double selection_bler = 0.0;
    double selection_ber = 0.0;
};

struct TrainOutcome {
    EncoderModel encoder;  // winning snapshot, calibrated
    DecoderModel decoder;
    uint64_t winning_seed = 0;
    std::string winning_kind;
    std::vector<std::pair<uint64_t, TrainHistory>> histories;
    std::vector<SnapshotEval> snapshot_evals;
};

// Full multi-seed procedure: train per seed, snapshot final and best-loss
// weights, calibrate every snapshot, select the snapshot with the lowest
// link-level BLER. Structured per-batch log lines go to `log` when non-null.
TrainOutcome train_full(const TrainConfig& train_cfg, const CodeConfig& code_cfg,
                        const ChannelParams& channel, std::ostream* log = nullptr);

}  // namespace def
