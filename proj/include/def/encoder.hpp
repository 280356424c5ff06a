#pragma once

#include <string>
#include <vector>

#include "def/cells.hpp"
#include "def/channel.hpp"
#include "def/modulation.hpp"
#include "def/numerics.hpp"

namespace def {

// Structural hyperparameters of one code instance.
struct CodeConfig {
    int l_info = 49;
    int pad_bits = 1;
    int q = 2;  // modulation order, bits per complex symbol
    int p = 2;  // parity symbols per systematic symbol
    int h0 = 50;
    std::vector<int> deltas{1, 2, 2};  // encoder input extensions, size P+1
    std::vector<int> gammas{1, 1, 1};  // decoder input extensions, size P+1
    CellKind encoder_cell = CellKind::Rnn;
    CellKind decoder_cell = CellKind::Gru;
    int decoder_layers = 2;
    // parity normalization statistics per (position, stream) instead of
    // pooled per stream
    bool per_position_norm = false;

    int message_length() const { return l_info + pad_bits; }   // L
    int symbols() const { return 2 * message_length() / q; }   // K
    int encoder_input_size() const;                            // I
    int decoder_input_size() const;                            // len(y_k)
    int parity_norm_channels() const;
    double code_rate() const;            // L / (K (1+P))
    double spectral_efficiency() const;  // Q / (1+P)
    void validate() const;
};

// Per-parity-stream normalization statistics gathered by calibration.
struct CalibStats {
    Vec mean;
    Vec var;
    long count = 0;
    bool variance_guard_hit = false;

    bool valid() const { return count > 0 && !mean.empty(); }
};

struct EncoderModel {
    CellWeights cell;
    Matrix out_map;  // A, P x H0
    Vec out_bias;    // c, length P
    Vec w_levels;    // codeword power levels, length P+1
    Vec a_levels;    // symbol power levels, length K
    CalibStats calib;

    static EncoderModel init(const CodeConfig& cfg, Rng& rng);
    ParamList params();
    // Zero-valued clone of the trainable blocks, used as a gradient holder.
    static EncoderModel zeros_like(const EncoderModel& m);

    // Rescale w and a back onto sum(w^2) = P+1, sum(a^2) = K.
    void project_power_levels();
    double w_constraint_error() const;  // |sum w^2 - (P+1)|
    double a_constraint_error() const;  // |sum a^2 - K|
};

// Appends pad_bits zeros to the info bits.
Bits pad_message(const Bits& info, int pad_bits);

// PSG input i_k = [x(k); n0(k-d0..k); r_0(k-d1..k-1); ...; r_{P-1}(k-dP..k-1)],
// negative indices read as zero. `v_est[j]` holds the length-P noise-estimate
// vector of iteration j; only entries with j < k are read.
Vec build_psg_input(int k, const Vec& x, const Vec& n0_est, const std::vector<Vec>& v_est,
                    const std::vector<int>& deltas);

// One PSG iteration: state update plus raw (pre-normalization) parity A h + c.
std::pair<CellState, Vec> psg_step(const EncoderModel& model, const Vec& input,
                                   const CellState& state, CellCache* cache = nullptr);

// Whole-codeword PSG pass over pre-determined noise estimates (the estimates
// are exogenous, so iterating over a full buffer is equivalent to the
// interactive loop). Used by training and calibration.
struct PsgRun {
    SequenceRun seq;       // seq.states[k] = h_k
    std::vector<Vec> raw;  // e(h_k), one length-P entry per position
};
// The sequence length is taken from x (normally K; training may use longer
// messages).
PsgRun psg_run(const EncoderModel& model, const CodeConfig& cfg, const Vec& x, const Vec& n0_est,
               const std::vector<Vec>& v_est);

int parity_norm_channel(const CodeConfig& cfg, int k, int l);

// Inference-mode normalization of one raw parity value using CalibStats.
double normalize_parity_calibrated(const CalibStats& calib, const CodeConfig& cfg, int k, int l,
                                   double raw);

// z per the codeword symbol layout: systematic block first, then parity
// symbols interleaved as l = (j-K) mod P, k = floor((j-K)/P).
Vec assemble_codeword(const Vec& x, const std::vector<Vec>& parities, const Vec& w_levels,
                      const Vec& a_levels);

// Full interactive episode at inference: modulate, transmit phase 1, then per
// iteration build the PSG input from feedback-derived noise estimates,
// normalize via CalibStats, scale, transmit, and record the echo.
Transcript encode_interactive(const EncoderModel& model, const CodeConfig& cfg, const Bits& message,
                              const ChannelParams& channel, Rng& rng);

// Monte-Carlo estimate of the per-stream mean/variance of the raw PSG
// outputs. Warns (via the returned flag) when any stream hits the variance
// guard. n_codewords < 1000 is accepted but reported in the stats count.
CalibStats calibrate_encoder(const EncoderModel& model, const CodeConfig& cfg,
                             const ChannelParams& channel, long n_codewords, Rng& rng);

}  // namespace def
