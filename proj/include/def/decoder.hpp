#pragma once

#include <utility>
#include <vector>

#include "def/cells.hpp"
#include "def/encoder.hpp"
#include "def/numerics.hpp"

namespace def {

// Per-element normalization statistics for the top-layer states. Elements
// 0..H0-1 are the forward direction, H0..2H0-1 the backward direction.
struct StateNormStats {
    Vec mean;
    Vec var;
    long count = 0;

    bool valid() const { return count > 0 && !mean.empty(); }
};

struct DecoderModel {
    // one (forward, backward) weight pair per stacked layer
    std::vector<std::pair<CellWeights, CellWeights>> layers;
    Matrix out_map;  // C, (Q/2) x 2H0
    Vec out_bias;    // d, length Q/2
    StateNormStats state_norm;

    static DecoderModel init(const CodeConfig& cfg, Rng& rng);
    ParamList params();
    static DecoderModel zeros_like(const DecoderModel& m);
};

// Decoder input y_k = [x_bar(k-g0..k); q_0(k-g1..k); ...; q_{P-1}(k-gP..k)]
// with q_l(j) = p_bar_j(l); negative indices read as zero.
Vec build_decoder_input(int k, const Vec& x_bar, const std::vector<Vec>& p_bar,
                        const std::vector<int>& gammas);

std::vector<Vec> build_decoder_inputs(const CodeConfig& cfg, const Vec& x_bar,
                                      const std::vector<Vec>& p_bar);

// Adds gradients on the decoder inputs back onto the received sequences they
// were gathered from.
void scatter_decoder_input_grads(const CodeConfig& cfg, const std::vector<Vec>& input_grads,
                                 Vec& grad_x_bar, std::vector<Vec>& grad_p_bar);

StackRun decoder_run_layers(const DecoderModel& model, const CodeConfig& cfg,
                            const std::vector<Vec>& inputs);

// Output position k consumes the normalized pair (h'_k, h''_k) where the
// backward state at k has consumed inputs k..K-1; this is the paper's
// (h'_k, h''_{k-1}) pairing written in 0-based position-aligned form.
// Returns L = K*Q/2 bit probabilities; pre-sigmoid activations optionally out.
Vec decoder_output_layer(const DecoderModel& model, const std::vector<Vec>& norm_top,
                         std::vector<Vec>* pre_out = nullptr);

// Gradients of the output layer given upstream gradients on the pre-sigmoid
// activations; accumulates into `grads` and returns grads on norm_top.
std::vector<Vec> decoder_output_backward(const DecoderModel& model,
                                         const std::vector<Vec>& norm_top,
                                         const std::vector<Vec>& grad_pre, DecoderModel& grads);

// Inference-mode decode using calibrated state-normalization statistics.
Vec decode(const DecoderModel& model, const CodeConfig& cfg, const Vec& x_bar,
           const std::vector<Vec>& p_bar);

}  // namespace def
