#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "def/numerics.hpp"

namespace def {

enum class CellKind { Rnn, Gru, Lstm };

const char* cell_kind_name(CellKind kind);
CellKind cell_kind_from_name(const std::string& name);

// Weight bundle for one recurrent cell.
//   RNN:  w_state={W},          w_input={Y},          bias={b}
//   GRU:  w_state={W_f,W_z,W_r} w_input={Y_f,Y_z,Y_r} bias={b_h,b_i,b_z,b_r}
//   LSTM: w_state={W_1..W_4}    w_input={Y_1..Y_4}    bias={b_1..b_4}
struct CellWeights {
    CellKind kind = CellKind::Rnn;
    int state_size = 0;
    int input_size = 0;
    std::vector<Matrix> w_state;
    std::vector<Matrix> w_input;
    std::vector<Vec> bias;

    static CellWeights zeros(CellKind kind, int state_size, int input_size);
    // Matrices ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases start at zero.
    static CellWeights random_init(CellKind kind, int state_size, int input_size, Rng& rng);

    void append_params(const std::string& prefix, ParamList& out);
};

struct CellState {
    Vec h;
    Vec s;  // LSTM cell state; empty for RNN/GRU

    static CellState zero(CellKind kind, int state_size);
};

// Intermediates saved by cell_forward for the analytic backward pass.
struct CellCache {
    Vec input;
    Vec h_prev;
    Vec s_prev;
    Vec h;
    Vec s;
    // GRU: act = {f0, z, r}, pre = W_f h_prev + b_h
    // LSTM: act = {f1, f2, f3, f4}, pre = tanh(s)
    std::array<Vec, 4> act;
    Vec pre;
};

CellState cell_forward(const CellWeights& w, const Vec& input, const CellState& prev,
                       CellCache* cache = nullptr);

// Analytic gradients of cell_forward. `grad_h` (and `grad_s` for LSTM) are
// the upstream gradients on the new state; weight gradients accumulate into
// `grads` and input/previous-state gradients accumulate into the out args.
void cell_backward(const CellWeights& w, const CellCache& cache, const Vec& grad_h,
                   const Vec& grad_s, CellWeights& grads, Vec& grad_input, Vec& grad_h_prev,
                   Vec& grad_s_prev);

// One direction over a whole input sequence, all intermediate states kept.
struct SequenceRun {
    std::vector<CellCache> caches;
    std::vector<Vec> states;  // h after consuming inputs[0..k]
};

SequenceRun run_sequence(const CellWeights& w, const std::vector<Vec>& inputs);

// BPTT over run_sequence. `out_grads[k]` is the upstream gradient on
// states[k] (an empty Vec means zero). Returns per-position input gradients;
// weight gradients accumulate into `grads`.
std::vector<Vec> sequence_backward(const CellWeights& w, const SequenceRun& run,
                                   const std::vector<Vec>& out_grads, CellWeights& grads);

// Bidirectional pass: fwd.states[k] has consumed inputs 0..k left-to-right,
// bwd.states[k] has consumed inputs k..K-1 right-to-left. Both directions
// start from the all-zero state.
struct BidirRun {
    SequenceRun fwd;
    SequenceRun bwd;
};

BidirRun bidirectional_forward(const CellWeights& fw, const CellWeights& bw,
                               const std::vector<Vec>& inputs);

std::vector<Vec> bidir_backward_direction(const CellWeights& w, const SequenceRun& run,
                                          const std::vector<Vec>& out_grads, CellWeights& grads,
                                          bool reversed);

// Stacked bidirectional layers; layer l consumes the position-aligned
// concatenation (h'_k, h''_k) of layer l-1.
struct StackRun {
    std::vector<BidirRun> layers;
    std::vector<std::vector<Vec>> layer_inputs;  // inputs actually fed to each layer
};

StackRun stack_forward(const std::vector<std::pair<CellWeights, CellWeights>>& layers,
                       const std::vector<Vec>& inputs);

// Concatenated (fwd, bwd) output of the top layer at each position.
std::vector<Vec> stack_outputs(const StackRun& run);

// BPTT down the whole stack. `top_grads[k]` is the upstream gradient on the
// top layer's concatenated output at position k. Returns gradients on the
// stack's original inputs; weight gradients accumulate into `grads`.
std::vector<Vec> stack_backward(const std::vector<std::pair<CellWeights, CellWeights>>& layers,
                                const StackRun& run, const std::vector<Vec>& top_grads,
                                std::vector<std::pair<CellWeights, CellWeights>>& grads);

}  // namespace def
