#include "def/cells.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace def {

namespace {

int gate_count(CellKind kind) {
    switch (kind) {
        case CellKind::Rnn: return 1;
        case CellKind::Gru: return 3;
        case CellKind::Lstm: return 4;
    }
    throw std::invalid_argument("unknown cell kind");
}

int bias_count(CellKind kind) { return kind == CellKind::Gru ? 4 : gate_count(kind); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dims(const CellWeights& w, const Vec& input, const CellState& prev) {
    if (static_cast<int>(input.size()) != w.input_size) {
        throw std::invalid_argument("cell_forward: input size " + std::to_string(input.size()) +
                                    " != " + std::to_string(w.input_size));
    }
    if (static_cast<int>(prev.h.size()) != w.state_size) {
        throw std::invalid_argument("cell_forward: state size mismatch");
    }
    if (w.kind == CellKind::Lstm && static_cast<int>(prev.s.size()) != w.state_size) {
        throw std::invalid_argument("cell_forward: LSTM cell-state size mismatch");
    }
}

// pre-activation W h_prev + Y input + b for gate g
Vec gate_pre(const CellWeights& w, int g, const Vec& input, const Vec& h_prev, const Vec& b) {
    Vec a = affine(w.w_state[g], h_prev, b);
    const Matrix& y = w.w_input[g];
    const double* row = y.data.data();
    for (int r = 0; r < y.rows; ++r, row += y.cols) {
        double acc = 0.0;
        for (int c = 0; c < y.cols; ++c) acc += row[c] * input[c];
        a[r] += acc;
    }
    return a;
}

// accumulate gradients of one gate pre-activation into weight/input/state grads
void gate_backward(const CellWeights& w, int g, const Vec& da, const Vec& input, const Vec& h_prev,
                   CellWeights& grads, Vec& grad_input, Vec& grad_h_prev, int bias_index) {
    outer_acc(grads.w_state[g], da, h_prev);
    outer_acc(grads.w_input[g], da, input);
    Vec& b = grads.bias[bias_index];
    for (size_t i = 0; i < da.size(); ++i) b[i] += da[i];
    matvec_transposed_acc(w.w_state[g], da, grad_h_prev);
    matvec_transposed_acc(w.w_input[g], da, grad_input);
}

}  // namespace

const char* cell_kind_name(CellKind kind) {
    switch (kind) {
        case CellKind::Rnn: return "rnn";
        case CellKind::Gru: return "gru";
        case CellKind::Lstm: return "lstm";
    }
    return "?";
}

CellKind cell_kind_from_name(const std::string& name) {
    if (name == "rnn") return CellKind::Rnn;
    if (name == "gru") return CellKind::Gru;
    if (name == "lstm") return CellKind::Lstm;
    throw std::invalid_argument("unknown cell kind '" + name + "' (expected rnn|gru|lstm)");
}

CellWeights CellWeights::zeros(CellKind kind, int state_size, int input_size) {
    CellWeights w;
    w.kind = kind;
    w.state_size = state_size;
    w.input_size = input_size;
    const int gates = gate_count(kind);
    for (int g = 0; g < gates; ++g) {
        w.w_state.emplace_back(state_size, state_size);
        w.w_input.emplace_back(state_size, input_size);
    }
    for (int b = 0; b < bias_count(kind); ++b) w.bias.emplace_back(state_size, 0.0);
    return w;
}

CellWeights CellWeights::random_init(CellKind kind, int state_size, int input_size, Rng& rng) {
    CellWeights w = zeros(kind, state_size, input_size);
    auto fill = [&rng](Matrix& m) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols));
        for (double& x : m.data) x = rng.uniform(-bound, bound);
    };
    for (auto& m : w.w_state) fill(m);
    for (auto& m : w.w_input) fill(m);
    return w;
}

void CellWeights::append_params(const std::string& prefix, ParamList& out) {
    for (size_t g = 0; g < w_state.size(); ++g) {
        out.push_back({prefix + ".W" + std::to_string(g), std::span<double>(w_state[g].data)});
    }
    for (size_t g = 0; g < w_input.size(); ++g) {
        out.push_back({prefix + ".Y" + std::to_string(g), std::span<double>(w_input[g].data)});
    }
    for (size_t b = 0; b < bias.size(); ++b) {
        out.push_back({prefix + ".b" + std::to_string(b), std::span<double>(bias[b])});
    }
}

CellState CellState::zero(CellKind kind, int state_size) {
    CellState s;
    s.h.assign(state_size, 0.0);
    if (kind == CellKind::Lstm) s.s.assign(state_size, 0.0);
    return s;
}

CellState cell_forward(const CellWeights& w, const Vec& input, const CellState& prev,
                       CellCache* cache) {
    check_dims(w, input, prev);
    const int n = w.state_size;
    CellState next;

    switch (w.kind) {
        case CellKind::Rnn: {
            Vec a = gate_pre(w, 0, input, prev.h, w.bias[0]);
            next.h.resize(n);
            for (int i = 0; i < n; ++i) next.h[i] = std::tanh(a[i]);
            break;
        }
        case CellKind::Gru: {
            // bias order: b_h, b_i, b_z, b_r
            Vec az = gate_pre(w, 1, input, prev.h, w.bias[2]);
            Vec ar = gate_pre(w, 2, input, prev.h, w.bias[3]);
            Vec z(n), r(n);
            for (int i = 0; i < n; ++i) {
                z[i] = sigmoid(az[i]);
                r[i] = sigmoid(ar[i]);
            }
            Vec u = affine(w.w_state[0], prev.h, w.bias[0]);  // W_f h + b_h
            Vec af(n);
            {
                const Matrix& yf = w.w_input[0];
                const double* row = yf.data.data();
                for (int i = 0; i < n; ++i, row += yf.cols) {
                    double acc = w.bias[1][i] + u[i] * r[i];
                    for (int c = 0; c < yf.cols; ++c) acc += row[c] * input[c];
                    af[i] = acc;
                }
            }
            Vec f0(n);
            next.h.resize(n);
            for (int i = 0; i < n; ++i) {
                f0[i] = std::tanh(af[i]);
                next.h[i] = f0[i] * (1.0 - z[i]) + prev.h[i] * z[i];
            }
            if (cache) {
                cache->act[0] = std::move(f0);
                cache->act[1] = std::move(z);
                cache->act[2] = std::move(r);
                cache->pre = std::move(u);
            }
            break;
        }
        case CellKind::Lstm: {
            std::array<Vec, 4> f;
            for (int g = 0; g < 4; ++g) f[g] = gate_pre(w, g, input, prev.h, w.bias[g]);
            for (int i = 0; i < n; ++i) {
                f[0][i] = sigmoid(f[0][i]);
                f[1][i] = sigmoid(f[1][i]);
                f[2][i] = sigmoid(f[2][i]);
                f[3][i] = std::tanh(f[3][i]);
            }
            next.s.resize(n);
            next.h.resize(n);
            Vec tanh_s(n);
            for (int i = 0; i < n; ++i) {
                next.s[i] = f[1][i] * prev.s[i] + f[2][i] * f[3][i];
                tanh_s[i] = std::tanh(next.s[i]);
                next.h[i] = f[0][i] * tanh_s[i];
            }
            if (cache) {
                cache->act = std::move(f);
                cache->pre = std::move(tanh_s);
            }
            break;
        }
    }

    if (cache) {
        cache->input = input;
        cache->h_prev = prev.h;
        cache->s_prev = prev.s;
        cache->h = next.h;
        cache->s = next.s;
    }
    return next;
}

void cell_backward(const CellWeights& w, const CellCache& cc, const Vec& grad_h, const Vec& grad_s,
                   CellWeights& grads, Vec& grad_input, Vec& grad_h_prev, Vec& grad_s_prev) {
    const int n = w.state_size;
    if (cc.h.empty()) throw std::runtime_error("cell_backward: cache missing (forward not cached)");
    if (static_cast<int>(grad_h.size()) != n) {
        throw std::invalid_argument("cell_backward: grad_h size mismatch");
    }

    switch (w.kind) {
        case CellKind::Rnn: {
            Vec da(n);
            for (int i = 0; i < n; ++i) da[i] = grad_h[i] * (1.0 - cc.h[i] * cc.h[i]);
            gate_backward(w, 0, da, cc.input, cc.h_prev, grads, grad_input, grad_h_prev, 0);
            break;
        }
        case CellKind::Gru: {
            const Vec& f0 = cc.act[0];
            const Vec& z = cc.act[1];
            const Vec& r = cc.act[2];
            const Vec& u = cc.pre;
            Vec daf(n), daz(n), dar(n), du(n);
            for (int i = 0; i < n; ++i) {
                const double df0 = grad_h[i] * (1.0 - z[i]);
                const double dz = grad_h[i] * (cc.h_prev[i] - f0[i]);
                grad_h_prev[i] += grad_h[i] * z[i];
                daf[i] = df0 * (1.0 - f0[i] * f0[i]);
                du[i] = daf[i] * r[i];
                const double dr = daf[i] * u[i];
                daz[i] = dz * z[i] * (1.0 - z[i]);
                dar[i] = dr * r[i] * (1.0 - r[i]);
            }
            // candidate path: u = W_f h_prev + b_h feeds through the reset
            // gate; the input side Y_f i + b_i is direct
            outer_acc(grads.w_state[0], du, cc.h_prev);
            for (int i = 0; i < n; ++i) grads.bias[0][i] += du[i];
            matvec_transposed_acc(w.w_state[0], du, grad_h_prev);
            outer_acc(grads.w_input[0], daf, cc.input);
            for (int i = 0; i < n; ++i) grads.bias[1][i] += daf[i];
            matvec_transposed_acc(w.w_input[0], daf, grad_input);
            gate_backward(w, 1, daz, cc.input, cc.h_prev, grads, grad_input, grad_h_prev, 2);
            gate_backward(w, 2, dar, cc.input, cc.h_prev, grads, grad_input, grad_h_prev, 3);
            break;
        }
        case CellKind::Lstm: {
            const auto& f = cc.act;
            const Vec& tanh_s = cc.pre;
            std::array<Vec, 4> da;
            for (auto& v : da) v.resize(n);
            for (int i = 0; i < n; ++i) {
                const double gs_in = grad_s.empty() ? 0.0 : grad_s[i];
                const double gs = gs_in + grad_h[i] * f[0][i] * (1.0 - tanh_s[i] * tanh_s[i]);
                const double df1 = grad_h[i] * tanh_s[i];
                const double df2 = gs * cc.s_prev[i];
                const double df3 = gs * f[3][i];
                const double df4 = gs * f[2][i];
                grad_s_prev[i] += gs * f[1][i];
                da[0][i] = df1 * f[0][i] * (1.0 - f[0][i]);
                da[1][i] = df2 * f[1][i] * (1.0 - f[1][i]);
                da[2][i] = df3 * f[2][i] * (1.0 - f[2][i]);
                da[3][i] = df4 * (1.0 - f[3][i] * f[3][i]);
            }
            for (int g = 0; g < 4; ++g) {
                gate_backward(w, g, da[g], cc.input, cc.h_prev, grads, grad_input, grad_h_prev, g);
            }
            break;
        }
    }
}

SequenceRun run_sequence(const CellWeights& w, const std::vector<Vec>& inputs) {
    SequenceRun run;
    run.caches.resize(inputs.size());
    run.states.reserve(inputs.size());
    CellState state = CellState::zero(w.kind, w.state_size);
    for (size_t k = 0; k < inputs.size(); ++k) {
        state = cell_forward(w, inputs[k], state, &run.caches[k]);
        run.states.push_back(state.h);
    }
    return run;
}

std::vector<Vec> sequence_backward(const CellWeights& w, const SequenceRun& run,
                                   const std::vector<Vec>& out_grads, CellWeights& grads) {
    const size_t len = run.caches.size();
    if (out_grads.size() != len) throw std::invalid_argument("sequence_backward: grad count mismatch");
    std::vector<Vec> input_grads(len);
    Vec carry_h(w.state_size, 0.0);
    Vec carry_s(w.state_size, 0.0);
    for (size_t k = len; k-- > 0;) {
        Vec gh = carry_h;
        if (!out_grads[k].empty()) {
            for (int i = 0; i < w.state_size; ++i) gh[i] += out_grads[k][i];
        }
        Vec gs = std::move(carry_s);
        carry_h.assign(w.state_size, 0.0);
        carry_s.assign(w.state_size, 0.0);
        input_grads[k].assign(w.input_size, 0.0);
        cell_backward(w, run.caches[k], gh, gs, grads, input_grads[k], carry_h, carry_s);
    }
    return input_grads;
}

BidirRun bidirectional_forward(const CellWeights& fw, const CellWeights& bw,
                               const std::vector<Vec>& inputs) {
    BidirRun run;
    run.fwd = run_sequence(fw, inputs);
    std::vector<Vec> reversed(inputs.rbegin(), inputs.rend());
    run.bwd = run_sequence(bw, reversed);
    std::reverse(run.bwd.caches.begin(), run.bwd.caches.end());
    std::reverse(run.bwd.states.begin(), run.bwd.states.end());
    return run;
}

std::vector<Vec> bidir_backward_direction(const CellWeights& w, const SequenceRun& run,
                                          const std::vector<Vec>& out_grads, CellWeights& grads,
                                          bool reversed) {
    if (!reversed) return sequence_backward(w, run, out_grads, grads);
    SequenceRun rev;
    rev.caches.assign(run.caches.rbegin(), run.caches.rend());
    rev.states.assign(run.states.rbegin(), run.states.rend());
    std::vector<Vec> rev_grads(out_grads.rbegin(), out_grads.rend());
    std::vector<Vec> in = sequence_backward(w, rev, rev_grads, grads);
    std::reverse(in.begin(), in.end());
    return in;
}

StackRun stack_forward(const std::vector<std::pair<CellWeights, CellWeights>>& layers,
                       const std::vector<Vec>& inputs) {
    StackRun run;
    std::vector<Vec> current = inputs;
    for (const auto& [fw, bw] : layers) {
        run.layer_inputs.push_back(current);
        run.layers.push_back(bidirectional_forward(fw, bw, current));
        const BidirRun& top = run.layers.back();
        std::vector<Vec> next(current.size());
        for (size_t k = 0; k < current.size(); ++k) {
            next[k] = top.fwd.states[k];
            next[k].insert(next[k].end(), top.bwd.states[k].begin(), top.bwd.states[k].end());
        }
        current = std::move(next);
    }
    return run;
}

std::vector<Vec> stack_backward(const std::vector<std::pair<CellWeights, CellWeights>>& layers,
                                const StackRun& run, const std::vector<Vec>& top_grads,
                                std::vector<std::pair<CellWeights, CellWeights>>& grads) {
    if (layers.size() != run.layers.size() || layers.size() != grads.size()) {
        throw std::invalid_argument("stack_backward: layer count mismatch");
    }
    std::vector<Vec> out_grads = top_grads;
    std::vector<Vec> input_grads;
    for (size_t l = layers.size(); l-- > 0;) {
        const int h = layers[l].first.state_size;
        const size_t len = out_grads.size();
        std::vector<Vec> fwd_grads(len), bwd_grads(len);
        for (size_t k = 0; k < len; ++k) {
            if (out_grads[k].empty()) continue;
            fwd_grads[k].assign(out_grads[k].begin(), out_grads[k].begin() + h);
            bwd_grads[k].assign(out_grads[k].begin() + h, out_grads[k].end());
        }
        std::vector<Vec> in_f = bidir_backward_direction(layers[l].first, run.layers[l].fwd,
                                                         fwd_grads, grads[l].first, false);
        std::vector<Vec> in_b = bidir_backward_direction(layers[l].second, run.layers[l].bwd,
                                                         bwd_grads, grads[l].second, true);
        input_grads.resize(len);
        for (size_t k = 0; k < len; ++k) {
            input_grads[k] = std::move(in_f[k]);
            for (size_t i = 0; i < input_grads[k].size(); ++i) input_grads[k][i] += in_b[k][i];
        }
        out_grads = input_grads;
    }
    return input_grads;
}

std::vector<Vec> stack_outputs(const StackRun& run) {
    if (run.layers.empty()) throw std::invalid_argument("stack_outputs: empty stack");
    const BidirRun& top = run.layers.back();
    std::vector<Vec> out(top.fwd.states.size());
    for (size_t k = 0; k < out.size(); ++k) {
        out[k] = top.fwd.states[k];
        out[k].insert(out[k].end(), top.bwd.states[k].begin(), top.bwd.states[k].end());
    }
    return out;
}

}  // namespace def
