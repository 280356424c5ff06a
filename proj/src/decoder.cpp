#include "def/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace def {

DecoderModel DecoderModel::init(const CodeConfig& cfg, Rng& rng) {
    cfg.validate();
    DecoderModel m;
    int input_size = cfg.decoder_input_size();
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        m.layers.emplace_back(CellWeights::random_init(cfg.decoder_cell, cfg.h0, input_size, rng),
                              CellWeights::random_init(cfg.decoder_cell, cfg.h0, input_size, rng));
        input_size = 2 * cfg.h0;
    }
    m.out_map = Matrix(cfg.q / 2, 2 * cfg.h0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(2 * cfg.h0));
    for (double& x : m.out_map.data) x = rng.uniform(-bound, bound);
    m.out_bias.assign(cfg.q / 2, 0.0);
    return m;
}

ParamList DecoderModel::params() {
    ParamList out;
    for (size_t l = 0; l < layers.size(); ++l) {
        layers[l].first.append_params("dec.l" + std::to_string(l) + ".fwd", out);
        layers[l].second.append_params("dec.l" + std::to_string(l) + ".bwd", out);
    }
    out.push_back({"dec.C", std::span<double>(out_map.data)});
    out.push_back({"dec.d", std::span<double>(out_bias)});
    return out;
}

DecoderModel DecoderModel::zeros_like(const DecoderModel& m) {
    DecoderModel z;
    for (const auto& [fw, bw] : m.layers) {
        z.layers.emplace_back(CellWeights::zeros(fw.kind, fw.state_size, fw.input_size),
                              CellWeights::zeros(bw.kind, bw.state_size, bw.input_size));
    }
    z.out_map = Matrix(m.out_map.rows, m.out_map.cols);
    z.out_bias.assign(m.out_bias.size(), 0.0);
    return z;
}

Vec build_decoder_input(int k, const Vec& x_bar, const std::vector<Vec>& p_bar,
                        const std::vector<int>& gammas) {
    const int p = static_cast<int>(gammas.size()) - 1;
    if (k < 0 || k >= static_cast<int>(x_bar.size())) {
        throw std::runtime_error("build_decoder_input: k out of range");
    }
    Vec in;
    for (int j = k - gammas[0]; j <= k; ++j) in.push_back(j >= 0 ? x_bar[j] : 0.0);
    for (int l = 0; l < p; ++l) {
        for (int j = k - gammas[l + 1]; j <= k; ++j) {
            if (j < 0) {
                in.push_back(0.0);
                continue;
            }
            if (j >= static_cast<int>(p_bar.size()) || static_cast<int>(p_bar[j].size()) <= l) {
                throw std::runtime_error("build_decoder_input: parity buffer too short");
            }
            in.push_back(p_bar[j][l]);
        }
    }
    return in;
}

std::vector<Vec> build_decoder_inputs(const CodeConfig& cfg, const Vec& x_bar,
                                      const std::vector<Vec>& p_bar) {
    std::vector<Vec> inputs(x_bar.size());
    for (int k = 0; k < static_cast<int>(x_bar.size()); ++k) {
        inputs[k] = build_decoder_input(k, x_bar, p_bar, cfg.gammas);
    }
    return inputs;
}

void scatter_decoder_input_grads(const CodeConfig& cfg, const std::vector<Vec>& input_grads,
                                 Vec& grad_x_bar, std::vector<Vec>& grad_p_bar) {
    for (int k = 0; k < static_cast<int>(input_grads.size()); ++k) {
        const Vec& gi = input_grads[k];
        if (gi.empty()) continue;
        size_t pos = 0;
        for (int j = k - cfg.gammas[0]; j <= k; ++j, ++pos) {
            if (j >= 0) grad_x_bar[j] += gi[pos];
        }
        for (int l = 0; l < cfg.p; ++l) {
            for (int j = k - cfg.gammas[l + 1]; j <= k; ++j, ++pos) {
                if (j >= 0) grad_p_bar[j][l] += gi[pos];
            }
        }
    }
}

StackRun decoder_run_layers(const DecoderModel& model, const CodeConfig& cfg,
                            const std::vector<Vec>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("decoder_run_layers: empty input sequence");
    if (static_cast<int>(inputs.front().size()) != cfg.decoder_input_size()) {
        throw std::invalid_argument("decoder_run_layers: input vector length mismatch");
    }
    return stack_forward(model.layers, inputs);
}

Vec decoder_output_layer(const DecoderModel& model, const std::vector<Vec>& norm_top,
                         std::vector<Vec>* pre_out) {
    Vec probs;
    probs.reserve(norm_top.size() * model.out_bias.size());
    if (pre_out) pre_out->resize(norm_top.size());
    for (size_t k = 0; k < norm_top.size(); ++k) {
        Vec pre = affine(model.out_map, norm_top[k], model.out_bias);
        for (double a : pre) probs.push_back(1.0 / (1.0 + std::exp(-a)));
        if (pre_out) (*pre_out)[k] = std::move(pre);
    }
    return probs;
}

std::vector<Vec> decoder_output_backward(const DecoderModel& model,
                                         const std::vector<Vec>& norm_top,
                                         const std::vector<Vec>& grad_pre, DecoderModel& grads) {
    if (grad_pre.size() != norm_top.size()) {
        throw std::invalid_argument("decoder_output_backward: grad count mismatch");
    }
    std::vector<Vec> out(norm_top.size());
    for (size_t k = 0; k < norm_top.size(); ++k) {
        out[k].assign(norm_top[k].size(), 0.0);
        outer_acc(grads.out_map, grad_pre[k], norm_top[k]);
        for (size_t i = 0; i < grad_pre[k].size(); ++i) grads.out_bias[i] += grad_pre[k][i];
        matvec_transposed_acc(model.out_map, grad_pre[k], out[k]);
    }
    return out;
}

Vec decode(const DecoderModel& model, const CodeConfig& cfg, const Vec& x_bar,
           const std::vector<Vec>& p_bar) {
    if (!model.state_norm.valid()) {
        throw std::runtime_error("decode: decoder state normalization not calibrated");
    }
    StackRun run = decoder_run_layers(model, cfg, build_decoder_inputs(cfg, x_bar, p_bar));
    std::vector<Vec> top = stack_outputs(run);
    for (auto& states : top) {
        for (size_t e = 0; e < states.size(); ++e) {
            states[e] = Whitener::from_stats(model.state_norm.mean[e], model.state_norm.var[e])
                            .apply(states[e]);
        }
    }
    return decoder_output_layer(model, top);
}

}  // namespace def
