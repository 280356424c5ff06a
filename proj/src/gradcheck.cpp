#include "def/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace def {

namespace {

// central difference over every element of one parameter span
void check_block(const ParamBlock& param, const ParamBlock& grad,
                 const std::function<double()>& loss_fn, double tol, GradCheckReport& report) {
    constexpr double kStep = 1e-5;
    GradCheckEntry entry;
    entry.block = param.name;
    for (size_t i = 0; i < param.values.size(); ++i) {
        double& x = param.values[i];
        const double saved = x;
        x = saved + kStep;
        const double up = loss_fn();
        x = saved - kStep;
        const double down = loss_fn();
        x = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        entry.max_rel_error =
            std::max(entry.max_rel_error, grad_rel_error(grad.values[i], numeric));
    }
    entry.pass = entry.max_rel_error <= tol;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(entry);
}

}  // namespace

double grad_rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradcheck_cell(CellKind kind, int state_size, int input_size, int steps,
                               uint64_t seed, double tol) {
    Rng rng(seed);
    CellWeights w = CellWeights::random_init(kind, state_size, input_size, rng);
    // non-zero biases so their gradients are exercised off the origin
    for (auto& b : w.bias) {
        for (auto& x : b) x = 0.2 * rng.normal();
    }
    std::vector<Vec> inputs(steps);
    std::vector<Vec> loss_weights(steps);
    for (int t = 0; t < steps; ++t) {
        inputs[t] = rng.gaussian(input_size, 1.0);
        loss_weights[t] = rng.gaussian(state_size, 1.0);
    }

    const auto loss_fn = [&]() {
        const SequenceRun run = run_sequence(w, inputs);
        double loss = 0.0;
        for (int t = 0; t < steps; ++t) {
            for (int e = 0; e < state_size; ++e) loss += loss_weights[t][e] * run.states[t][e];
        }
        return loss;
    };

    CellWeights grads = CellWeights::zeros(kind, state_size, input_size);
    {
        const SequenceRun run = run_sequence(w, inputs);
        sequence_backward(w, run, loss_weights, grads);
    }

    ParamList params, grad_params;
    w.append_params("cell", params);
    grads.append_params("cell", grad_params);

    GradCheckReport report;
    report.tolerance = tol;
    for (size_t b = 0; b < params.size(); ++b) {
        check_block(params[b], grad_params[b], loss_fn, tol, report);
    }
    return report;
}

GradCheckReport gradcheck_end_to_end(const CodeConfig& cfg, int batch_size, uint64_t seed,
                                     double tol) {
    cfg.validate();
    Rng rng(seed);
    EncoderModel enc = EncoderModel::init(cfg, rng);
    DecoderModel dec = DecoderModel::init(cfg, rng);
    // move the power levels off the uniform starting point
    for (auto& w : enc.w_levels) w += 0.15 * rng.normal();
    for (auto& a : enc.a_levels) a += 0.15 * rng.normal();
    enc.project_power_levels();

    ChannelParams channel;
    channel.forward_snr_db = 0.0;
    Rng batch_rng(mix_seed(seed, 0xba7c4));
    const BatchData data = sample_batch(cfg, channel, batch_size, batch_rng);

    EncoderModel enc_grads = EncoderModel::zeros_like(enc);
    DecoderModel dec_grads = DecoderModel::zeros_like(dec);
    batch_loss_and_grads(enc, dec, cfg, data, enc_grads, dec_grads);

    const auto loss_fn = [&]() { return batch_loss(enc, dec, cfg, data); };

    ParamList params = enc.params();
    ParamList grad_params = enc_grads.params();
    {
        ParamList d = dec.params();
        ParamList dg = dec_grads.params();
        params.insert(params.end(), d.begin(), d.end());
        grad_params.insert(grad_params.end(), dg.begin(), dg.end());
    }

    GradCheckReport report;
    report.tolerance = tol;
    for (size_t b = 0; b < params.size(); ++b) {
        check_block(params[b], grad_params[b], loss_fn, tol, report);
    }
    return report;
}

}  // namespace def
