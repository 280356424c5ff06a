#include "def/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace def {

int CodeConfig::encoder_input_size() const {
    int len = 1 + (deltas[0] + 1);
    for (int l = 1; l <= p; ++l) len += deltas[l];
    return len;
}

int CodeConfig::decoder_input_size() const {
    int len = 0;
    for (int l = 0; l <= p; ++l) len += gammas[l] + 1;
    return len;
}

int CodeConfig::parity_norm_channels() const { return per_position_norm ? symbols() * p : p; }

double CodeConfig::code_rate() const {
    return static_cast<double>(message_length()) / (static_cast<double>(symbols()) * (1 + p));
}

double CodeConfig::spectral_efficiency() const { return static_cast<double>(q) / (1 + p); }

void CodeConfig::validate() const {
    if (l_info <= 0) throw std::invalid_argument("CodeConfig: l_info must be positive");
    if (pad_bits < 0) throw std::invalid_argument("CodeConfig: pad_bits must be >= 0");
    if (q != 2 && q != 4) throw std::invalid_argument("CodeConfig: Q must be 2 or 4");
    if (p < 1) throw std::invalid_argument("CodeConfig: P must be >= 1");
    if (h0 <= 0) throw std::invalid_argument("CodeConfig: H0 must be positive");
    if (2 * message_length() % q != 0) {
        throw std::invalid_argument("CodeConfig: K = 2L/Q is not an integer");
    }
    if (static_cast<int>(deltas.size()) != p + 1) {
        throw std::invalid_argument("CodeConfig: deltas must have P+1 entries");
    }
    if (static_cast<int>(gammas.size()) != p + 1) {
        throw std::invalid_argument("CodeConfig: gammas must have P+1 entries");
    }
    if (deltas[0] < 0) throw std::invalid_argument("CodeConfig: delta_0 must be >= 0");
    for (int l = 1; l <= p; ++l) {
        if (deltas[l] < 1) throw std::invalid_argument("CodeConfig: delta_l must be >= 1 for l >= 1");
    }
    for (int g : gammas) {
        if (g < 0) throw std::invalid_argument("CodeConfig: gammas must be >= 0");
    }
    if (decoder_layers < 1) throw std::invalid_argument("CodeConfig: decoder_layers must be >= 1");
}

EncoderModel EncoderModel::init(const CodeConfig& cfg, Rng& rng) {
    cfg.validate();
    EncoderModel m;
    m.cell = CellWeights::random_init(cfg.encoder_cell, cfg.h0, cfg.encoder_input_size(), rng);
    m.out_map = Matrix(cfg.p, cfg.h0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.h0));
    for (double& x : m.out_map.data) x = rng.uniform(-bound, bound);
    m.out_bias.assign(cfg.p, 0.0);
    m.w_levels.assign(cfg.p + 1, 1.0);
    m.a_levels.assign(cfg.symbols(), 1.0);
    return m;
}

ParamList EncoderModel::params() {
    ParamList out;
    cell.append_params("enc.cell", out);
    out.push_back({"enc.A", std::span<double>(out_map.data)});
    out.push_back({"enc.c", std::span<double>(out_bias)});
    out.push_back({"enc.w", std::span<double>(w_levels)});
    out.push_back({"enc.a", std::span<double>(a_levels)});
    return out;
}

EncoderModel EncoderModel::zeros_like(const EncoderModel& m) {
    EncoderModel z;
    z.cell = CellWeights::zeros(m.cell.kind, m.cell.state_size, m.cell.input_size);
    z.out_map = Matrix(m.out_map.rows, m.out_map.cols);
    z.out_bias.assign(m.out_bias.size(), 0.0);
    z.w_levels.assign(m.w_levels.size(), 0.0);
    z.a_levels.assign(m.a_levels.size(), 0.0);
    return z;
}

void EncoderModel::project_power_levels() {
    double ws = 0.0;
    for (double w : w_levels) ws += w * w;
    double as = 0.0;
    for (double a : a_levels) as += a * a;
    if (ws <= 0.0 || as <= 0.0) throw std::runtime_error("project_power_levels: zero power vector");
    const double wscale = std::sqrt(static_cast<double>(w_levels.size()) / ws);
    const double ascale = std::sqrt(static_cast<double>(a_levels.size()) / as);
    for (double& w : w_levels) w *= wscale;
    for (double& a : a_levels) a *= ascale;
}

double EncoderModel::w_constraint_error() const {
    double ws = 0.0;
    for (double w : w_levels) ws += w * w;
    return std::abs(ws - static_cast<double>(w_levels.size()));
}

double EncoderModel::a_constraint_error() const {
    double as = 0.0;
    for (double a : a_levels) as += a * a;
    return std::abs(as - static_cast<double>(a_levels.size()));
}

Bits pad_message(const Bits& info, int pad_bits) {
    Bits m(info);
    m.insert(m.end(), static_cast<size_t>(pad_bits), 0);
    return m;
}

Vec build_psg_input(int k, const Vec& x, const Vec& n0_est, const std::vector<Vec>& v_est,
                    const std::vector<int>& deltas) {
    const int p = static_cast<int>(deltas.size()) - 1;
    if (k < 0 || k >= static_cast<int>(x.size())) throw std::runtime_error("build_psg_input: k out of range");
    if (k >= static_cast<int>(n0_est.size())) {
        throw std::runtime_error("build_psg_input: n0 buffer too short");
    }
    Vec in;
    in.push_back(x[k]);
    for (int j = k - deltas[0]; j <= k; ++j) in.push_back(j >= 0 ? n0_est[j] : 0.0);
    for (int l = 0; l < p; ++l) {
        for (int j = k - deltas[l + 1]; j <= k - 1; ++j) {
            if (j < 0) {
                in.push_back(0.0);
                continue;
            }
            if (j >= static_cast<int>(v_est.size()) || static_cast<int>(v_est[j].size()) <= l) {
                throw std::runtime_error("build_psg_input: parity noise buffer too short");
            }
            in.push_back(v_est[j][l]);
        }
    }
    return in;
}

std::pair<CellState, Vec> psg_step(const EncoderModel& model, const Vec& input,
                                   const CellState& state, CellCache* cache) {
    CellState next = cell_forward(model.cell, input, state, cache);
    Vec raw = affine(model.out_map, next.h, model.out_bias);
    return {std::move(next), std::move(raw)};
}

PsgRun psg_run(const EncoderModel& model, const CodeConfig& cfg, const Vec& x, const Vec& n0_est,
               const std::vector<Vec>& v_est) {
    const int k_max = static_cast<int>(x.size());
    PsgRun run;
    run.seq.caches.resize(k_max);
    run.seq.states.reserve(k_max);
    run.raw.reserve(k_max);
    CellState state = CellState::zero(cfg.encoder_cell, cfg.h0);
    for (int k = 0; k < k_max; ++k) {
        Vec input = build_psg_input(k, x, n0_est, v_est, cfg.deltas);
        auto [next, raw] = psg_step(model, input, state, &run.seq.caches[k]);
        state = std::move(next);
        run.seq.states.push_back(state.h);
        run.raw.push_back(std::move(raw));
    }
    return run;
}

int parity_norm_channel(const CodeConfig& cfg, int k, int l) {
    return cfg.per_position_norm ? k * cfg.p + l : l;
}

double normalize_parity_calibrated(const CalibStats& calib, const CodeConfig& cfg, int k, int l,
                                   double raw) {
    if (!calib.valid()) throw std::runtime_error("normalize_parity_calibrated: model not calibrated");
    const int ch = parity_norm_channel(cfg, k, l);
    return Whitener::from_stats(calib.mean[ch], calib.var[ch]).apply(raw);
}

Vec assemble_codeword(const Vec& x, const std::vector<Vec>& parities, const Vec& w_levels,
                      const Vec& a_levels) {
    const int k_max = static_cast<int>(x.size());
    const int p = static_cast<int>(w_levels.size()) - 1;
    if (static_cast<int>(parities.size()) != k_max || static_cast<int>(a_levels.size()) != k_max) {
        throw std::invalid_argument("assemble_codeword: length mismatch");
    }
    Vec z(static_cast<size_t>(k_max) * (p + 1));
    for (int j = 0; j < k_max; ++j) z[j] = w_levels[0] * a_levels[j] * x[j];
    for (int j = k_max; j < static_cast<int>(z.size()); ++j) {
        const int l = (j - k_max) % p;
        const int k = (j - k_max) / p;
        z[j] = w_levels[l + 1] * a_levels[k] * parities[k][l];
    }
    return z;
}

Transcript encode_interactive(const EncoderModel& model, const CodeConfig& cfg, const Bits& message,
                              const ChannelParams& channel, Rng& rng) {
    if (static_cast<int>(message.size()) != cfg.message_length()) {
        throw std::invalid_argument("encode_interactive: message must have L = L_info + pad bits");
    }
    if (!model.calib.valid()) {
        throw std::runtime_error("encode_interactive: encoder not calibrated (inference mode)");
    }
    const int k_max = cfg.symbols();
    const double sigma = channel.forward_sigma();
    const double sigma_fb = channel.feedback_sigma();

    Transcript t;
    t.x = modulate(message, cfg.q);
    t.x_tx.resize(k_max);
    for (int j = 0; j < k_max; ++j) t.x_tx[j] = model.w_levels[0] * model.a_levels[j] * t.x[j];
    auto [x_bar, n0] = channel_forward(t.x_tx, sigma, rng);
    t.x_bar = std::move(x_bar);
    t.n0 = std::move(n0);
    t.x_tilde = channel_feedback(t.x_bar, sigma_fb, rng);
    t.g0.resize(k_max);
    t.n0_est.resize(k_max);
    for (int j = 0; j < k_max; ++j) {
        t.g0[j] = t.x_tilde[j] - t.x_bar[j];
        // with noiseless feedback the estimate is the noise itself, exactly
        t.n0_est[j] = sigma_fb == 0.0 ? t.n0[j] : t.x_tilde[j] - t.x_tx[j];
    }

    CellState state = CellState::zero(cfg.encoder_cell, cfg.h0);
    for (int k = 0; k < k_max; ++k) {
        Vec input = build_psg_input(k, t.x, t.n0_est, t.v_est, cfg.deltas);
        auto [next, raw] = psg_step(model, input, state);
        state = std::move(next);

        Vec p_norm(cfg.p), p_tx(cfg.p);
        for (int l = 0; l < cfg.p; ++l) {
            p_norm[l] = normalize_parity_calibrated(model.calib, cfg, k, l, raw[l]);
            p_tx[l] = model.w_levels[l + 1] * model.a_levels[k] * p_norm[l];
        }
        auto [p_bar, v] = channel_forward(p_tx, sigma, rng);
        Vec p_tilde = channel_feedback(p_bar, sigma_fb, rng);
        Vec g(cfg.p), v_est(cfg.p);
        for (int l = 0; l < cfg.p; ++l) {
            g[l] = p_tilde[l] - p_bar[l];
            v_est[l] = sigma_fb == 0.0 ? v[l] : p_tilde[l] - p_tx[l];
        }
        t.p_raw.push_back(std::move(raw));
        t.p_norm.push_back(std::move(p_norm));
        t.p_tx.push_back(std::move(p_tx));
        t.p_bar.push_back(std::move(p_bar));
        t.v.push_back(std::move(v));
        t.p_tilde.push_back(std::move(p_tilde));
        t.g.push_back(std::move(g));
        t.v_est.push_back(std::move(v_est));
    }
    return t;
}

CalibStats calibrate_encoder(const EncoderModel& model, const CodeConfig& cfg,
                             const ChannelParams& channel, long n_codewords, Rng& rng) {
    cfg.validate();
    if (n_codewords <= 0) throw std::invalid_argument("calibrate_encoder: n_codewords must be > 0");
    const int k_max = cfg.symbols();
    const int channels = cfg.parity_norm_channels();
    const double sigma = channel.forward_sigma();
    const double sigma_fb = channel.feedback_sigma();

    Vec sum(channels, 0.0), sumsq(channels, 0.0);
    for (long cw = 0; cw < n_codewords; ++cw) {
        Bits info(cfg.l_info);
        for (auto& b : info) b = rng.next_u64() & 1u;
        Vec x = modulate(pad_message(info, cfg.pad_bits), cfg.q);
        // The PSG consumes only noise-estimate buffers, so noise can be
        // pre-sampled here without running the channel interaction.
        Vec n0_est = rng.gaussian(k_max, sigma);
        if (sigma_fb > 0.0) {
            const Vec g0 = rng.gaussian(k_max, sigma_fb);
            for (int j = 0; j < k_max; ++j) n0_est[j] += g0[j];
        }
        std::vector<Vec> v_est(k_max);
        for (int k = 0; k < k_max; ++k) {
            v_est[k] = rng.gaussian(cfg.p, sigma);
            if (sigma_fb > 0.0) {
                const Vec g = rng.gaussian(cfg.p, sigma_fb);
                for (int l = 0; l < cfg.p; ++l) v_est[k][l] += g[l];
            }
        }
        PsgRun run = psg_run(model, cfg, x, n0_est, v_est);
        for (int k = 0; k < k_max; ++k) {
            for (int l = 0; l < cfg.p; ++l) {
                const int ch = parity_norm_channel(cfg, k, l);
                sum[ch] += run.raw[k][l];
                sumsq[ch] += run.raw[k][l] * run.raw[k][l];
            }
        }
    }

    CalibStats stats;
    stats.count = n_codewords;
    stats.mean.resize(channels);
    stats.var.resize(channels);
    const double samples_per_channel =
        static_cast<double>(n_codewords) * (cfg.per_position_norm ? 1.0 : k_max);
    for (int ch = 0; ch < channels; ++ch) {
        stats.mean[ch] = sum[ch] / samples_per_channel;
        stats.var[ch] = sumsq[ch] / samples_per_channel - stats.mean[ch] * stats.mean[ch];
        if (stats.var[ch] <= Whitener::kVarEps) stats.variance_guard_hit = true;
    }
    return stats;
}

}  // namespace def
