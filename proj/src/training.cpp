#include "def/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <stdexcept>

#include "def/evaluation.hpp"
#include "def/parallel.hpp"

namespace def {

namespace {

constexpr long kChunk = 16;
constexpr double kProbClamp = 1e-12;

uint64_t fnv1a(uint64_t h, const void* bytes, size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

void accumulate_params(const ParamList& dst, const ParamList& src) {
    for (size_t b = 0; b < dst.size(); ++b) {
        auto d = dst[b].values;
        auto s = src[b].values;
        for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
}

ParamList joint_params(EncoderModel& enc, DecoderModel& dec) {
    ParamList out = enc.params();
    ParamList d = dec.params();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

// Per-codeword working set for one batch episode.
struct CwWork {
    Vec x;
    Vec n0_est;
    std::vector<Vec> v_est;
    PsgRun psg;
    std::vector<Vec> p_norm;  // [k][l]
    Vec x_bar;
    std::vector<Vec> p_bar;
    StackRun dec_run;
    std::vector<Vec> top_raw;   // [k], 2H0
    std::vector<Vec> top_norm;  // [k], 2H0
    Vec probs;                  // L
    // backward
    std::vector<Vec> grad_pre;       // [k], Q/2
    std::vector<Vec> grad_top_norm;  // [k], 2H0
    std::vector<Vec> grad_top_raw;
    std::vector<Vec> grad_p_norm;  // [k][l]
    std::vector<Vec> grad_raw;
};

double run_batch(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                 const BatchData& data, int workers, EncoderModel* enc_grads,
                 DecoderModel* dec_grads, std::vector<Vec>* probs_out) {
    const long batch = static_cast<long>(data.size());
    if (batch == 0) throw std::invalid_argument("run_batch: empty batch");
    const int bits_len = static_cast<int>(data.messages.front().size());
    const int k_max = 2 * bits_len / cfg.q;
    const int p = cfg.p;
    const int h2 = 2 * cfg.h0;
    const int out_dim = cfg.q / 2;
    const bool want_grads = enc_grads != nullptr;
    const size_t a_len = enc.a_levels.size();
    if (cfg.per_position_norm && k_max != cfg.symbols()) {
        throw std::invalid_argument("run_batch: per-position norm incompatible with message multiplier");
    }
    auto a_at = [&](int k) { return enc.a_levels[k % a_len]; };

    std::vector<CwWork> cw(batch);
    const long chunks = chunk_count(batch, kChunk);

    // encoder forward
    parallel_chunks(batch, kChunk, workers, [&](long, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            CwWork& w = cw[i];
            w.x = modulate(data.messages[i], cfg.q);
            w.n0_est = data.n0[i];
            for (int j = 0; j < k_max; ++j) w.n0_est[j] += data.g0[i][j];
            w.v_est.resize(k_max);
            for (int k = 0; k < k_max; ++k) {
                w.v_est[k] = data.v[i][k];
                for (int l = 0; l < p; ++l) w.v_est[k][l] += data.g[i][k][l];
            }
            w.psg = psg_run(enc, cfg, w.x, w.n0_est, w.v_est);
        }
    });

    // parity batch normalization (statistics over the whole batch)
    const int parity_channels = cfg.per_position_norm ? k_max * p : p;
    std::vector<Whitener> parity_norm(parity_channels);
    {
        Vec buf;
        for (int ch = 0; ch < parity_channels; ++ch) {
            buf.clear();
            if (cfg.per_position_norm) {
                const int k = ch / p, l = ch % p;
                for (long i = 0; i < batch; ++i) buf.push_back(cw[i].psg.raw[k][l]);
            } else {
                for (long i = 0; i < batch; ++i) {
                    for (int k = 0; k < k_max; ++k) buf.push_back(cw[i].psg.raw[k][ch]);
                }
            }
            parity_norm[ch] = Whitener::fit(buf);
        }
    }

    // channel + decoder forward
    parallel_chunks(batch, kChunk, workers, [&](long, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            CwWork& w = cw[i];
            w.p_norm.resize(k_max);
            w.p_bar.resize(k_max);
            w.x_bar.resize(k_max);
            for (int j = 0; j < k_max; ++j) {
                w.x_bar[j] = enc.w_levels[0] * a_at(j) * w.x[j] + data.n0[i][j];
            }
            for (int k = 0; k < k_max; ++k) {
                w.p_norm[k].resize(p);
                w.p_bar[k].resize(p);
                for (int l = 0; l < p; ++l) {
                    const int ch = cfg.per_position_norm ? k * p + l : l;
                    w.p_norm[k][l] = parity_norm[ch].apply(w.psg.raw[k][l]);
                    w.p_bar[k][l] =
                        enc.w_levels[l + 1] * a_at(k) * w.p_norm[k][l] + data.v[i][k][l];
                }
            }
            w.dec_run = decoder_run_layers(dec, cfg, build_decoder_inputs(cfg, w.x_bar, w.p_bar));
            w.top_raw = stack_outputs(w.dec_run);
        }
    });

    // decoder state batch normalization, per element per direction
    std::vector<Whitener> state_norm(h2);
    {
        Vec buf(static_cast<size_t>(batch) * k_max);
        for (int e = 0; e < h2; ++e) {
            size_t pos = 0;
            for (long i = 0; i < batch; ++i) {
                for (int k = 0; k < k_max; ++k) buf[pos++] = cw[i].top_raw[k][e];
            }
            state_norm[e] = Whitener::fit(buf);
        }
    }

    // output layer + BCE (and its gradient when training)
    const double n_bits = static_cast<double>(batch) * bits_len;
    std::vector<double> loss_chunks(chunks, 0.0);
    std::vector<EncoderModel> enc_chunk;
    std::vector<DecoderModel> dec_chunk;
    if (want_grads) {
        enc_chunk.assign(chunks, EncoderModel::zeros_like(enc));
        dec_chunk.assign(chunks, DecoderModel::zeros_like(dec));
    }

    parallel_chunks(batch, kChunk, workers, [&](long c, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            CwWork& w = cw[i];
            w.top_norm.resize(k_max);
            for (int k = 0; k < k_max; ++k) {
                w.top_norm[k].resize(h2);
                for (int e = 0; e < h2; ++e) w.top_norm[k][e] = state_norm[e].apply(w.top_raw[k][e]);
            }
            w.probs = decoder_output_layer(dec, w.top_norm);
            double loss = 0.0;
            for (int b = 0; b < bits_len; ++b) {
                const double pr = std::clamp(w.probs[b], kProbClamp, 1.0 - kProbClamp);
                loss -= data.messages[i][b] ? std::log(pr) : std::log(1.0 - pr);
            }
            loss_chunks[c] += loss;
            if (!want_grads) continue;
            w.grad_pre.resize(k_max);
            for (int k = 0; k < k_max; ++k) {
                w.grad_pre[k].resize(out_dim);
                for (int j = 0; j < out_dim; ++j) {
                    const int b = k * out_dim + j;
                    w.grad_pre[k][j] = (w.probs[b] - data.messages[i][b]) / n_bits;
                }
            }
            w.grad_top_norm = decoder_output_backward(dec, w.top_norm, w.grad_pre, dec_chunk[c]);
        }
    });

    double loss = 0.0;
    for (double lc : loss_chunks) loss += lc;
    loss /= n_bits;
    if (probs_out) {
        probs_out->resize(batch);
        for (long i = 0; i < batch; ++i) (*probs_out)[i] = cw[i].probs;
    }
    if (!want_grads) return loss;

    // state normalization backward (couples the whole batch)
    {
        const size_t n = static_cast<size_t>(batch) * k_max;
        Vec ys(n), dys(n), dxs(n);
        for (long i = 0; i < batch; ++i) {
            cw[i].grad_top_raw.assign(k_max, Vec(h2, 0.0));
        }
        for (int e = 0; e < h2; ++e) {
            size_t pos = 0;
            for (long i = 0; i < batch; ++i) {
                for (int k = 0; k < k_max; ++k, ++pos) {
                    ys[pos] = cw[i].top_norm[k][e];
                    dys[pos] = cw[i].grad_top_norm[k][e];
                }
            }
            state_norm[e].backward(ys, dys, dxs);
            pos = 0;
            for (long i = 0; i < batch; ++i) {
                for (int k = 0; k < k_max; ++k, ++pos) cw[i].grad_top_raw[k][e] = dxs[pos];
            }
        }
    }

    // decoder BPTT, received-signal gradients, power-level gradients
    parallel_chunks(batch, kChunk, workers, [&](long c, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            CwWork& w = cw[i];
            std::vector<Vec> input_grads =
                stack_backward(dec.layers, w.dec_run, w.grad_top_raw, dec_chunk[c].layers);
            Vec grad_x_bar(k_max, 0.0);
            std::vector<Vec> grad_p_bar(k_max, Vec(p, 0.0));
            scatter_decoder_input_grads(cfg, input_grads, grad_x_bar, grad_p_bar);

            EncoderModel& eg = enc_chunk[c];
            for (int j = 0; j < k_max; ++j) {
                eg.w_levels[0] += grad_x_bar[j] * a_at(j) * w.x[j];
                eg.a_levels[j % a_len] += grad_x_bar[j] * enc.w_levels[0] * w.x[j];
            }
            w.grad_p_norm.assign(k_max, Vec(p, 0.0));
            for (int k = 0; k < k_max; ++k) {
                for (int l = 0; l < p; ++l) {
                    const double gpb = grad_p_bar[k][l];
                    w.grad_p_norm[k][l] = gpb * enc.w_levels[l + 1] * a_at(k);
                    eg.w_levels[l + 1] += gpb * a_at(k) * w.p_norm[k][l];
                    eg.a_levels[k % a_len] += gpb * enc.w_levels[l + 1] * w.p_norm[k][l];
                }
            }
        }
    });

    // parity normalization backward
    {
        Vec ys, dys, dxs;
        for (long i = 0; i < batch; ++i) cw[i].grad_raw.assign(k_max, Vec(p, 0.0));
        for (int ch = 0; ch < parity_channels; ++ch) {
            ys.clear();
            dys.clear();
            if (cfg.per_position_norm) {
                const int k = ch / p, l = ch % p;
                for (long i = 0; i < batch; ++i) {
                    ys.push_back(cw[i].p_norm[k][l]);
                    dys.push_back(cw[i].grad_p_norm[k][l]);
                }
                dxs.resize(ys.size());
                parity_norm[ch].backward(ys, dys, dxs);
                for (long i = 0; i < batch; ++i) cw[i].grad_raw[k][l] = dxs[i];
            } else {
                for (long i = 0; i < batch; ++i) {
                    for (int k = 0; k < k_max; ++k) {
                        ys.push_back(cw[i].p_norm[k][ch]);
                        dys.push_back(cw[i].grad_p_norm[k][ch]);
                    }
                }
                dxs.resize(ys.size());
                parity_norm[ch].backward(ys, dys, dxs);
                size_t pos = 0;
                for (long i = 0; i < batch; ++i) {
                    for (int k = 0; k < k_max; ++k, ++pos) cw[i].grad_raw[k][ch] = dxs[pos];
                }
            }
        }
    }

    // encoder output map + PSG BPTT
    parallel_chunks(batch, kChunk, workers, [&](long c, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            CwWork& w = cw[i];
            EncoderModel& eg = enc_chunk[c];
            std::vector<Vec> state_grads(k_max);
            for (int k = 0; k < k_max; ++k) {
                const Vec& draw = w.grad_raw[k];
                outer_acc(eg.out_map, draw, w.psg.seq.states[k]);
                for (int l = 0; l < p; ++l) eg.out_bias[l] += draw[l];
                state_grads[k].assign(cfg.h0, 0.0);
                matvec_transposed_acc(enc.out_map, draw, state_grads[k]);
            }
            // PSG inputs are exogenous noise and message symbols; their
            // gradients are discarded.
            sequence_backward(enc.cell, w.psg.seq, state_grads, eg.cell);
        }
    });

    // ordered reduction keeps results identical for any worker count
    ParamList enc_total = enc_grads->params();
    ParamList dec_total = dec_grads->params();
    for (long c = 0; c < chunks; ++c) {
        accumulate_params(enc_total, enc_chunk[c].params());
        accumulate_params(dec_total, dec_chunk[c].params());
    }
    return loss;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs <= 0 || batches_per_epoch <= 0 || batch_size <= 0) {
        throw std::invalid_argument("TrainConfig: epochs/batches/batch_size must be positive");
    }
    if (lr_initial <= 0 || lr_drop_factor <= 0 || lr_drop_after_batches < 0) {
        throw std::invalid_argument("TrainConfig: invalid learning-rate schedule");
    }
    if (clip_norm <= 0 || rollback_factor <= 0) {
        throw std::invalid_argument("TrainConfig: clip_norm and rollback_factor must be positive");
    }
    if (w_train_start_epoch < 0 || a_train_start_epoch < 0) {
        throw std::invalid_argument("TrainConfig: power-level start epochs must be >= 0");
    }
    if (seeds.empty()) throw std::invalid_argument("TrainConfig: need at least one seed");
    if (message_multiplier < 1) throw std::invalid_argument("TrainConfig: message_multiplier >= 1");
    if (workers < 1) throw std::invalid_argument("TrainConfig: workers >= 1");
}

double bce_loss(const Vec& probs, const Bits& bits) {
    if (probs.size() != bits.size()) throw std::invalid_argument("bce_loss: length mismatch");
    if (probs.empty()) throw std::invalid_argument("bce_loss: empty input");
    double loss = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double pr = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
        loss -= bits[i] ? std::log(pr) : std::log(1.0 - pr);
    }
    return loss / static_cast<double>(probs.size());
}

double lr_at(long batch_index, const TrainConfig& cfg) {
    if (batch_index < 0) throw std::invalid_argument("lr_at: negative batch index");
    return batch_index < cfg.lr_drop_after_batches ? cfg.lr_initial
                                                   : cfg.lr_initial / cfg.lr_drop_factor;
}

bool rollback_discard(double prev_loss, double new_loss, double factor) {
    if (!(prev_loss > 0.0) || !std::isfinite(prev_loss)) {
        throw std::invalid_argument("rollback_discard: prev_loss must be finite and positive");
    }
    if (!std::isfinite(new_loss)) return true;
    return new_loss >= factor * prev_loss;
}

BatchData sample_batch(const CodeConfig& cfg, const ChannelParams& channel, int batch_size,
                       Rng& rng) {
    const int k_max = cfg.symbols();
    const double sigma = channel.forward_sigma();
    const double sigma_fb = channel.feedback_sigma();
    BatchData data;
    data.messages.resize(batch_size);
    data.n0.resize(batch_size);
    data.g0.resize(batch_size);
    data.v.resize(batch_size);
    data.g.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        Bits info(cfg.l_info);
        for (auto& b : info) b = rng.next_u64() & 1u;
        data.messages[i] = pad_message(info, cfg.pad_bits);
        data.n0[i] = rng.gaussian(k_max, sigma);
        data.g0[i] = rng.gaussian(k_max, sigma_fb);
        data.v[i].resize(k_max);
        data.g[i].resize(k_max);
        for (int k = 0; k < k_max; ++k) {
            data.v[i][k] = rng.gaussian(cfg.p, sigma);
            data.g[i][k] = rng.gaussian(cfg.p, sigma_fb);
        }
    }
    return data;
}

double batch_loss(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                  const BatchData& data, int workers, std::vector<Vec>* probs_out) {
    return run_batch(enc, dec, cfg, data, workers, nullptr, nullptr, probs_out);
}

double batch_loss_and_grads(const EncoderModel& enc, const DecoderModel& dec,
                            const CodeConfig& cfg, const BatchData& data, EncoderModel& enc_grads,
                            DecoderModel& dec_grads, int workers, std::vector<Vec>* probs_out) {
    return run_batch(enc, dec, cfg, data, workers, &enc_grads, &dec_grads, probs_out);
}

uint64_t TrainHistory::digest() const {
    uint64_t h = 0xcbf29ce484222325ull;
    if (!losses.empty()) h = fnv1a(h, losses.data(), losses.size() * sizeof(double));
    if (!rollbacks.empty()) h = fnv1a(h, rollbacks.data(), rollbacks.size() * sizeof(long));
    for (const auto& [idx, lr] : lr_changes) {
        h = fnv1a(h, &idx, sizeof(idx));
        h = fnv1a(h, &lr, sizeof(lr));
    }
    return h;
}

Trainer::Trainer(EncoderModel enc, DecoderModel dec, CodeConfig code_cfg, TrainConfig train_cfg,
                 ChannelParams channel)
    : enc_(std::move(enc)),
      dec_(std::move(dec)),
      code_cfg_(std::move(code_cfg)),
      train_cfg_(std::move(train_cfg)),
      channel_(channel) {
    code_cfg_.validate();
    train_cfg_.validate();
}

BatchResult Trainer::train_one_batch(Rng& rng) {
    CodeConfig sample_cfg = code_cfg_;
    sample_cfg.l_info *= train_cfg_.message_multiplier;
    BatchData data = sample_batch(sample_cfg, channel_, train_cfg_.batch_size, rng);

    EncoderModel enc_grads = EncoderModel::zeros_like(enc_);
    DecoderModel dec_grads = DecoderModel::zeros_like(dec_);
    BatchResult result;
    result.lr = lr_at(batch_index_, train_cfg_);
    result.loss =
        batch_loss_and_grads(enc_, dec_, code_cfg_, data, enc_grads, dec_grads, train_cfg_.workers);
    history_.losses.push_back(result.loss);

    const bool discard = !std::isfinite(result.loss) ||
                         (prev_loss_ && rollback_discard(*prev_loss_, result.loss,
                                                         train_cfg_.rollback_factor));
    if (discard) {
        if (have_snapshot_) {
            enc_ = saved_enc_;
            dec_ = saved_dec_;
            adam_ = saved_adam_;
        }
        history_.rollbacks.push_back(batch_index_);
        result.rolled_back = true;
        ++batch_index_;
        return result;
    }

    saved_enc_ = enc_;
    saved_dec_ = dec_;
    saved_adam_ = adam_;
    have_snapshot_ = true;

    const long epoch = batch_index_ / train_cfg_.batches_per_epoch;
    if (epoch < train_cfg_.w_train_start_epoch) {
        std::fill(enc_grads.w_levels.begin(), enc_grads.w_levels.end(), 0.0);
    }
    if (epoch < train_cfg_.a_train_start_epoch) {
        std::fill(enc_grads.a_levels.begin(), enc_grads.a_levels.end(), 0.0);
    }

    ParamList params = joint_params(enc_, dec_);
    ParamList grads = joint_params(enc_grads, dec_grads);
    if (train_cfg_.clip_elementwise) {
        result.grad_norm = global_grad_norm(grads);
        clip_gradient_elementwise(grads, train_cfg_.clip_norm);
    } else {
        result.grad_norm = clip_gradient_global(grads, train_cfg_.clip_norm);
    }
    if (history_.lr_changes.empty() || history_.lr_changes.back().second != result.lr) {
        history_.lr_changes.emplace_back(batch_index_, result.lr);
    }
    adam_step(params, grads, adam_, result.lr, train_cfg_.adam);
    enc_.project_power_levels();

    prev_loss_ = result.loss;
    if (!have_best_ || result.loss < best_loss_) {
        best_loss_ = result.loss;
        best_enc_ = enc_;
        best_dec_ = dec_;
        have_best_ = true;
    }
    ++batch_index_;
    return result;
}

TrainOutcome train_full(const TrainConfig& train_cfg, const CodeConfig& code_cfg,
                        const ChannelParams& channel, std::ostream* log) {
    train_cfg.validate();
    code_cfg.validate();
    TrainOutcome outcome;
    bool have_winner = false;
    double winner_bler = 0.0;

    for (uint64_t seed : train_cfg.seeds) {
        Rng rng(seed);
        Trainer trainer(EncoderModel::init(code_cfg, rng), DecoderModel::init(code_cfg, rng),
                        code_cfg, train_cfg, channel);
        const long total = train_cfg.total_batches();
        for (long b = 0; b < total; ++b) {
            BatchResult r = trainer.train_one_batch(rng);
            if (log) {
                (*log) << "seed=" << seed << " batch=" << b
                       << " epoch=" << b / train_cfg.batches_per_epoch << " loss=" << r.loss
                       << " lr=" << r.lr << " grad_norm=" << r.grad_norm
                       << " rollback=" << (r.rolled_back ? 1 : 0) << '\n';
            }
        }
        outcome.histories.emplace_back(seed, trainer.history());

        struct Candidate {
            const char* kind;
            EncoderModel enc;
            DecoderModel dec;
        };
        std::vector<Candidate> candidates;
        candidates.push_back({"final", trainer.encoder(), trainer.decoder()});
        candidates.push_back({"best", trainer.best_encoder(), trainer.best_decoder()});
        for (auto& cand : candidates) {
            calibrate_models(cand.enc, cand.dec, code_cfg, channel, train_cfg.calib_codewords,
                             mix_seed(seed, 0xca11b), train_cfg.workers);
            BlerReport report =
                run_lls(cand.enc, cand.dec, code_cfg, {train_cfg.train_snr_db}, channel,
                        train_cfg.selection_codewords, mix_seed(seed, 0x5e1ec7), train_cfg.workers);
            const SnrPointStats& pt = report.points.front();
            outcome.snapshot_evals.push_back({seed, cand.kind, pt.bler, pt.ber});
            if (log) {
                (*log) << "seed=" << seed << " snapshot=" << cand.kind
                       << " selection_bler=" << pt.bler << " selection_ber=" << pt.ber << '\n';
            }
            if (!have_winner || pt.bler < winner_bler) {
                have_winner = true;
                winner_bler = pt.bler;
                outcome.encoder = std::move(cand.enc);
                outcome.decoder = std::move(cand.dec);
                outcome.winning_seed = seed;
                outcome.winning_kind = cand.kind;
            }
        }
    }
    return outcome;
}

}  // namespace def
