#include "def/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <locale>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "def/model_io.hpp"
#include "def/parallel.hpp"
#include "def/training.hpp"

namespace def {

namespace {

constexpr long kChunk = 64;

Bits random_info_bits(int l_info, Rng& rng) {
    Bits info(l_info);
    for (auto& b : info) b = rng.next_u64() & 1u;
    return info;
}

double transcript_energy(const Transcript& t) {
    double e = 0.0;
    for (double x : t.x_tx) e += x * x;
    for (const auto& ptx : t.p_tx) {
        for (double x : ptx) e += x * x;
    }
    return e;
}

}  // namespace

double spectral_efficiency(int q, int p) {
    if (q <= 0 || q % 2 != 0 || p < 0) throw std::invalid_argument("spectral_efficiency: bad Q/P");
    return static_cast<double>(q) / (1 + p);
}

double code_rate(int l, int k, int p) {
    if (l <= 0 || k <= 0 || p < 0) throw std::invalid_argument("code_rate: bad arguments");
    return static_cast<double>(l) / (static_cast<double>(k) * (1 + p));
}

std::pair<double, double> wilson_interval(long errors, long n, double z) {
    if (n <= 0 || errors < 0 || errors > n) throw std::invalid_argument("wilson_interval: bad counts");
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(errors) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (phat + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

void calibrate_models(EncoderModel& enc, DecoderModel& dec, const CodeConfig& cfg,
                      const ChannelParams& channel, long n_codewords, uint64_t seed, int workers) {
    cfg.validate();
    if (n_codewords <= 0) throw std::invalid_argument("calibrate_models: n_codewords must be > 0");
    const int k_max = cfg.symbols();
    const int p = cfg.p;
    const int channels = cfg.parity_norm_channels();
    const double sigma = channel.forward_sigma();
    const double sigma_fb = channel.feedback_sigma();
    const long chunks = chunk_count(n_codewords, kChunk);

    // pass 1: raw parity statistics (PSG inputs are exogenous noise, so no
    // channel interaction is needed here)
    {
        std::vector<Vec> sum(chunks, Vec(channels, 0.0));
        std::vector<Vec> sumsq(chunks, Vec(channels, 0.0));
        parallel_chunks(n_codewords, kChunk, workers, [&](long c, long begin, long end) {
            for (long i = begin; i < end; ++i) {
                Rng rng(mix_seed(mix_seed(seed, 1), static_cast<uint64_t>(i)));
                const Vec x = modulate(pad_message(random_info_bits(cfg.l_info, rng), cfg.pad_bits),
                                       cfg.q);
                Vec n0_est = rng.gaussian(k_max, sigma);
                if (sigma_fb > 0.0) {
                    const Vec g0 = rng.gaussian(k_max, sigma_fb);
                    for (int j = 0; j < k_max; ++j) n0_est[j] += g0[j];
                }
                std::vector<Vec> v_est(k_max);
                for (int k = 0; k < k_max; ++k) {
                    v_est[k] = rng.gaussian(p, sigma);
                    if (sigma_fb > 0.0) {
                        const Vec g = rng.gaussian(p, sigma_fb);
                        for (int l = 0; l < p; ++l) v_est[k][l] += g[l];
                    }
                }
                const PsgRun run = psg_run(enc, cfg, x, n0_est, v_est);
                for (int k = 0; k < k_max; ++k) {
                    for (int l = 0; l < p; ++l) {
                        const int ch = parity_norm_channel(cfg, k, l);
                        sum[c][ch] += run.raw[k][l];
                        sumsq[c][ch] += run.raw[k][l] * run.raw[k][l];
                    }
                }
            }
        });
        CalibStats stats;
        stats.count = n_codewords;
        stats.mean.assign(channels, 0.0);
        stats.var.assign(channels, 0.0);
        Vec total(channels, 0.0), total_sq(channels, 0.0);
        for (long c = 0; c < chunks; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                total[ch] += sum[c][ch];
                total_sq[ch] += sumsq[c][ch];
            }
        }
        const double samples =
            static_cast<double>(n_codewords) * (cfg.per_position_norm ? 1.0 : k_max);
        for (int ch = 0; ch < channels; ++ch) {
            stats.mean[ch] = total[ch] / samples;
            stats.var[ch] = total_sq[ch] / samples - stats.mean[ch] * stats.mean[ch];
            if (stats.var[ch] <= Whitener::kVarEps) stats.variance_guard_hit = true;
        }
        enc.calib = std::move(stats);
    }

    // pass 2: decoder top-layer state statistics over full episodes
    {
        const int h2 = 2 * cfg.h0;
        std::vector<Vec> sum(chunks, Vec(h2, 0.0));
        std::vector<Vec> sumsq(chunks, Vec(h2, 0.0));
        parallel_chunks(n_codewords, kChunk, workers, [&](long c, long begin, long end) {
            for (long i = begin; i < end; ++i) {
                Rng rng(mix_seed(mix_seed(seed, 2), static_cast<uint64_t>(i)));
                const Bits message = pad_message(random_info_bits(cfg.l_info, rng), cfg.pad_bits);
                const Transcript t = encode_interactive(enc, cfg, message, channel, rng);
                const StackRun run =
                    decoder_run_layers(dec, cfg, build_decoder_inputs(cfg, t.x_bar, t.p_bar));
                const std::vector<Vec> top = stack_outputs(run);
                for (const Vec& state : top) {
                    for (int e = 0; e < h2; ++e) {
                        sum[c][e] += state[e];
                        sumsq[c][e] += state[e] * state[e];
                    }
                }
            }
        });
        StateNormStats stats;
        stats.count = n_codewords;
        stats.mean.assign(h2, 0.0);
        stats.var.assign(h2, 0.0);
        Vec total(h2, 0.0), total_sq(h2, 0.0);
        for (long c = 0; c < chunks; ++c) {
            for (int e = 0; e < h2; ++e) {
                total[e] += sum[c][e];
                total_sq[e] += sumsq[c][e];
            }
        }
        const double samples = static_cast<double>(n_codewords) * k_max;
        for (int e = 0; e < h2; ++e) {
            stats.mean[e] = total[e] / samples;
            stats.var[e] = total_sq[e] / samples - stats.mean[e] * stats.mean[e];
        }
        dec.state_norm = std::move(stats);
    }
}

BlerReport run_lls(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                   const std::vector<double>& snr_list_db, const ChannelParams& base_channel,
                   long n_codewords, uint64_t seed, int workers) {
    cfg.validate();
    if (n_codewords < 1) throw std::invalid_argument("run_lls: n_codewords must be >= 1");
    if (!enc.calib.valid() || !dec.state_norm.valid()) {
        throw std::runtime_error("run_lls: model is not calibrated");
    }
    BlerReport report;
    report.info_bits = cfg.l_info;
    report.seed = static_cast<long>(seed);
    report.model_fingerprint = model_fingerprint(cfg, enc, dec);
    const long chunks = chunk_count(n_codewords, kChunk);
    const double symbols_per_cw = static_cast<double>(cfg.symbols()) * (1 + cfg.p);

    for (size_t s = 0; s < snr_list_db.size(); ++s) {
        ChannelParams channel = base_channel;
        channel.forward_snr_db = snr_list_db[s];
        std::vector<long> blk(chunks, 0), bit(chunks, 0);
        Vec energy(chunks, 0.0);
        parallel_chunks(n_codewords, kChunk, workers, [&](long c, long begin, long end) {
            for (long i = begin; i < end; ++i) {
                Rng rng(mix_seed(seed, static_cast<uint64_t>(s) * 0x10000000000ull +
                                           static_cast<uint64_t>(i)));
                const Bits info = random_info_bits(cfg.l_info, rng);
                const Bits message = pad_message(info, cfg.pad_bits);
                const Transcript t = encode_interactive(enc, cfg, message, channel, rng);
                const Vec probs = decode(dec, cfg, t.x_bar, t.p_bar);
                const Bits decided = hard_decision(probs);
                long errs = 0;
                for (int b = 0; b < cfg.l_info; ++b) errs += decided[b] != info[b];
                bit[c] += errs;
                blk[c] += errs > 0;
                energy[c] += transcript_energy(t);
            }
        });
        SnrPointStats pt;
        pt.snr_db = snr_list_db[s];
        pt.codewords = n_codewords;
        for (long c = 0; c < chunks; ++c) {
            pt.block_errors += blk[c];
            pt.bit_errors += bit[c];
            pt.avg_power += energy[c];
        }
        pt.bler = static_cast<double>(pt.block_errors) / n_codewords;
        pt.ber = static_cast<double>(pt.bit_errors) / (static_cast<double>(n_codewords) * cfg.l_info);
        std::tie(pt.bler_lo, pt.bler_hi) = wilson_interval(pt.block_errors, n_codewords);
        pt.avg_power /= static_cast<double>(n_codewords) * symbols_per_cw;
        report.points.push_back(pt);
    }
    return report;
}

Vec ber_by_position(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                    double snr_db, const ChannelParams& base_channel, long n_codewords,
                    uint64_t seed, int workers) {
    cfg.validate();
    if (!enc.calib.valid() || !dec.state_norm.valid()) {
        throw std::runtime_error("ber_by_position: model is not calibrated");
    }
    ChannelParams channel = base_channel;
    channel.forward_snr_db = snr_db;
    const long chunks = chunk_count(n_codewords, kChunk);
    std::vector<std::vector<long>> counts(chunks, std::vector<long>(cfg.l_info, 0));
    parallel_chunks(n_codewords, kChunk, workers, [&](long c, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
            const Bits info = random_info_bits(cfg.l_info, rng);
            const Transcript t =
                encode_interactive(enc, cfg, pad_message(info, cfg.pad_bits), channel, rng);
            const Bits decided = hard_decision(decode(dec, cfg, t.x_bar, t.p_bar));
            for (int b = 0; b < cfg.l_info; ++b) counts[c][b] += decided[b] != info[b];
        }
    });
    Vec rates(cfg.l_info, 0.0);
    for (long c = 0; c < chunks; ++c) {
        for (int b = 0; b < cfg.l_info; ++b) rates[b] += counts[c][b];
    }
    for (double& r : rates) r /= static_cast<double>(n_codewords);
    return rates;
}

void write_csv(const BlerReport& report, std::ostream& os) {
    std::ostringstream buf;
    buf.imbue(std::locale::classic());
    buf.precision(10);
    buf << "snr_db,codewords,block_errors,bler,bler_lo,bler_hi,ber,avg_power\n";
    for (const auto& pt : report.points) {
        buf << pt.snr_db << ',' << pt.codewords << ',' << pt.block_errors << ',' << pt.bler << ','
            << pt.bler_lo << ',' << pt.bler_hi << ',' << pt.ber << ',' << pt.avg_power << '\n';
    }
    os << buf.str();
}

}  // namespace def
