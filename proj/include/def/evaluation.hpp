#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "def/channel.hpp"
#include "def/decoder.hpp"
#include "def/encoder.hpp"
#include "def/numerics.hpp"

namespace def {

double spectral_efficiency(int q, int p);
double code_rate(int l, int k, int p);

// 95% (z = 1.96) Wilson score interval for errors/n.
std::pair<double, double> wilson_interval(long errors, long n, double z = 1.96);

struct SnrPointStats {
    double snr_db = 0.0;
    long codewords = 0;
    long block_errors = 0;
    long bit_errors = 0;
    double bler = 0.0;
    double ber = 0.0;
    double bler_lo = 0.0;
    double bler_hi = 0.0;
    double avg_power = 0.0;  // measured mean transmitted symbol energy
};

struct BlerReport {
    std::vector<SnrPointStats> points;
    uint64_t model_fingerprint = 0;
    int info_bits = 0;
    long seed = 0;
};

// Fills the encoder's parity CalibStats and the decoder's StateNormStats by
// Monte-Carlo over n_codewords episodes (parity statistics first, then the
// decoder pass re-using them). Deterministic given the seed for any worker
// count: per-codeword generators are derived from the codeword index.
void calibrate_models(EncoderModel& enc, DecoderModel& dec, const CodeConfig& cfg,
                      const ChannelParams& channel, long n_codewords, uint64_t seed, int workers);

// Monte-Carlo link-level simulation. Block/bit errors are counted on the
// information bits only (pad stripped). Requires calibrated models.
BlerReport run_lls(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                   const std::vector<double>& snr_list_db, const ChannelParams& base_channel,
                   long n_codewords, uint64_t seed, int workers);

// Per-information-bit-position error rates at one SNR.
Vec ber_by_position(const EncoderModel& enc, const DecoderModel& dec, const CodeConfig& cfg,
                    double snr_db, const ChannelParams& base_channel, long n_codewords,
                    uint64_t seed, int workers);

// CSV with the fixed header
// snr_db,codewords,block_errors,bler,bler_lo,bler_hi,ber,avg_power
void write_csv(const BlerReport& report, std::ostream& os);

}  // namespace def
