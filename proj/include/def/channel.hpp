#pragma once

#include <optional>
#include <vector>

#include "def/numerics.hpp"

namespace def {

// sigma = sqrt(1 / 10^(snr_db/10))
double snr_db_to_sigma(double snr_db);

struct ChannelParams {
    double forward_snr_db = 0.0;
    // nullopt = noiseless feedback
    std::optional<double> feedback_snr_db;

    double forward_sigma() const { return snr_db_to_sigma(forward_snr_db); }
    double feedback_sigma() const {
        return feedback_snr_db ? snr_db_to_sigma(*feedback_snr_db) : 0.0;
    }
    bool noiseless_feedback() const { return !feedback_snr_db.has_value(); }
};

// received = tx + noise, noise ~ N(0, sigma^2) i.i.d. The noise realization
// is returned alongside so transcripts can retain it.
std::pair<Vec, Vec> channel_forward(const Vec& tx, double sigma, Rng& rng);

// fed_back = received + g, g ~ N(0, sigma_fb^2); sigma_fb = 0 is the identity.
Vec channel_feedback(const Vec& received, double sigma_fb, Rng& rng);

// Full channel interaction record for one codeword. All per-iteration
// containers are indexed [k][l], k = 0..K-1, l = 0..P-1.
struct Transcript {
    Vec x;        // unscaled systematic symbols
    Vec x_tx;     // power-scaled transmitted systematic symbols
    Vec n0;       // forward noise, phase 1
    Vec g0;       // feedback noise, phase 1
    Vec x_bar;    // received: x_tx + n0
    Vec x_tilde;  // fed back: x_bar + g0
    Vec n0_est;   // transmitter's estimate x_tilde - x_tx (= n0 when feedback is noiseless)

    std::vector<Vec> p_raw;    // raw PSG outputs e(h_k)
    std::vector<Vec> p_norm;   // normalized parities
    std::vector<Vec> p_tx;     // power-scaled transmitted parities
    std::vector<Vec> v;        // forward noise per iteration
    std::vector<Vec> g;        // feedback noise per iteration
    std::vector<Vec> p_bar;    // received: p_tx + v
    std::vector<Vec> p_tilde;  // fed back: p_bar + g
    std::vector<Vec> v_est;    // transmitter's estimate p_tilde - p_tx
};

}  // namespace def
