#include "def/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace def {

double snr_db_to_sigma(double snr_db) {
    const double snr_linear = std::pow(10.0, snr_db / 10.0);
    return std::sqrt(1.0 / snr_linear);
}

std::pair<Vec, Vec> channel_forward(const Vec& tx, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("channel_forward: sigma must be >= 0");
    Vec noise = rng.gaussian(tx.size(), sigma);
    Vec received(tx);
    for (size_t i = 0; i < tx.size(); ++i) received[i] += noise[i];
    return {std::move(received), std::move(noise)};
}

Vec channel_feedback(const Vec& received, double sigma_fb, Rng& rng) {
    if (sigma_fb < 0.0) throw std::invalid_argument("channel_feedback: sigma must be >= 0");
    if (sigma_fb == 0.0) return received;
    Vec g = rng.gaussian(received.size(), sigma_fb);
    Vec out(received);
    for (size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    return out;
}

}  // namespace def
