#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "def/channel.hpp"
#include "doctest.h"

using namespace def;

TEST_CASE("snr to sigma conversions") {
    CHECK(snr_db_to_sigma(0.0) == doctest::Approx(1.0));
    const double s10 = snr_db_to_sigma(10.0);
    CHECK(s10 * s10 == doctest::Approx(0.1));

    ChannelParams noiseless;
    noiseless.feedback_snr_db.reset();
    CHECK(noiseless.noiseless_feedback());
    CHECK(noiseless.feedback_sigma() == 0.0);

    ChannelParams noisy;
    noisy.feedback_snr_db = 20.0;
    CHECK_FALSE(noisy.noiseless_feedback());
    CHECK(noisy.feedback_sigma() == doctest::Approx(0.1));
}

TEST_CASE("forward channel with zero sigma is the identity") {
    Rng rng(1);
    const Vec tx{1.0, -1.0, 0.5};
    const auto [rx, noise] = channel_forward(tx, 0.0, rng);
    CHECK(rx == tx);
    CHECK(noise == Vec{0, 0, 0});
}

TEST_CASE("forward channel is reproducible and additive") {
    const Vec tx{1.0, -1.0, 2.0, 0.0};
    Rng a(99), b(99);
    const auto [rx1, n1] = channel_forward(tx, 0.7, a);
    const auto [rx2, n2] = channel_forward(tx, 0.7, b);
    CHECK(rx1 == rx2);
    CHECK(n1 == n2);
    for (size_t i = 0; i < tx.size(); ++i) CHECK(rx1[i] == tx[i] + n1[i]);
}

TEST_CASE("forward noise has the configured variance") {
    Rng rng(17);
    const double sigma = 0.8;
    const Vec tx(1000000, 0.0);
    const auto [rx, noise] = channel_forward(tx, sigma, rng);
    double mean = 0, var = 0;
    for (double n : noise) mean += n;
    mean /= static_cast<double>(noise.size());
    for (double n : noise) var += (n - mean) * (n - mean);
    var /= static_cast<double>(noise.size());
    CHECK(std::abs(var - sigma * sigma) < 0.01 * sigma * sigma);
}

TEST_CASE("feedback channel identity and reproducibility") {
    Rng rng(2);
    const Vec rx{0.3, -0.7};
    CHECK(channel_feedback(rx, 0.0, rng) == rx);

    Rng a(5), b(5);
    CHECK(channel_feedback(rx, 0.1, a) == channel_feedback(rx, 0.1, b));
}

TEST_CASE("noise sequences across draws are uncorrelated") {
    Rng rng(23);
    const size_t n = 1000000;
    const Vec x = rng.gaussian(n, 1.0);
    const Vec y = rng.gaussian(n, 1.0);
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (size_t i = 0; i < n; ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    CHECK(std::abs(cov / std::sqrt(vx * vy)) < 0.01);
}
