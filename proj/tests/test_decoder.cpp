#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "def/decoder.hpp"
#include "def/gradcheck.hpp"
#include "doctest.h"

using namespace def;

namespace {

CodeConfig small_config() {
    CodeConfig cfg;
    cfg.l_info = 5;
    cfg.pad_bits = 1;
    cfg.q = 2;
    cfg.p = 2;
    cfg.h0 = 4;
    cfg.deltas = {1, 2, 2};
    cfg.gammas = {1, 1, 1};
    return cfg;
}

}  // namespace

TEST_CASE("decoder input layout") {
    Rng rng(1);
    const int k_max = 6;
    const Vec x_bar = rng.gaussian(k_max, 1.0);
    std::vector<Vec> p_bar(k_max);
    for (auto& row : p_bar) row = rng.gaussian(2, 1.0);

    SUBCASE("no extensions: current-position triple") {
        const Vec y3 = build_decoder_input(3, x_bar, p_bar, {0, 0, 0});
        CHECK(y3 == Vec{x_bar[3], p_bar[3][0], p_bar[3][1]});
    }
    SUBCASE("unit extensions: length 6 with one-step look-back") {
        const Vec y3 = build_decoder_input(3, x_bar, p_bar, {1, 1, 1});
        CHECK(y3 == Vec{x_bar[2], x_bar[3], p_bar[2][0], p_bar[3][0], p_bar[2][1], p_bar[3][1]});
    }
    SUBCASE("boundary zero-fill") {
        const Vec y0 = build_decoder_input(0, x_bar, p_bar, {1, 1, 1});
        CHECK(y0 == Vec{0.0, x_bar[0], 0.0, p_bar[0][0], 0.0, p_bar[0][1]});
    }
}

TEST_CASE("zero-weight decoder emits sigmoid of the output bias") {
    CodeConfig cfg = small_config();
    Rng rng(2);
    DecoderModel m = DecoderModel::init(cfg, rng);
    for (auto& [f, b] : m.layers) {
        f = CellWeights::zeros(f.kind, f.state_size, f.input_size);
        b = CellWeights::zeros(b.kind, b.state_size, b.input_size);
    }
    for (auto& x : m.out_map.data) x = 0.7;  // irrelevant: normalized states are 0
    m.out_bias = {0.4};
    m.state_norm.count = 1;
    m.state_norm.mean = Vec(2 * cfg.h0, 0.0);
    m.state_norm.var = Vec(2 * cfg.h0, 0.0);  // guard engages, states whiten to 0

    const Vec x_bar = rng.gaussian(cfg.symbols(), 1.0);
    std::vector<Vec> p_bar(cfg.symbols());
    for (auto& row : p_bar) row = rng.gaussian(cfg.p, 1.0);
    const Vec probs = decode(m, cfg, x_bar, p_bar);
    REQUIRE(probs.size() == static_cast<size_t>(cfg.message_length()));
    const double want = 1.0 / (1.0 + std::exp(-0.4));
    for (double p : probs) CHECK(p == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("decode output is a length-L probability vector") {
    CodeConfig cfg = small_config();
    Rng rng(3);
    DecoderModel m = DecoderModel::init(cfg, rng);
    m.state_norm.count = 1;
    m.state_norm.mean = Vec(2 * cfg.h0, 0.0);
    m.state_norm.var = Vec(2 * cfg.h0, 1.0);
    const Vec x_bar = rng.gaussian(cfg.symbols(), 1.0);
    std::vector<Vec> p_bar(cfg.symbols());
    for (auto& row : p_bar) row = rng.gaussian(cfg.p, 1.0);
    const Vec probs = decode(m, cfg, x_bar, p_bar);
    REQUIRE(probs.size() == static_cast<size_t>(cfg.message_length()));
    for (double p : probs) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("decode requires calibrated state statistics") {
    CodeConfig cfg = small_config();
    Rng rng(4);
    const DecoderModel m = DecoderModel::init(cfg, rng);
    const Vec x_bar(cfg.symbols(), 0.0);
    const std::vector<Vec> p_bar(cfg.symbols(), Vec(cfg.p, 0.0));
    CHECK_THROWS(decode(m, cfg, x_bar, p_bar));
}

TEST_CASE("decode matches a direct unrolled evaluation") {
    CodeConfig cfg = small_config();
    cfg.decoder_layers = 1;
    Rng rng(5);
    DecoderModel m = DecoderModel::init(cfg, rng);
    m.state_norm.count = 1;
    m.state_norm.mean = rng.gaussian(2 * cfg.h0, 0.2);
    m.state_norm.var = Vec(2 * cfg.h0, 1.3);

    const Vec x_bar = rng.gaussian(cfg.symbols(), 1.0);
    std::vector<Vec> p_bar(cfg.symbols());
    for (auto& row : p_bar) row = rng.gaussian(cfg.p, 1.0);

    const Vec got = decode(m, cfg, x_bar, p_bar);

    // hand-unrolled: inputs -> bidirectional run -> whiten -> sigmoid(C.+d)
    const std::vector<Vec> inputs = build_decoder_inputs(cfg, x_bar, p_bar);
    const BidirRun run = bidirectional_forward(m.layers[0].first, m.layers[0].second, inputs);
    for (int k = 0; k < cfg.symbols(); ++k) {
        double pre = m.out_bias[0];
        for (int e = 0; e < cfg.h0; ++e) {
            const double f = (run.fwd.states[k][e] - m.state_norm.mean[e]) /
                             std::sqrt(m.state_norm.var[e]);
            const double b = (run.bwd.states[k][e] - m.state_norm.mean[cfg.h0 + e]) /
                             std::sqrt(m.state_norm.var[cfg.h0 + e]);
            pre += m.out_map.at(0, e) * f + m.out_map.at(0, cfg.h0 + e) * b;
        }
        CHECK(got[k] == doctest::Approx(1.0 / (1.0 + std::exp(-pre))).epsilon(1e-12));
    }
}

TEST_CASE("information flows backward through the bidirectional stack") {
    // perturbing a late received symbol must change early bit probabilities
    CodeConfig cfg = small_config();
    Rng rng(6);
    DecoderModel m = DecoderModel::init(cfg, rng);
    m.state_norm.count = 1;
    m.state_norm.mean = Vec(2 * cfg.h0, 0.0);
    m.state_norm.var = Vec(2 * cfg.h0, 1.0);
    const Vec x_bar = rng.gaussian(cfg.symbols(), 1.0);
    std::vector<Vec> p_bar(cfg.symbols());
    for (auto& row : p_bar) row = rng.gaussian(cfg.p, 1.0);

    const Vec base = decode(m, cfg, x_bar, p_bar);
    Vec x2 = x_bar;
    x2[cfg.symbols() - 1] += 0.5;
    const Vec moved = decode(m, cfg, x2, p_bar);
    CHECK(std::abs(moved[0] - base[0]) > 1e-12);
}

TEST_CASE("scatter of input gradients inverts the gather") {
    CodeConfig cfg = small_config();
    Rng rng(7);
    const int k_max = cfg.symbols();
    const Vec x_bar = rng.gaussian(k_max, 1.0);
    std::vector<Vec> p_bar(k_max);
    for (auto& row : p_bar) row = rng.gaussian(cfg.p, 1.0);

    // loss = sum of all input vector entries; each source symbol must receive
    // a gradient equal to its number of appearances across the windows
    const std::vector<Vec> inputs = build_decoder_inputs(cfg, x_bar, p_bar);
    std::vector<Vec> ones(inputs.size());
    for (size_t k = 0; k < inputs.size(); ++k) ones[k] = Vec(inputs[k].size(), 1.0);
    Vec gx(k_max, 0.0);
    std::vector<Vec> gp(k_max, Vec(cfg.p, 0.0));
    scatter_decoder_input_grads(cfg, ones, gx, gp);

    for (int k = 0; k < k_max; ++k) {
        // with gamma=1 each interior symbol appears in windows k and k+1
        const double appearances = (k + 1 < k_max) ? 2.0 : 1.0;
        CHECK(gx[k] == appearances);
        for (int l = 0; l < cfg.p; ++l) CHECK(gp[k][l] == appearances);
    }
}

TEST_CASE("end-to-end gradients agree with finite differences") {
    CodeConfig cfg = small_config();
    cfg.h0 = 3;
    const GradCheckReport r = gradcheck_end_to_end(cfg, 6, 12345);
    for (const auto& e : r.entries) {
        INFO(e.block, " rel_error=", e.max_rel_error);
        CHECK(e.pass);
    }
    CHECK(r.pass);
}
