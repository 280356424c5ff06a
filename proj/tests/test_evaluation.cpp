#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "def/config.hpp"
#include "def/evaluation.hpp"
#include "def/model_io.hpp"
#include "def/modulation.hpp"
#include "doctest.h"

using namespace def;

namespace {

CodeConfig tiny_code() {
    CodeConfig cfg;
    cfg.l_info = 5;
    cfg.pad_bits = 1;
    cfg.q = 2;
    cfg.p = 2;
    cfg.h0 = 4;
    cfg.deltas = {1, 2, 2};
    cfg.gammas = {0, 0, 0};
    return cfg;
}

std::pair<EncoderModel, DecoderModel> calibrated_models(const CodeConfig& cfg,
                                                        const ChannelParams& ch, uint64_t seed) {
    Rng rng(seed);
    EncoderModel enc = EncoderModel::init(cfg, rng);
    DecoderModel dec = DecoderModel::init(cfg, rng);
    calibrate_models(enc, dec, cfg, ch, 2000, seed + 1, 1);
    return {enc, dec};
}

}  // namespace

TEST_CASE("spectral efficiency and code rate formulas") {
    CHECK(spectral_efficiency(2, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(spectral_efficiency(4, 2) == doctest::Approx(4.0 / 3.0));
    CHECK(spectral_efficiency(2, 0) == 2.0);
    CHECK(code_rate(50, 50, 2) == doctest::Approx(1.0 / 3.0));
    CHECK(code_rate(100, 50, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(code_rate(10, 10, 0) == 1.0);
}

TEST_CASE("wilson interval basics and scaling") {
    const auto [lo, hi] = wilson_interval(0, 1000);
    CHECK(lo == 0.0);
    CHECK(hi > 0.0);  // zero observed errors still gives a one-sided bound
    CHECK(hi < 0.01);

    const auto [lo1, hi1] = wilson_interval(50, 1000);
    const auto [lo2, hi2] = wilson_interval(100, 2000);
    const double w1 = hi1 - lo1, w2 = hi2 - lo2;
    CHECK(w2 / w1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.10));

    CHECK_THROWS(wilson_interval(-1, 10));
    CHECK_THROWS(wilson_interval(11, 10));
}

TEST_CASE("hard-decision error rate of uncoded signalling matches the gaussian tail") {
    // +/-1 at 0 dB: error probability is Phi(-1) ~ 0.158655
    Rng rng(7);
    const long n = 100000;
    long errors = 0;
    for (long i = 0; i < n; ++i) {
        const double bit = (rng.next_u64() & 1) ? 1.0 : -1.0;
        const double rx = bit + rng.normal();
        if ((rx > 0) != (bit > 0)) ++errors;
    }
    const double rate = static_cast<double>(errors) / n;
    CHECK(rate == doctest::Approx(0.158655).epsilon(0.003 / 0.158655));
}

TEST_CASE("calibration brings fresh parity streams to zero mean, unit variance") {
    const CodeConfig cfg = tiny_code();
    ChannelParams ch;
    auto [enc, dec] = calibrated_models(cfg, ch, 11);

    // fresh run with a different seed: normalized raw parities per stream
    Rng rng(999);
    Vec sum(cfg.p, 0.0), sumsq(cfg.p, 0.0);
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        Bits info(cfg.l_info);
        for (auto& b : info) b = rng.next_u64() & 1;
        const Transcript t = encode_interactive(enc, cfg, pad_message(info, cfg.pad_bits), ch, rng);
        for (int k = 0; k < cfg.symbols(); ++k) {
            for (int l = 0; l < cfg.p; ++l) {
                sum[l] += t.p_norm[k][l];
                sumsq[l] += t.p_norm[k][l] * t.p_norm[k][l];
            }
        }
    }
    const double samples = static_cast<double>(n) * cfg.symbols();
    for (int l = 0; l < cfg.p; ++l) {
        const double mean = sum[l] / samples;
        const double var = sumsq[l] / samples - mean * mean;
        CHECK(std::abs(mean) <= 0.02);
        CHECK(std::abs(var - 1.0) <= 0.05);
    }
}

TEST_CASE("link-level simulation requires calibration and is deterministic") {
    const CodeConfig cfg = tiny_code();
    ChannelParams ch;
    Rng rng(13);
    EncoderModel enc = EncoderModel::init(cfg, rng);
    DecoderModel dec = DecoderModel::init(cfg, rng);
    CHECK_THROWS(run_lls(enc, dec, cfg, {0.0}, ch, 100, 1, 1));

    calibrate_models(enc, dec, cfg, ch, 1000, 14, 1);
    const BlerReport a = run_lls(enc, dec, cfg, {0.0, 2.0}, ch, 2000, 42, 1);
    const BlerReport b = run_lls(enc, dec, cfg, {0.0, 2.0}, ch, 2000, 42, 4);
    REQUIRE(a.points.size() == 2);
    for (size_t s = 0; s < 2; ++s) {
        CHECK(a.points[s].block_errors == b.points[s].block_errors);
        CHECK(a.points[s].bit_errors == b.points[s].bit_errors);
        CHECK(a.points[s].avg_power == b.points[s].avg_power);
    }
    CHECK(a.model_fingerprint == model_fingerprint(cfg, enc, dec));
    // measured average transmit power near nominal
    CHECK(a.points[0].avg_power == doctest::Approx(1.0).epsilon(0.05));
    // counting consistency
    CHECK(a.points[0].bler >= a.points[0].ber);
}

TEST_CASE("per-position error rates agree with the overall BER") {
    const CodeConfig cfg = tiny_code();
    ChannelParams ch;
    auto [enc, dec] = calibrated_models(cfg, ch, 17);
    const long n = 2000;
    const uint64_t seed = 77;
    const Vec rates = ber_by_position(enc, dec, cfg, 0.0, ch, n, seed, 2);
    REQUIRE(rates.size() == static_cast<size_t>(cfg.l_info));
    double sum = 0;
    for (double r : rates) sum += r;
    // first SNR point of run_lls derives codeword seeds the same way
    const BlerReport rep = run_lls(enc, dec, cfg, {0.0}, ch, n, seed, 2);
    CHECK(sum / cfg.l_info == doctest::Approx(rep.points[0].ber).epsilon(1e-12));
}

TEST_CASE("csv output contract") {
    BlerReport rep;
    SnrPointStats pt;
    pt.snr_db = 0.5;
    pt.codewords = 1000;
    pt.block_errors = 10;
    pt.bler = 0.01;
    pt.bler_lo = 0.005;
    pt.bler_hi = 0.018;
    pt.ber = 0.001;
    pt.avg_power = 0.98;
    rep.points.push_back(pt);
    std::ostringstream os;
    write_csv(rep, os);
    std::istringstream in(os.str());
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "snr_db,codewords,block_errors,bler,bler_lo,bler_hi,ber,avg_power");
    CHECK(row.substr(0, 19) == "0.5,1000,10,0.01,0.");
}

TEST_CASE("model files round-trip bit-exactly") {
    const CodeConfig cfg = tiny_code();
    ChannelParams ch;
    auto [enc, dec] = calibrated_models(cfg, ch, 23);
    ModelFile model;
    model.config = cfg;
    model.encoder = enc;
    model.decoder = dec;
    model.train_seed = 5;
    model.history_digest = 0xabcdef;

    const std::string path = "test_model_roundtrip.defm";
    save_model(model, path);
    ModelFile loaded = load_model(path);
    CHECK(model_fingerprint(loaded.config, loaded.encoder, loaded.decoder) ==
          model_fingerprint(cfg, enc, dec));
    CHECK(loaded.train_seed == 5);
    CHECK(loaded.history_digest == 0xabcdef);
    CHECK(loaded.encoder.calib.mean == enc.calib.mean);
    CHECK(loaded.decoder.state_norm.var == dec.state_norm.var);
    CHECK(loaded.encoder.cell.w_state[0].data == enc.cell.w_state[0].data);
    CHECK(loaded.config.deltas == cfg.deltas);

    // truncation must fail loudly, leaving no partial model
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::string trunc_path = "test_model_truncated.defm";
    std::ofstream out(trunc_path, std::ios::binary);
    out.write(bytes.data(), static_cast<long>(bytes.size() / 2));
    out.close();
    CHECK_THROWS(load_model(trunc_path));

    // wrong magic
    const std::string bad_path = "test_model_badmagic.defm";
    std::ofstream bad(bad_path, std::ios::binary);
    bad << "NOPE" << bytes.substr(4);
    bad.close();
    CHECK_THROWS(load_model(bad_path));

    std::remove(path.c_str());
    std::remove(trunc_path.c_str());
    std::remove(bad_path.c_str());
}

TEST_CASE("config files parse into the run configuration") {
    const std::string text =
        "# comment line\n"
        "l_info = 24\n"
        "pad_bits = 1\n"
        "h0 = 25\n"
        "deltas = 1,2,2\n"
        "gammas = 0,0,0\n"
        "encoder_cell = lstm\n"
        "decoder_cell = lstm\n"
        "batch_size = 250\n"
        "epochs = 200\n"
        "train_snr_db = 0\n"
        "forward_snr_db = 0\n"
        "feedback_snr_db = noiseless\n"
        "seeds = 1,2,3\n";
    const RunConfig cfg = parse_config(text);
    CHECK(cfg.code.l_info == 24);
    CHECK(cfg.code.h0 == 25);
    CHECK(cfg.code.deltas == std::vector<int>{1, 2, 2});
    CHECK(cfg.code.gammas == std::vector<int>{0, 0, 0});
    CHECK(cfg.code.encoder_cell == CellKind::Lstm);
    CHECK(cfg.train.batch_size == 250);
    CHECK(cfg.train.epochs == 200);
    CHECK(cfg.channel.noiseless_feedback());
    CHECK(cfg.train.seeds == std::vector<uint64_t>{1, 2, 3});

    CHECK_THROWS(parse_config("unknown_key = 3\n"));
    CHECK_THROWS(parse_config("l_info\n"));

    RunConfig o;
    apply_config_entry(o, "feedback_snr_db", "15");
    CHECK(o.channel.feedback_snr_db == 15.0);
}
