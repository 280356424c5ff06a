#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "def/training.hpp"
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

TrainConfig tiny_train() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batches_per_epoch = 3;
    cfg.batch_size = 16;
    cfg.train_snr_db = 0.0;
    cfg.w_train_start_epoch = 1;
    cfg.a_train_start_epoch = 2;
    cfg.calib_codewords = 500;
    cfg.selection_codewords = 500;
    cfg.seeds = {1};
    return cfg;
}

bool same_weights(const EncoderModel& a, EncoderModel& b) {
    EncoderModel ac = a;
    ParamList pa = ac.params(), pb = b.params();
    for (size_t blk = 0; blk < pa.size(); ++blk) {
        for (size_t i = 0; i < pa[blk].values.size(); ++i) {
            if (pa[blk].values[i] != pb[blk].values[i]) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("bce analytic values") {
    CHECK(bce_loss({0.5, 0.5}, {0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss({0.9}, {1}) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
    CHECK(bce_loss({1.0, 0.0}, {1, 0}) <= 1e-11);  // clamp floor keeps it finite
}

TEST_CASE("learning-rate schedule drops exactly once") {
    TrainConfig cfg;
    CHECK(lr_at(0, cfg) == 0.02);
    CHECK(lr_at(999, cfg) == 0.02);
    CHECK(lr_at(1000, cfg) == doctest::Approx(0.002));
    CHECK(lr_at(19999, cfg) == doctest::Approx(0.002));
}

TEST_CASE("roll-back boundary is inclusive") {
    CHECK(rollback_discard(0.01, 0.1));        // exactly 10x -> discard
    CHECK_FALSE(rollback_discard(0.01, 0.05));
    CHECK_FALSE(rollback_discard(0.01, 0.0999));
    CHECK(rollback_discard(0.01, std::numeric_limits<double>::quiet_NaN()));
}

TEST_CASE("initial loss on random messages is near chance level") {
    const CodeConfig code = tiny_code();
    TrainConfig train = tiny_train();
    ChannelParams ch;
    Rng rng(100);
    EncoderModel enc = EncoderModel::init(code, rng);
    const DecoderModel dec = DecoderModel::init(code, rng);
    double total = 0.0;
    for (int b = 0; b < 10; ++b) {
        const BatchData data = sample_batch(code, ch, train.batch_size, rng);
        total += batch_loss(enc, dec, code, data);
    }
    CHECK(total / 10 == doctest::Approx(std::log(2.0)).epsilon(0.15 / std::log(2.0)));
}

TEST_CASE("batch loss is identical across worker counts") {
    const CodeConfig code = tiny_code();
    ChannelParams ch;
    Rng rng(200);
    EncoderModel enc = EncoderModel::init(code, rng);
    const DecoderModel dec = DecoderModel::init(code, rng);
    const BatchData data = sample_batch(code, ch, 40, rng);  // spans several chunks

    std::vector<Vec> probs1, probs4;
    const double l1 = batch_loss(enc, dec, code, data, 1, &probs1);
    const double l4 = batch_loss(enc, dec, code, data, 4, &probs4);
    CHECK(l1 == l4);
    CHECK(probs1 == probs4);

    EncoderModel ge1 = EncoderModel::zeros_like(enc), ge4 = EncoderModel::zeros_like(enc);
    DecoderModel gd1 = DecoderModel::zeros_like(dec), gd4 = DecoderModel::zeros_like(dec);
    CHECK(batch_loss_and_grads(enc, dec, code, data, ge1, gd1, 1) ==
          batch_loss_and_grads(enc, dec, code, data, ge4, gd4, 4));
    CHECK(same_weights(ge1, ge4));
}

TEST_CASE("power levels stay frozen until their start epochs") {
    const CodeConfig code = tiny_code();
    TrainConfig train = tiny_train();  // w unfreezes at epoch 1, a at epoch 2
    ChannelParams ch;
    Rng init(300);
    EncoderModel enc = EncoderModel::init(code, init);
    DecoderModel dec = DecoderModel::init(code, init);
    const Vec w0 = enc.w_levels, a0 = enc.a_levels;

    Trainer trainer(enc, dec, code, train, ch);
    Rng rng(301);
    for (int b = 0; b < 3; ++b) trainer.train_one_batch(rng);  // epoch 0
    CHECK(trainer.encoder().w_levels == w0);
    CHECK(trainer.encoder().a_levels == a0);
    for (int b = 0; b < 3; ++b) trainer.train_one_batch(rng);  // epoch 1: w trains
    CHECK(trainer.encoder().w_levels != w0);
    CHECK(trainer.encoder().a_levels == a0);
    trainer.train_one_batch(rng);  // epoch 2: a trains
    CHECK(trainer.encoder().a_levels != a0);

    // constraints hold after every step
    CHECK(trainer.encoder().w_constraint_error() <= 1e-9);
    CHECK(trainer.encoder().a_constraint_error() <= 1e-9);
}

TEST_CASE("roll-back restores weights and optimizer state bit-exactly") {
    const CodeConfig code = tiny_code();
    TrainConfig train = tiny_train();
    train.rollback_factor = 1.0;  // any non-decreasing loss triggers a discard
    ChannelParams ch;
    Rng init(400);
    EncoderModel enc = EncoderModel::init(code, init);
    DecoderModel dec = DecoderModel::init(code, init);

    Trainer trainer(enc, dec, code, train, ch);
    Rng rng(401);
    bool saw_rollback = false;
    // a discard undoes the previous accepted update, so the restored state is
    // the one the previous batch started from
    EncoderModel prev_entry = trainer.encoder();
    AdamState prev_adam = trainer.adam_state();
    for (int b = 0; b < 20 && !saw_rollback; ++b) {
        EncoderModel entry = trainer.encoder();
        AdamState adam_entry = trainer.adam_state();
        const BatchResult r = trainer.train_one_batch(rng);
        if (r.rolled_back && b > 0) {
            saw_rollback = true;
            EncoderModel after = trainer.encoder();
            CHECK(same_weights(prev_entry, after));
            CHECK(trainer.adam_state().m == prev_adam.m);
            CHECK(trainer.adam_state().v == prev_adam.v);
            CHECK(trainer.adam_state().step_count == prev_adam.step_count);
        }
        prev_entry = entry;
        prev_adam = adam_entry;
    }
    CHECK(saw_rollback);
    CHECK_FALSE(trainer.history().rollbacks.empty());
}

TEST_CASE("training trajectory is deterministic given the seed") {
    const CodeConfig code = tiny_code();
    const TrainConfig train = tiny_train();
    ChannelParams ch;
    TrainHistory h[2];
    for (int run = 0; run < 2; ++run) {
        Rng init(500);
        EncoderModel enc = EncoderModel::init(code, init);
        DecoderModel dec = DecoderModel::init(code, init);
        Trainer trainer(enc, dec, code, train, ch);
        Rng rng(501);
        for (long b = 0; b < train.total_batches(); ++b) trainer.train_one_batch(rng);
        h[run] = trainer.history();
    }
    CHECK(h[0].losses == h[1].losses);
    CHECK(h[0].digest() == h[1].digest());
}

TEST_CASE("tiny adam steps do not increase the batch loss") {
    const CodeConfig code = tiny_code();
    ChannelParams ch;
    int improved = 0;
    const int trials = 40;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(1000 + trial);
        EncoderModel enc = EncoderModel::init(code, rng);
        DecoderModel dec = DecoderModel::init(code, rng);
        const BatchData data = sample_batch(code, ch, 8, rng);
        EncoderModel eg = EncoderModel::zeros_like(enc);
        DecoderModel dg = DecoderModel::zeros_like(dec);
        const double before = batch_loss_and_grads(enc, dec, code, data, eg, dg);

        ParamList params = enc.params(), grads = eg.params();
        {
            ParamList d = dec.params(), g = dg.params();
            params.insert(params.end(), d.begin(), d.end());
            grads.insert(grads.end(), g.begin(), g.end());
        }
        AdamState adam;
        adam.initialize(params);
        adam_step(params, grads, adam, 1e-4);
        if (batch_loss(enc, dec, code, data) <= before) ++improved;
    }
    CHECK(improved >= trials * 95 / 100);
}

TEST_CASE("full training returns the snapshot with the lowest selection BLER") {
    CodeConfig code = tiny_code();
    TrainConfig train = tiny_train();
    train.seeds = {1, 2};
    ChannelParams ch;
    const TrainOutcome out = train_full(train, code, ch);
    CHECK(out.histories.size() == 2);
    CHECK(out.snapshot_evals.size() == 4);  // final + best per seed
    double winner_bler = -1.0;
    for (const auto& e : out.snapshot_evals) {
        if (e.seed == out.winning_seed && e.kind == out.winning_kind) {
            winner_bler = e.selection_bler;
        }
    }
    REQUIRE(winner_bler >= 0.0);
    for (const auto& e : out.snapshot_evals) CHECK(winner_bler <= e.selection_bler);
    CHECK(out.encoder.calib.valid());
    CHECK(out.decoder.state_norm.valid());
}
