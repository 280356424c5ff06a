#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "def/config.hpp"
#include "def/evaluation.hpp"
#include "def/gradcheck.hpp"
#include "def/model_io.hpp"
#include "def/training.hpp"

namespace {

using namespace def;

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--set expects key=value: " + s);
        apply_config_entry(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
}

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets,
                       int workers) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, sets);
    if (workers > 0) cfg.train.workers = workers;
    cfg.code.validate();
    return cfg;
}

long count_params(ParamList params) {
    long n = 0;
    for (const auto& b : params) n += static_cast<long>(b.values.size());
    return n;
}

int cmd_train(const RunConfig& cfg, const std::string& out_path) {
    const TrainOutcome outcome = train_full(cfg.train, cfg.code, cfg.channel, &std::cout);
    ModelFile model;
    model.config = cfg.code;
    model.encoder = outcome.encoder;
    model.decoder = outcome.decoder;
    model.train_seed = outcome.winning_seed;
    for (const auto& [seed, hist] : outcome.histories) {
        if (seed == outcome.winning_seed) model.history_digest = hist.digest();
    }
    save_model(model, out_path);
    std::cout << "winner seed=" << outcome.winning_seed << " kind=" << outcome.winning_kind
              << " fingerprint=" << std::hex
              << model_fingerprint(model.config, model.encoder, model.decoder) << std::dec
              << "\nsaved " << out_path << "\n";
    return 0;
}

int cmd_calibrate(const std::string& model_path, const std::string& out_path, long codewords,
                  uint64_t seed, int workers, const RunConfig& cfg) {
    ModelFile model = load_model(model_path);
    calibrate_models(model.encoder, model.decoder, model.config, cfg.channel, codewords, seed,
                     workers);
    if (model.encoder.calib.variance_guard_hit) {
        std::cerr << "warning: a parity stream hit the variance floor\n";
    }
    save_model(model, out_path.empty() ? model_path : out_path);
    std::cout << "calibrated over " << codewords << " codewords, saved "
              << (out_path.empty() ? model_path : out_path) << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::vector<double>& snrs, long codewords,
                 uint64_t seed, int workers, const RunConfig& cfg, const std::string& csv_path) {
    const ModelFile model = load_model(model_path);
    const BlerReport report =
        run_lls(model.encoder, model.decoder, model.config, snrs, cfg.channel, codewords, seed,
                workers);
    if (csv_path.empty()) {
        write_csv(report, std::cout);
    } else {
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot open " + csv_path);
        write_csv(report, out);
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string& model_path) {
    ModelFile model = load_model(model_path);
    const CodeConfig& c = model.config;
    std::cout << "l_info=" << c.l_info << " pad_bits=" << c.pad_bits << " q=" << c.q
              << " p=" << c.p << " h0=" << c.h0 << "\n";
    std::cout << "deltas=";
    for (size_t i = 0; i < c.deltas.size(); ++i) std::cout << (i ? "," : "") << c.deltas[i];
    std::cout << " gammas=";
    for (size_t i = 0; i < c.gammas.size(); ++i) std::cout << (i ? "," : "") << c.gammas[i];
    std::cout << "\nencoder_cell=" << cell_kind_name(c.encoder_cell)
              << " decoder_cell=" << cell_kind_name(c.decoder_cell)
              << " decoder_layers=" << c.decoder_layers << "\n";
    std::cout << "rate=" << c.code_rate() << " spectral_efficiency=" << c.spectral_efficiency()
              << "\n";
    std::cout << "encoder_params=" << count_params(model.encoder.params())
              << " decoder_params=" << count_params(model.decoder.params()) << "\n";
    std::cout << "calibrated=" << (model.encoder.calib.valid() ? "yes" : "no");
    if (model.encoder.calib.valid()) std::cout << " (" << model.encoder.calib.count << " codewords)";
    std::cout << "\ntrain_seed=" << model.train_seed << " history_digest=" << std::hex
              << model.history_digest << "\nfingerprint="
              << model_fingerprint(model.config, model.encoder, model.decoder) << std::dec << "\n";
    return 0;
}

void print_report(const std::string& title, const GradCheckReport& report, bool& all_pass) {
    std::cout << title << " (tol " << report.tolerance << ")\n";
    for (const auto& e : report.entries) {
        std::cout << "  " << (e.pass ? "ok  " : "FAIL") << " " << e.block
                  << " max_rel_error=" << e.max_rel_error << "\n";
    }
    all_pass = all_pass && report.pass;
}

int cmd_gradcheck(uint64_t seed) {
    bool all_pass = true;
    print_report("rnn cell", gradcheck_cell(CellKind::Rnn, 5, 4, 6, seed), all_pass);
    print_report("gru cell", gradcheck_cell(CellKind::Gru, 5, 4, 6, seed + 1), all_pass);
    print_report("lstm cell", gradcheck_cell(CellKind::Lstm, 5, 4, 6, seed + 2), all_pass);

    CodeConfig small;
    small.l_info = 5;
    small.pad_bits = 1;
    small.q = 2;
    small.p = 2;
    small.h0 = 4;
    small.deltas = {1, 2, 2};
    small.gammas = {1, 1, 1};
    small.encoder_cell = CellKind::Lstm;
    small.decoder_cell = CellKind::Gru;
    small.decoder_layers = 2;
    print_report("end-to-end", gradcheck_end_to_end(small, 8, seed + 3), all_pass);

    std::cout << (all_pass ? "gradcheck passed" : "gradcheck FAILED") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep extended feedback code trainer and link-level simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    uint64_t seed = 1;
    int workers = 0;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--set", sets, "config override key=value (repeatable)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "worker threads (0 = from config)");

    auto* train = app.add_subcommand("train", "train a code and save the winning model");
    std::string train_out = "model.defm";
    train->add_option("--out", train_out, "output model path");

    auto* calib = app.add_subcommand("calibrate", "recompute normalization statistics");
    std::string calib_model, calib_out;
    long calib_codewords = 100000;
    calib->add_option("--model", calib_model, "model path")->required();
    calib->add_option("--out", calib_out, "output path (default: overwrite input)");
    calib->add_option("--codewords", calib_codewords, "Monte-Carlo size");

    auto* eval = app.add_subcommand("evaluate", "link-level BLER/BER simulation");
    std::string eval_model, csv_path;
    std::vector<double> snrs{0.0};
    long eval_codewords = 100000;
    eval->add_option("--model", eval_model, "model path")->required();
    eval->add_option("--snr", snrs, "forward SNR points in dB");
    eval->add_option("--codewords", eval_codewords, "codewords per SNR point");
    eval->add_option("--csv", csv_path, "CSV output path (default: stdout)");

    auto* inspect = app.add_subcommand("inspect", "print a model summary");
    std::string inspect_model;
    inspect->add_option("--model", inspect_model, "model path")->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = build_config(config_path, sets, workers);
        const int w = cfg.train.workers;
        if (train->parsed()) return cmd_train(cfg, train_out);
        if (calib->parsed()) return cmd_calibrate(calib_model, calib_out, calib_codewords, seed, w, cfg);
        if (eval->parsed())
            return cmd_evaluate(eval_model, snrs, eval_codewords, seed, w, cfg, csv_path);
        if (inspect->parsed()) return cmd_inspect(inspect_model);
        if (gc->parsed()) return cmd_gradcheck(seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
