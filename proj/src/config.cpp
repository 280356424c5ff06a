#include "def/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace def {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

int parse_int(const std::string& v) {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad integer: " + v);
    return r;
}

long parse_long(const std::string& v) {
    size_t pos = 0;
    const long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad integer: " + v);
    return r;
}

double parse_double(const std::string& v) {
    std::istringstream in(v);
    in.imbue(std::locale::classic());
    double r = 0.0;
    in >> r;
    if (in.fail() || !in.eof()) throw std::invalid_argument("bad number: " + v);
    return r;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("bad boolean: " + v);
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& v, Fn elem) {
    std::vector<T> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) out.push_back(elem(trim(item)));
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    // code
    if (key == "l_info") cfg.code.l_info = parse_int(value);
    else if (key == "pad_bits") cfg.code.pad_bits = parse_int(value);
    else if (key == "q") cfg.code.q = parse_int(value);
    else if (key == "p") cfg.code.p = parse_int(value);
    else if (key == "h0") cfg.code.h0 = parse_int(value);
    else if (key == "deltas") cfg.code.deltas = parse_list<int>(value, parse_int);
    else if (key == "gammas") cfg.code.gammas = parse_list<int>(value, parse_int);
    else if (key == "encoder_cell") cfg.code.encoder_cell = cell_kind_from_name(value);
    else if (key == "decoder_cell") cfg.code.decoder_cell = cell_kind_from_name(value);
    else if (key == "decoder_layers") cfg.code.decoder_layers = parse_int(value);
    else if (key == "per_position_norm") cfg.code.per_position_norm = parse_bool(value);
    // training
    else if (key == "epochs") cfg.train.epochs = parse_int(value);
    else if (key == "batches_per_epoch") cfg.train.batches_per_epoch = parse_int(value);
    else if (key == "batch_size") cfg.train.batch_size = parse_int(value);
    else if (key == "train_snr_db") cfg.train.train_snr_db = parse_double(value);
    else if (key == "lr_initial") cfg.train.lr_initial = parse_double(value);
    else if (key == "lr_drop_factor") cfg.train.lr_drop_factor = parse_double(value);
    else if (key == "lr_drop_after_batches") cfg.train.lr_drop_after_batches = parse_int(value);
    else if (key == "clip_norm") cfg.train.clip_norm = parse_double(value);
    else if (key == "clip_elementwise") cfg.train.clip_elementwise = parse_bool(value);
    else if (key == "rollback_factor") cfg.train.rollback_factor = parse_double(value);
    else if (key == "w_train_start_epoch") cfg.train.w_train_start_epoch = parse_int(value);
    else if (key == "a_train_start_epoch") cfg.train.a_train_start_epoch = parse_int(value);
    else if (key == "seeds")
        cfg.train.seeds = parse_list<uint64_t>(
            value, [](const std::string& s) { return static_cast<uint64_t>(parse_long(s)); });
    else if (key == "calib_codewords") cfg.train.calib_codewords = parse_long(value);
    else if (key == "selection_codewords") cfg.train.selection_codewords = parse_long(value);
    else if (key == "message_multiplier") cfg.train.message_multiplier = parse_int(value);
    else if (key == "workers") cfg.train.workers = parse_int(value);
    // channel
    else if (key == "forward_snr_db") cfg.channel.forward_snr_db = parse_double(value);
    else if (key == "feedback_snr_db") {
        if (value == "noiseless") cfg.channel.feedback_snr_db.reset();
        else cfg.channel.feedback_snr_db = parse_double(value);
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key=value");
        }
        try {
            apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " +
                                        e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace def
