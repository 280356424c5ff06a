#include "def/model_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace def {

namespace {

constexpr char kMagic[4] = {'D', 'E', 'F', 'M'};

class ByteWriter {
  public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u64(bits);
    }
    void vec(const Vec& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void matrix(const Matrix& m) {
        i32(m.rows);
        i32(m.cols);
        for (double x : m.data) f64(x);
    }
    const std::string& bytes() const { return buf_; }

  private:
    std::string buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}

    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf_[pos_++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    Vec vec() {
        const uint64_t n = u64();
        if (n > (buf_.size() - pos_) / 8) throw std::runtime_error("model file: truncated vector");
        Vec v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    Matrix matrix() {
        const int32_t rows = i32();
        const int32_t cols = i32();
        Matrix m(rows, cols);
        if (m.rows < 0 || m.cols < 0 || m.size() > (buf_.size() - pos_) / 8) {
            throw std::runtime_error("model file: truncated matrix");
        }
        for (auto& x : m.data) x = f64();
        return m;
    }
    bool exhausted() const { return pos_ == buf_.size(); }

  private:
    void need(size_t n) {
        if (pos_ + n > buf_.size()) throw std::runtime_error("model file: unexpected end of data");
    }
    std::string buf_;
    size_t pos_ = 0;
};

void write_cell(ByteWriter& w, const CellWeights& c) {
    w.u8(static_cast<uint8_t>(c.kind));
    w.i32(c.state_size);
    w.i32(c.input_size);
    w.u32(static_cast<uint32_t>(c.w_state.size()));
    for (const auto& m : c.w_state) w.matrix(m);
    for (const auto& m : c.w_input) w.matrix(m);
    w.u32(static_cast<uint32_t>(c.bias.size()));
    for (const auto& b : c.bias) w.vec(b);
}

CellWeights read_cell(ByteReader& r) {
    CellWeights c;
    c.kind = static_cast<CellKind>(r.u8());
    if (c.kind != CellKind::Rnn && c.kind != CellKind::Gru && c.kind != CellKind::Lstm) {
        throw std::runtime_error("model file: invalid cell kind");
    }
    c.state_size = r.i32();
    c.input_size = r.i32();
    const uint32_t gates = r.u32();
    for (uint32_t g = 0; g < gates; ++g) c.w_state.push_back(r.matrix());
    for (uint32_t g = 0; g < gates; ++g) c.w_input.push_back(r.matrix());
    const uint32_t biases = r.u32();
    for (uint32_t b = 0; b < biases; ++b) c.bias.push_back(r.vec());
    return c;
}

void write_config(ByteWriter& w, const CodeConfig& cfg) {
    w.i32(cfg.l_info);
    w.i32(cfg.pad_bits);
    w.i32(cfg.q);
    w.i32(cfg.p);
    w.i32(cfg.h0);
    w.u32(static_cast<uint32_t>(cfg.deltas.size()));
    for (int d : cfg.deltas) w.i32(d);
    w.u32(static_cast<uint32_t>(cfg.gammas.size()));
    for (int g : cfg.gammas) w.i32(g);
    w.u8(static_cast<uint8_t>(cfg.encoder_cell));
    w.u8(static_cast<uint8_t>(cfg.decoder_cell));
    w.i32(cfg.decoder_layers);
    w.u8(cfg.per_position_norm ? 1 : 0);
}

CodeConfig read_config(ByteReader& r) {
    CodeConfig cfg;
    cfg.l_info = r.i32();
    cfg.pad_bits = r.i32();
    cfg.q = r.i32();
    cfg.p = r.i32();
    cfg.h0 = r.i32();
    cfg.deltas.assign(r.u32(), 0);
    for (auto& d : cfg.deltas) d = r.i32();
    cfg.gammas.assign(r.u32(), 0);
    for (auto& g : cfg.gammas) g = r.i32();
    cfg.encoder_cell = static_cast<CellKind>(r.u8());
    cfg.decoder_cell = static_cast<CellKind>(r.u8());
    cfg.decoder_layers = r.i32();
    cfg.per_position_norm = r.u8() != 0;
    return cfg;
}

void write_encoder(ByteWriter& w, const EncoderModel& m) {
    write_cell(w, m.cell);
    w.matrix(m.out_map);
    w.vec(m.out_bias);
    w.vec(m.w_levels);
    w.vec(m.a_levels);
    w.vec(m.calib.mean);
    w.vec(m.calib.var);
    w.u64(static_cast<uint64_t>(m.calib.count));
    w.u8(m.calib.variance_guard_hit ? 1 : 0);
}

EncoderModel read_encoder(ByteReader& r) {
    EncoderModel m;
    m.cell = read_cell(r);
    m.out_map = r.matrix();
    m.out_bias = r.vec();
    m.w_levels = r.vec();
    m.a_levels = r.vec();
    m.calib.mean = r.vec();
    m.calib.var = r.vec();
    m.calib.count = static_cast<long>(r.u64());
    m.calib.variance_guard_hit = r.u8() != 0;
    return m;
}

void write_decoder(ByteWriter& w, const DecoderModel& m) {
    w.u32(static_cast<uint32_t>(m.layers.size()));
    for (const auto& [fw, bw] : m.layers) {
        write_cell(w, fw);
        write_cell(w, bw);
    }
    w.matrix(m.out_map);
    w.vec(m.out_bias);
    w.vec(m.state_norm.mean);
    w.vec(m.state_norm.var);
    w.u64(static_cast<uint64_t>(m.state_norm.count));
}

DecoderModel read_decoder(ByteReader& r) {
    DecoderModel m;
    const uint32_t layers = r.u32();
    for (uint32_t l = 0; l < layers; ++l) {
        CellWeights fw = read_cell(r);
        CellWeights bw = read_cell(r);
        m.layers.emplace_back(std::move(fw), std::move(bw));
    }
    m.out_map = r.matrix();
    m.out_bias = r.vec();
    m.state_norm.mean = r.vec();
    m.state_norm.var = r.vec();
    m.state_norm.count = static_cast<long>(r.u64());
    return m;
}

uint64_t fnv1a_bytes(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

void save_model(const ModelFile& model, const std::string& path) {
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<uint8_t>(c));
    w.u32(ModelFile::kVersion);
    write_config(w, model.config);
    write_encoder(w, model.encoder);
    write_decoder(w, model.decoder);
    w.u64(model.train_seed);
    w.u64(model.history_digest);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    os.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    ByteReader r(std::move(bytes));
    for (char c : kMagic) {
        if (r.u8() != static_cast<uint8_t>(c)) {
            throw std::runtime_error("load_model: bad magic header in " + path);
        }
    }
    const uint32_t version = r.u32();
    if (version != ModelFile::kVersion) {
        throw std::runtime_error("load_model: unsupported format version " +
                                 std::to_string(version));
    }
    ModelFile m;
    m.config = read_config(r);
    m.encoder = read_encoder(r);
    m.decoder = read_decoder(r);
    m.train_seed = r.u64();
    m.history_digest = r.u64();
    if (!r.exhausted()) throw std::runtime_error("load_model: trailing bytes in " + path);
    m.config.validate();
    return m;
}

uint64_t model_fingerprint(const CodeConfig& cfg, const EncoderModel& enc,
                           const DecoderModel& dec) {
    ByteWriter w;
    write_config(w, cfg);
    write_encoder(w, enc);
    write_decoder(w, dec);
    return fnv1a_bytes(w.bytes());
}

}  // namespace def
