#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace def {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small sizes only (H0 <= ~100), so no
// attempt at blocking or SIMD beyond what the compiler does.
struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
};

// y = A x + b
Vec affine(const Matrix& a, const Vec& x, const Vec& b);
// out += A^T u
void matvec_transposed_acc(const Matrix& a, const Vec& u, Vec& out);
// M += u v^T
void outer_acc(Matrix& m, const Vec& u, const Vec& v);

void check_finite(const Vec& v, const std::string& what);

// xoshiro256++ seeded through splitmix64. The generator and the Box-Muller
// Gaussian path below are fixed for the life of the project so that equal
// seeds give byte-identical sample streams on every platform.
struct Rng {
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    // uniform in [0, 1)
    double uniform();
    double uniform(double lo, double hi);
    // N(0, 1) via Box-Muller; the second sample of each pair is cached.
    double normal();
    Vec gaussian(size_t n, double sigma);

    // Deterministic child generator for worker `stream`. Children of the
    // same parent with distinct streams have distinct, fixed seeds.
    Rng split(uint64_t stream) const;

    uint64_t seed() const { return seed_; }

  private:
    std::array<uint64_t, 4> state_{};
    uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// 64-bit mix used for per-codeword seed derivation. Stable across releases.
uint64_t mix_seed(uint64_t a, uint64_t b);

// Named view into one parameter (or gradient) block of a model.
struct ParamBlock {
    std::string name;
    std::span<double> values;
};
using ParamList = std::vector<ParamBlock>;

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Vec> m;
    std::vector<Vec> v;
    long step_count = 0;

    void initialize(const ParamList& params);
    bool initialized() const { return !m.empty(); }
};

// Standard bias-corrected ADAM update, applied in place to `params`.
// Throws if a gradient block is non-finite (the block name is reported).
void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

double global_grad_norm(const ParamList& grads);

// Global L2-norm clipping across all blocks; returns the pre-clip norm.
double clip_gradient_global(const ParamList& grads, double max_norm = 1.0);
// Per-element alternative, kept behind a config flag.
void clip_gradient_elementwise(const ParamList& grads, double max_abs = 1.0);

// Central differences, default h = 1e-5. Test oracle; never used by the
// production forward/backward paths.
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5);

// Zero-mean/unit-variance whitening over one channel's sample set, with an
// epsilon floor on the variance. Used for parity normalization and decoder
// state normalization in batch (training) mode; the calibrated inference
// path reuses apply() with stored statistics.
struct Whitener {
    double mean = 0.0;
    double var = 0.0;
    double inv_std = 0.0;
    bool guarded = false;  // variance floored at kVarEps

    static constexpr double kVarEps = 1e-8;

    static Whitener fit(std::span<const double> xs);
    static Whitener from_stats(double mean, double var);

    double apply(double x) const { return (x - mean) * inv_std; }

    // Gradient of the whitening map (statistics included) given the
    // normalized outputs `ys` and upstream grads `dys`; writes into `dxs`.
    void backward(std::span<const double> ys, std::span<const double> dys,
                  std::span<double> dxs) const;
};

}  // namespace def
