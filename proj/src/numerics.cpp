#include "def/numerics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace def {

Vec affine(const Matrix& a, const Vec& x, const Vec& b) {
    if (a.cols != static_cast<int>(x.size()) || a.rows != static_cast<int>(b.size())) {
        throw std::invalid_argument("affine: dimension mismatch (" + std::to_string(a.rows) + "x" +
                                    std::to_string(a.cols) + " vs x=" + std::to_string(x.size()) +
                                    ", b=" + std::to_string(b.size()) + ")");
    }
    Vec y(b);
    const double* row = a.data.data();
    for (int r = 0; r < a.rows; ++r, row += a.cols) {
        double acc = 0.0;
        for (int c = 0; c < a.cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
    return y;
}

void matvec_transposed_acc(const Matrix& a, const Vec& u, Vec& out) {
    if (a.rows != static_cast<int>(u.size()) || a.cols != static_cast<int>(out.size())) {
        throw std::invalid_argument("matvec_transposed_acc: dimension mismatch");
    }
    const double* row = a.data.data();
    for (int r = 0; r < a.rows; ++r, row += a.cols) {
        const double ur = u[r];
        for (int c = 0; c < a.cols; ++c) out[c] += row[c] * ur;
    }
}

void outer_acc(Matrix& m, const Vec& u, const Vec& v) {
    if (m.rows != static_cast<int>(u.size()) || m.cols != static_cast<int>(v.size())) {
        throw std::invalid_argument("outer_acc: dimension mismatch");
    }
    double* row = m.data.data();
    for (int r = 0; r < m.rows; ++r, row += m.cols) {
        const double ur = u[r];
        for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
    }
}

void check_finite(const Vec& v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::runtime_error("non-finite value in " + what);
    }
}

namespace {

uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so log() is safe.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

Vec Rng::gaussian(size_t n, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian: sigma must be >= 0");
    Vec out(n, 0.0);
    if (sigma == 0.0) return out;
    for (auto& x : out) x = sigma * normal();
    return out;
}

Rng Rng::split(uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (0x9e3779b97f4a7c15ull + b);
    uint64_t h = splitmix64(s);
    s ^= b;
    return h ^ splitmix64(s);
}

void AdamState::initialize(const ParamList& params) {
    m.clear();
    v.clear();
    for (const auto& blk : params) {
        m.emplace_back(blk.values.size(), 0.0);
        v.emplace_back(blk.values.size(), 0.0);
    }
    step_count = 0;
}

void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: block count mismatch");
    if (!state.initialized()) state.initialize(params);
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state block mismatch");

    ++state.step_count;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));

    for (size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values;
        auto g = grads[i].values;
        if (p.size() != g.size() || p.size() != state.m[i].size()) {
            throw std::invalid_argument("adam_step: shape mismatch in block " + params[i].name);
        }
        for (size_t j = 0; j < p.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw std::runtime_error("adam_step: non-finite gradient in block " + grads[i].name);
            }
            double& mj = state.m[i][j];
            double& vj = state.v[i][j];
            mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * g[j];
            vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double global_grad_norm(const ParamList& grads) {
    double sq = 0.0;
    for (const auto& blk : grads) {
        for (double g : blk.values) sq += g * g;
    }
    return std::sqrt(sq);
}

double clip_gradient_global(const ParamList& grads, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip_gradient_global: max_norm must be > 0");
    const double norm = global_grad_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& blk : grads) {
            for (double& g : blk.values) g *= scale;
        }
    }
    return norm;
}

void clip_gradient_elementwise(const ParamList& grads, double max_abs) {
    if (max_abs <= 0.0) throw std::invalid_argument("clip_gradient_elementwise: max_abs must be > 0");
    for (const auto& blk : grads) {
        for (double& g : blk.values) {
            if (g > max_abs) g = max_abs;
            if (g < -max_abs) g = -max_abs;
        }
    }
}

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, Vec x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be > 0");
    Vec grad(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

Whitener Whitener::fit(std::span<const double> xs) {
    Whitener w;
    if (xs.empty()) throw std::invalid_argument("Whitener::fit: empty sample set");
    double sum = 0.0;
    for (double x : xs) sum += x;
    w.mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) {
        const double d = x - w.mean;
        sq += d * d;
    }
    w.var = sq / static_cast<double>(xs.size());
    w.guarded = w.var <= kVarEps;
    w.inv_std = 1.0 / std::sqrt(w.guarded ? kVarEps : w.var);
    return w;
}

Whitener Whitener::from_stats(double mean, double var) {
    Whitener w;
    w.mean = mean;
    w.var = var;
    w.guarded = var <= kVarEps;
    w.inv_std = 1.0 / std::sqrt(w.guarded ? kVarEps : var);
    return w;
}

void Whitener::backward(std::span<const double> ys, std::span<const double> dys,
                        std::span<double> dxs) const {
    const size_t n = ys.size();
    if (dys.size() != n || dxs.size() != n) throw std::invalid_argument("Whitener::backward: size mismatch");
    double sum_dy = 0.0;
    double sum_dyy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sum_dy += dys[i];
        sum_dyy += dys[i] * ys[i];
    }
    const double mean_dy = sum_dy / static_cast<double>(n);
    const double mean_dyy = sum_dyy / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        // With the variance floor engaged the scale is a constant; only the
        // mean subtraction contributes to the Jacobian.
        const double centered = guarded ? (dys[i] - mean_dy) : (dys[i] - mean_dy - ys[i] * mean_dyy);
        dxs[i] = inv_std * centered;
    }
}

}  // namespace def
