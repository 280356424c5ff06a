#pragma once

#include <string>
#include <vector>

#include "def/cells.hpp"
#include "def/numerics.hpp"
#include "def/training.hpp"

namespace def {

struct GradCheckEntry {
    std::string block;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;
    bool pass = true;
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3)
double grad_rel_error(double analytic, double numeric);

// Checks cell_backward of one cell kind against central differences on a
// small random sequence (scalar loss = weighted sum of all hidden states).
GradCheckReport gradcheck_cell(CellKind kind, int state_size, int input_size, int steps,
                               uint64_t seed, double tol = 1e-5);

// Checks batch_loss_and_grads against central differences of batch_loss for
// every trainable block of a small encoder/decoder pair.
GradCheckReport gradcheck_end_to_end(const CodeConfig& cfg, int batch_size, uint64_t seed,
                                     double tol = 1e-4);

}  // namespace def
