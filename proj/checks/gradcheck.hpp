#pragma once

#include <functional>
#include <string>

#include "liteseg/nn.hpp"
#include "ref_ops.hpp"

namespace liteseg::check {

// One gradient check: the engine builds a scalar loss from a flat list of
// tensors (inputs plus any weights under test); the reference evaluates the
// same scalar in double precision. Analytic gradients from the tape are
// compared against central finite differences of the reference at h = 1e-3,
// relative error < 1e-3 (with a unit floor for near-zero gradients).
struct GradCheckCase {
    std::string name;
    std::function<std::vector<Tensor>(Rng&)> make_inputs;
    std::vector<bool> check_grad;  // per input; others are held fixed
    std::function<Tensor(const std::vector<Tensor>&)> engine;
    std::function<double(const std::vector<ref::RefTensor>&)> ref;
    // Rejects draws too close to a non-differentiable point (max ties, ReLU
    // kinks, mining-selection boundaries); the harness redraws with the next
    // derived seed.
    std::function<bool(const std::vector<ref::RefTensor>&)> precondition;
};

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double forward_diff = 0.0;  // |engine loss - reference loss|
    bool pass = false;
    std::string note;
};

GradCheckResult run_gradcheck_case(const GradCheckCase& c, std::uint64_t seed,
                                   double tol = 1e-3, double step = 1e-3);

// Per-op checks (shapes <= 2x4x6x6) and composite-block checks
// (shapes <= 2x4x8x8).
std::vector<GradCheckCase> op_gradcheck_cases();
std::vector<GradCheckCase> block_gradcheck_cases();

// Runs everything; prints one line per check to stdout when verbose.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool verbose);
bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace liteseg::check
