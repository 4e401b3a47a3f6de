#include <doctest.h>

#include "gradcheck.hpp"

using namespace liteseg;

// The finite-difference suite doubles as the per-op gradient property: every
// differentiable op and composite block, analytic vs central differences of
// the double-precision reference, relative error < 1e-3.
TEST_CASE("gradient suite: every op check passes") {
    for (const auto& c : check::op_gradcheck_cases()) {
        check::GradCheckResult r = check::run_gradcheck_case(c, 42);
        INFO(r.name, ": ", r.note, " max_rel=", r.max_rel_err);
        CHECK(r.pass);
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("gradient suite: every composite block check passes") {
    for (const auto& c : check::block_gradcheck_cases()) {
        check::GradCheckResult r = check::run_gradcheck_case(c, 42);
        INFO(r.name, ": ", r.note, " max_rel=", r.max_rel_err);
        CHECK(r.pass);
    }
}

TEST_CASE("gradient suite: stable across different base seeds") {
    for (std::uint64_t seed : {7ULL, 1234ULL}) {
        auto results = check::run_gradcheck_suite(seed, /*verbose=*/false);
        CHECK(check::all_passed(results));
    }
}
