#pragma once

#include <iosfwd>

namespace decadmm {

/// Randomized invariant checks over every module, a few seconds in total.
/// Prints one PASS/FAIL line per property and returns whether all passed.
bool run_selftest(std::ostream& os);

}  // namespace decadmm
