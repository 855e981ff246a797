#pragma once

#include <iostream>

namespace kivi {

// Entry point shared by the kivi binary and the CLI tests.
// Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace kivi
