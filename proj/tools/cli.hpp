#pragma once

#include <ostream>

namespace lrwb {

/// Entry point of the `lrwb` tool. Returns the process exit code: 0 on
/// success, 1 with a one-line `error: <code>: <message>` on failure, 2 on
/// usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrwb
