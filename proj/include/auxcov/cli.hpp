#pragma once

#include <ostream>

namespace auxcov::cli {

/// Parses and runs one command. Returns the process exit code: 0 on success,
/// 2 for input or configuration errors, 3 for numerical failures. Errors are
/// reported on `err` as a single `error: <Code>: <message>` line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace auxcov::cli
