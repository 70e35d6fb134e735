#pragma once

#include <ostream>

namespace ckh {

/// Entry point of the `ckh` tool. Exit codes: 0 success, 1 runtime failure,
/// 2 usage error (bad flags, missing or invalid configuration).
int cli_main(int argc, char** argv);

/// Built-in oracle checks; prints one line per check and returns true when
/// all of them pass.
bool run_selftest(std::ostream& out);

}  // namespace ckh
