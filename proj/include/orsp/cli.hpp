#pragma once

namespace orsp {

/// Exit codes: 0 success, 1 usage error, 2 runtime failure,
/// 3 gradient-check failure.
int run_cli(int argc, const char* const* argv);

}  // namespace orsp
