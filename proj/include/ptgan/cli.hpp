#pragma once

namespace ptgan {

/// Command-line entry point. Exit codes: 0 success, 1 runtime error,
/// 2 usage error, 3 config error.
int cli_run(int argc, const char* const* argv);

}  // namespace ptgan
