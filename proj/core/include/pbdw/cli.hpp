#pragma once

namespace pbdw {

/// Entry point behind the `pbdw` executable. Exit codes: 0 success,
/// 2 configuration/usage error, 3 numerical failure.
int cli_main(int argc, const char* const* argv);

}  // namespace pbdw
