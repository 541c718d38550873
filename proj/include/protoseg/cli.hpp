#pragma once

namespace protoseg {

/// Full command-line front end. Returns the process exit code:
/// 0 ok, 1 usage error, 2 data/format error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace protoseg
