#pragma once

#include <iosfwd>

namespace matfun::cli {

// Full command line including the program name. Returns the process exit
// code: 0 on success, 2 for usage errors, 1 for failures reported as
// `error: {"kind": ..., "message": ...}` on err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace matfun::cli
