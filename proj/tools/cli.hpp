#pragma once

#include <iosfwd>

namespace bpinpaint::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kDivergence = 4,
};

/// Entry point shared by the executable and in-process tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bpinpaint::cli
