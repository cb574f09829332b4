#pragma once

#include <functional>
#include <iosfwd>

namespace dass::cli {

enum ExitCode { ok = 0, failure = 1, validation = 2, engine = 3, io = 4 };

struct Hooks {
    /// Runs the acceptance suite, prints its table, returns an exit code.
    std::function<int(std::ostream&)> repro_acceptance;
};

/// The `dass` command line. Output files are written whole or not at all.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks = {});

}  // namespace dass::cli
