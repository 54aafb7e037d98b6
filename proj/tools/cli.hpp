#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace warmopf::cli {

/// Exit codes outside the module error families (see README).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitUsage = 2;

/// Root seed used when --seed is not given.
inline constexpr unsigned long long kDefaultSeed = 42;

/// The full command tree with every option; used by run() and by the docs test.
std::unique_ptr<CLI::App> build_app();

/// Runs the command line `args` (without the program name). Results go to
/// `out`, progress and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace warmopf::cli
