#pragma once

#include <string>
#include <vector>

namespace divkit::cli {

/// Parse and execute one divkit invocation. args holds the arguments in
/// order, without the program name, e.g. {"analyze", "--input", "d.jsonl",
/// "--output-dir", "out"}. Returns the process exit code: 0 on success,
/// nonzero after printing "divkit: error: <reason>" to stderr.
int run(const std::vector<std::string>& args);

/// Convenience overload for main(): skips argv[0].
int run(int argc, const char* const* argv);

}  // namespace divkit::cli
