#pragma once

// Command-line verbs: prepare, extract-paths, train, evaluate, synth-kg,
// inspect. Exposed as a function so tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace ptransr::cli {

// Environment variable naming the default dataset directory.
inline constexpr const char* kDataDirEnv = "PTRANSR_DATA_DIR";

// `args` excludes the program name. Returns the process exit code; errors are
// reported on `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ptransr::cli
