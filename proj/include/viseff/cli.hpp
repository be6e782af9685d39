#pragma once
// Subcommand dispatcher: runs the analysis stages over one shared config,
// writing per-stage artifacts, a manifest per stage, and a generated schema
// reference. Exit codes: 0 success, 1 usage/config error, 2 data error.

namespace viseff::cli {

inline constexpr const char* kVersion = "1.0.0";

int run(int argc, char** argv);

}  // namespace viseff::cli
