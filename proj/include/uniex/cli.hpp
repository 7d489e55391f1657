#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uniex {

// Entry point of the uniex tool. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Config, seed, arguments and library versions of one run.
nlohmann::json make_manifest(const std::string& command, const std::vector<std::string>& args,
                             const nlohmann::json& config, std::uint64_t seed);
void write_manifest(const std::filesystem::path& path, const nlohmann::json& manifest);

// Level from UNIEX_LOG_LEVEL (trace, debug, info, warn, error, off); info
// when unset or unknown.
void configure_logging();

}  // namespace uniex
