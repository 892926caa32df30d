#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace pmns {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSummarySchema = "pmns-summary/1";
inline constexpr const char* kManifestSchema = "pmns-manifest/1";

/// Subcommands that run an experiment from a configuration.
const std::vector<std::string>& experiment_subcommands();

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::vector<double>> ladder;
  std::optional<std::string> out_dir;
};

/// Parses a configuration file (JSON). Syntax errors are ValidationErrors.
Json load_config(const std::filesystem::path& path);
Json parse_config(const std::string& text);

/// Applies overrides, checks every key against the schema (unknown keys and missing required
/// keys are errors, all reported at once) and fills defaults. lattice.K is required unless a
/// ladder is given or the subcommand does not sample fields (bounds, kernel-check).
Json resolve_config(const Json& raw, const RunOverrides& ov, const std::string& subcommand = "");

/// Default configuration with every key, for documentation.
Json default_config();

struct RunOutcome {
  std::filesystem::path dir;
  Json summary;
};

/// Validates the whole plan, then creates a fresh run directory under run.out_dir and writes
/// the artifacts, summary.json and manifest.json.
RunOutcome execute(const Json& resolved, const std::string& subcommand);

/// Merges summary.json files of completed runs into report.csv (with log-log exponent fits over
/// K where a metric has at least three positive values) in a new directory under out_root.
RunOutcome report(const std::vector<std::filesystem::path>& run_dirs,
                  const std::filesystem::path& out_root);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// Out directory when neither the config nor a flag sets one: $PMNS_OUT_DIR or "runs".
std::string default_out_dir();

}  // namespace pmns
