#pragma once

#include "endo/simenv.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace endo {

using Json = nlohmann::ordered_json;

/**
 * @brief Everything an experiment can read from a scenario file.
 *
 * The file is a JSON object; every section is optional and unknown keys raise ConfigError.
 */
struct Scenario {
    EpisodeConfig episode = EpisodeConfig::defaults();
    PlatformConfig platform;
    std::vector<double> align_speeds{1.5, 2.0, 2.5};
    int sweep_repetitions = 5;
};

Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& s);

/** @brief Reads and parses a scenario file; an empty path yields the defaults. */
Json load_scenario_json(const std::string& path);

/**
 * @brief Applies "a.b.c=value" overrides to a scenario document.
 *
 * The value is parsed as JSON when possible and taken as a string otherwise.
 */
void apply_override(Json& doc, const std::string& assignment);

/** @brief FNV-1a over the compact dump; stable across runs and platforms. */
std::string config_hash(const Json& j);

/** @brief Column names of the episode transcript. */
std::vector<std::string> episode_csv_columns();

/** @brief Writes one row per sample after `#`-prefixed metadata lines. */
void write_episode_csv(std::ostream& os, const EpisodeLog& log, const std::vector<std::string>& metadata);

/** @brief Fixed-format number for CSV output (%.9g). */
std::string fmt(double v);

}  // namespace endo
