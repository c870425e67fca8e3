#pragma once

// File formats: IPD and pseudo-population CSV, ALD JSON, simulation-study
// scenario outputs.

#include "popadj/covariate_sim.hpp"
#include "popadj/simstudy.hpp"
#include "popadj/trial_data.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace popadj {

/// Header x1..xK,z,y.
void write_ipd_csv(std::ostream& os, const IpdTrial& trial);
/// Effect modifiers are not part of the CSV; pass them separately.
IpdTrial read_ipd_csv(std::istream& is, const IndexSet& em_idx);

/// Header x1..xK.
void write_pseudo_csv(std::ostream& os, const PseudoPopulation& pseudo);

/// em_idx is written 1-based; corr is either a nested array or "from-IPD".
std::string ald_to_json(const AldSummary& ald);
AldSummary ald_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Writes <dir>/<name>.csv, <name>.json and <name>_replicates.csv.
void write_scenario_outputs(const std::string& dir, const ScenarioResult& result);
/// Reloads what write_scenario_outputs wrote for `cfg`. Empty when the files
/// are missing or were produced with a different seed, replicate count or
/// settings.
std::optional<ScenarioResult> read_scenario_outputs(const std::string& dir, const ScenarioConfig& cfg);

}  // namespace popadj
