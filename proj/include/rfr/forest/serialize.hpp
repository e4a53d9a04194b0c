#pragma once

#include <string>

#include "rfr/forest/forest.hpp"

namespace rfr {

// Single versioned JSON document. Terminal payloads persist the curves (or
// coefficients), not the merge bookkeeping; bootstrap samples persist as
// indices into system_ids and the out-of-bag matrix is rebuilt on load.
// Output bytes are deterministic for a given forest.
std::string forest_to_json(const ForestModel& forest);

// Throws DataError on malformed documents or version mismatches.
ForestModel forest_from_json(const std::string& text);

void save_forest(const ForestModel& forest, const std::string& path);
ForestModel load_forest(const std::string& path);

}  // namespace rfr
