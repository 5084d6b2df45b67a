#pragma once

#include "ebproxy/simulation.hpp"
#include "ebproxy/types.hpp"

#include <string>
#include <vector>

namespace ebproxy {

// ---------------------------------------------------------------------------
// File formats. Both are plain CSV with a header line; parse errors report
// 1-based line numbers.
// ---------------------------------------------------------------------------

struct LabeledDataset {
  std::vector<std::string> area_ids;
  AreaDataset data;
};

/// Reads `area_id,count,sample_size[,cov1,cov2,...]`. The returned dataset is
/// already validated.
LabeledDataset read_area_dataset(const std::string& path);

/// Reads a population file `area_id,p,subquarter_id` and derives the spatial
/// means. Every sub-quarter needs at least two areas.
Population read_population(const std::string& path);

}  // namespace ebproxy
