#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppkit/bdrate.hpp"

namespace ppkit {

struct BdSequenceResult {
  std::string cls;       // e.g. "A1", "B"
  std::string sequence;  // e.g. "Campfire"
  double bd_percent = 0;
};

// Per-class means plus both overall aggregations (the source tables do not say
// which rule they use, so both are reported and labelled).
struct BdReport {
  std::vector<BdSequenceResult> rows;
  std::vector<std::pair<std::string, double>> class_means;  // first-appearance order
  double overall_mean_of_sequences = 0;
  double overall_mean_of_class_means = 0;
};

BdReport build_bd_report(const std::vector<BdSequenceResult>& rows);

// Aligned text table; byte-stable for identical inputs.
std::string render_bd_table(const BdReport& report);

// CSV mirror: `class,sequence,bd_rate_percent` with mean rows inline.
std::string render_bd_csv(const BdReport& report);

}  // namespace ppkit
