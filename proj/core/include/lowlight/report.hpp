#pragma once

#include <string>
#include <vector>

#include "lowlight/evaluate.hpp"
#include "lowlight/trainer.hpp"

namespace lowlight::report {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// First column left-aligned, the rest right-aligned, separated by " | ", with
// a dashed rule under the header. Throws ArgumentError on ragged rows.
std::string render(const Table& table);

// Fraction rendered ×100 with one decimal; kUndefined (−1) becomes "-".
std::string format_metric(double fraction);

struct EvalRow {
  std::string method;
  eval::Metrics metrics;
};

// Method | AP | AP50 | AP75 | AP_S | AP_M | AP_L
std::string eval_table(const std::vector<EvalRow>& rows);

// Published large-scale numbers per NL form, shown next to the toy results.
eval::Metrics reference_metrics(nl::NLForm form);

// Method | AP | AP50 | AP75 (reference) | Initial loss | Final loss | Reduction | w1..w4
std::string ablation_table(const std::vector<train::AblationRow>& rows);

}  // namespace lowlight::report
