#include "lowlight/report.hpp"

#include <algorithm>
#include <cstdio>

#include "lowlight/error.hpp"

namespace lowlight::report {

namespace {

std::string printf_string(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string render(const Table& table) {
  const std::size_t cols = table.header.size();
  if (cols == 0) throw ArgumentError("table has no columns");
  std::vector<std::size_t> width(cols, 0);
  auto widen = [&](const std::vector<std::string>& row) {
    if (row.size() != cols) {
      throw ArgumentError("table row has " + std::to_string(row.size()) + " cells, expected " +
                          std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) width[c] = std::max(width[c], row[c].size());
  };
  widen(table.header);
  for (const auto& r : table.rows) widen(r);

  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c > 0) out += " | ";
      const std::string pad(width[c] - row[c].size(), ' ');
      out += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + '\n';
  };
  std::string out = line(table.header);
  std::string rule;
  for (std::size_t c = 0; c < cols; ++c) {
    if (c > 0) rule += "-|-";
    rule += std::string(width[c], '-');
  }
  out += rule + '\n';
  for (const auto& r : table.rows) out += line(r);
  return out;
}

std::string format_metric(double fraction) {
  if (fraction == eval::kUndefined) return "-";
  return printf_string("%.1f", fraction * 100.0);
}

std::string eval_table(const std::vector<EvalRow>& rows) {
  Table t{{"Method", "AP", "AP50", "AP75", "AP_S", "AP_M", "AP_L"}, {}};
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    t.rows.push_back({r.method, format_metric(m.ap), format_metric(m.ap50), format_metric(m.ap75),
                      format_metric(m.ap_s), format_metric(m.ap_m), format_metric(m.ap_l)});
  }
  return render(t);
}

eval::Metrics reference_metrics(nl::NLForm form) {
  eval::Metrics m;
  switch (form) {
    case nl::NLForm::DotProduct:
      m.ap = 0.161, m.ap50 = 0.293, m.ap75 = 0.157;
      break;
    case nl::NLForm::Gaussian:
      m.ap = 0.160, m.ap50 = 0.291, m.ap75 = 0.157;
      break;
    case nl::NLForm::EmbeddedGaussian:
      m.ap = 0.166, m.ap50 = 0.302, m.ap75 = 0.164;
      break;
  }
  return m;
}

std::string ablation_table(const std::vector<train::AblationRow>& rows) {
  Table t{{"Method", "Ref AP", "Ref AP50", "Ref AP75", "Initial loss", "Final loss", "Reduction",
           "w1", "w2", "w3", "w4"},
          {}};
  for (const auto& r : rows) {
    const auto ref = reference_metrics(r.form);
    std::vector<std::string> row{std::string(nl::form_label(r.form)), format_metric(ref.ap),
                                 format_metric(ref.ap50), format_metric(ref.ap75),
                                 printf_string("%.6e", r.result.initial_loss),
                                 printf_string("%.6e", r.result.final_loss)};
    const double reduction =
        r.result.initial_loss > 0.0 ? 1.0 - r.result.final_loss / r.result.initial_loss : 0.0;
    row.push_back(printf_string("%.1f%%", reduction * 100.0));
    for (double w : r.learned_w) row.push_back(printf_string("%.3f", w));
    t.rows.push_back(std::move(row));
  }
  return render(t);
}

}  // namespace lowlight::report
