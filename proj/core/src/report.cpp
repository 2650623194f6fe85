#include "stereoref/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace stereoref {

namespace {

std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // Avoid "-0.000000" for values that round to zero.
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string csv_variant(const VariantScore& v) {
  return ',' + fixed(v.bad_percent, 6) + ',' + fixed(v.rmse_depth, 6) + ',' + fixed(v.rmse_disparity, 6);
}

std::string csv_summary(const AggregateScore& a, bool mean) {
  auto pick = [mean](const Summary& s) { return mean ? s.mean : s.stddev; };
  return ',' + fixed(pick(a.bad_percent), 6) + ',' + fixed(pick(a.rmse_depth), 6) + ',' +
         fixed(pick(a.rmse_disparity), 6);
}

}  // namespace

std::string format_mean_std(const Summary& s, int decimals) {
  return fixed(s.mean, decimals) + " (\xC2\xB1" + fixed(s.stddev, decimals) + ")";
}

void write_report_csv(std::ostream& os, const std::vector<MethodReport>& reports, bool with_included) {
  os << "method,id,bad_excl,rmse_depth_excl,rmse_disp_excl";
  if (with_included) os << ",bad_incl,rmse_depth_incl,rmse_disp_incl";
  os << ",eligible_excl";
  if (with_included) os << ",eligible_incl";
  os << ",est_invalid_excl";
  if (with_included) os << ",est_invalid_incl";
  os << '\n';
  for (const MethodReport& m : reports) {
    for (const ImageScore& s : m.report.images) {
      os << m.method << ',' << s.id << csv_variant(s.excluded);
      if (with_included) os << csv_variant(s.included);
      os << ',' << s.excluded.eligible;
      if (with_included) os << ',' << s.included.eligible;
      os << ',' << s.excluded.est_invalid;
      if (with_included) os << ',' << s.included.est_invalid;
      os << '\n';
    }
    for (bool mean : {true, false}) {
      os << m.method << ',' << (mean ? "mean" : "std") << csv_summary(m.report.excluded, mean);
      if (with_included) os << csv_summary(m.report.included, mean);
      os << (with_included ? ",,,," : ",,") << '\n';
    }
  }
}

void write_report_table(std::ostream& os, const std::vector<MethodReport>& reports, double bad_threshold,
                        bool with_included) {
  char bad[32];
  std::snprintf(bad, sizeof bad, "Bad%g %%", bad_threshold);
  struct Column {
    std::string title;
    const Summary AggregateScore::*metric;
    bool included;
  };
  std::vector<Column> columns;
  for (const auto& [title, metric] : {std::pair{std::string(bad), &AggregateScore::bad_percent},
                                      std::pair{std::string("RMSE 3D mm"), &AggregateScore::rmse_depth},
                                      std::pair{std::string("RMSE disp px"), &AggregateScore::rmse_disparity}}) {
    columns.push_back({title + " excl", metric, false});
    if (with_included) columns.push_back({title + " incl", metric, true});
  }

  std::vector<std::string> header = {"Method"};
  for (const Column& c : columns) header.push_back(c.title);
  std::vector<std::vector<std::string>> rows;
  for (const MethodReport& m : reports) {
    std::vector<std::string> row = {m.method};
    for (const Column& c : columns)
      row.push_back(format_mean_std((c.included ? m.report.included : m.report.excluded).*c.metric));
    rows.push_back(std::move(row));
  }

  // Widths count code points; the plus-minus sign takes two bytes.
  auto display_width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = display_width(header[c]);
    for (const auto& row : rows) width[c] = std::max(width[c], display_width(row[c]));
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << " | ";
      os << row[c];
      if (c + 1 < row.size()) os << std::string(width[c] - display_width(row[c]), ' ');
    }
    os << '\n';
  };
  emit(header);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0) os << "-+-";
    os << std::string(width[c], '-');
  }
  os << '\n';
  for (const auto& row : rows) emit(row);
}

}  // namespace stereoref
