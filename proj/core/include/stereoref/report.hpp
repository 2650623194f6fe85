#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stereoref/metrics.hpp"

namespace stereoref {

struct MethodReport {
  std::string method;
  EvalReport report;
};

// One row per (method, image) followed by "mean" and "std" rows per method.
// Columns:
//   method,id,
//   bad_excl,rmse_depth_excl,rmse_disp_excl,
//   bad_incl,rmse_depth_incl,rmse_disp_incl,
//   eligible_excl,eligible_incl,est_invalid_excl,est_invalid_incl
// Values use 6 decimals; undefined values are written as "nan". Counts are
// left empty on the mean/std rows. Without with_included the *_incl columns
// are omitted.
void write_report_csv(std::ostream& os, const std::vector<MethodReport>& reports, bool with_included = true);

// Plain-text table, one row per method (incl columns only with with_included):
//   method | Bad excl | Bad incl | RMSE 3D excl | RMSE 3D incl | RMSE disp excl | RMSE disp incl
// each cell "mean (±std)" with 2 decimals.
void write_report_table(std::ostream& os, const std::vector<MethodReport>& reports, double bad_threshold = 3.0,
                        bool with_included = true);

std::string format_mean_std(const Summary& s, int decimals = 2);

}  // namespace stereoref
