#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "transfit/fit_result.hpp"
#include "transfit/inference.hpp"
#include "transfit/simulation.hpp"

namespace transfit {

/// Shortest round-trip decimal; "NA" for NaN, "inf"/"-inf" for infinities.
std::string format_number(double x);

/// FitResult fields under their own names, plus a Wald table and diagnostics.
std::string fit_to_json(const FitResult& fit, int indent = 2);

/// CSV: term,estimate,std_error,z,p_value,lower95,upper95
void write_fit_summary(std::ostream& os, const FitResult& fit);

/// CSV: t,phi_hat,lower,upper
void write_band_csv(std::ostream& os, const PointwiseBand& band);

struct McTableRow {
  SimConfig config;
  double fit_alpha = 0.0;
  std::optional<std::size_t> knots;
  MCSummary summary;
};

/// CSV, one row per coefficient:
/// config,alpha,fit_alpha,n,knots,coefficient,truth,bias,sd,ase,mse,cp95,
/// replications,failures,right_censor_rate,flagged
void write_mc_csv(std::ostream& os, const std::vector<McTableRow>& rows);

/// CSV: config,alpha,n,beta1,rejection_rate,replications,failures
void write_power_csv(std::ostream& os, const SimConfig& base, const std::vector<PowerPoint>& curve);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  /// Numeric cell; "NA" reads as NaN.
  double number(std::size_t row, const std::string& name) const;
};

/// Reader for the tables above (plain comma separation, no quoting).
CsvTable read_csv_table(std::istream& is);

}  // namespace transfit
