#include "transfit/fit_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "transfit/error.hpp"
#include "transfit/stats.hpp"

namespace transfit {

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

using nlohmann::json;

json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v(i)));
  return a;
}

json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

}  // namespace

std::string fit_to_json(const FitResult& fit, int indent) {
  json j;
  j["theta"] = {{"beta", vector_json(fit.theta.beta)}, {"gamma", vector_json(fit.theta.gamma)}};
  j["lambda"] = fit.lambda;
  j["basis"] = {{"degree", SplineBasis::kDegree},
                {"boundary", {fit.basis.boundary_low(), fit.basis.boundary_high()}},
                {"interior_knots", vector_json(fit.basis.interior_knots())}};
  j["link"] = {{"alpha", fit.link.alpha}};
  json info = json::array();
  for (Eigen::Index r = 0; r < fit.info_matrix.rows(); ++r) {
    info.push_back(vector_json(Eigen::VectorXd(fit.info_matrix.row(r).transpose())));
  }
  j["info_matrix"] = info;
  j["std_errors"] = vector_json(fit.std_errors);
  j["penloglik"] = number_or_null(fit.penloglik);
  j["em_iterations"] = fit.em_iterations;
  j["outer_iterations"] = fit.outer_iterations;
  j["converged"] = fit.converged;
  j["covariate_names"] = fit.covariate_names;

  const auto wald = wald_ci(fit);
  json coef = json::array();
  for (std::size_t l = 0; l < wald.size(); ++l) {
    const std::string name =
        l < fit.covariate_names.size() ? fit.covariate_names[l] : "z" + std::to_string(l + 1);
    coef.push_back({{"name", name},
                    {"estimate", wald[l].estimate},
                    {"std_error", number_or_null(wald[l].std_error)},
                    {"lower95", wald[l].valid ? json(wald[l].lower) : json(nullptr)},
                    {"upper95", wald[l].valid ? json(wald[l].upper) : json(nullptr)}});
  }
  j["coefficients"] = coef;

  const auto& d = fit.diagnostics;
  j["diagnostics"] = {{"lambda_path", vector_json(d.lambda_path)},
                      {"fs_numerators", vector_json(d.fs_numerators)},
                      {"outer_delta", number_or_null(d.outer_delta)},
                      {"lambda_clamped", d.lambda_clamped},
                      {"penalty_degenerate", d.penalty_degenerate},
                      {"info_singular", d.info_singular},
                      {"ascent_violations", d.ascent_violations},
                      {"messages", d.messages}};
  return j.dump(indent);
}

void write_fit_summary(std::ostream& os, const FitResult& fit) {
  os << "term,estimate,std_error,z,p_value,lower95,upper95\n";
  const auto wald = wald_ci(fit);
  for (std::size_t l = 0; l < wald.size(); ++l) {
    const auto& w = wald[l];
    const double z = w.valid ? w.estimate / w.std_error : std::numeric_limits<double>::quiet_NaN();
    const double p = w.valid ? 2.0 * normal_cdf(-std::abs(z)) : z;
    const std::string name =
        l < fit.covariate_names.size() ? fit.covariate_names[l] : "z" + std::to_string(l + 1);
    os << name << ',' << format_number(w.estimate) << ',' << format_number(w.std_error) << ','
       << format_number(z) << ',' << format_number(p) << ','
       << format_number(w.valid ? w.lower : z) << ',' << format_number(w.valid ? w.upper : z)
       << '\n';
  }
}

void write_band_csv(std::ostream& os, const PointwiseBand& band) {
  os << "t,phi_hat,lower,upper\n";
  for (std::size_t g = 0; g < band.grid.size(); ++g) {
    os << format_number(band.grid[g]) << ',' << format_number(band.phi_hat[g]) << ','
       << format_number(band.lower[g]) << ',' << format_number(band.upper[g]) << '\n';
  }
}

void write_mc_csv(std::ostream& os, const std::vector<McTableRow>& rows) {
  os << "config,alpha,fit_alpha,n,knots,coefficient,truth,bias,sd,ase,mse,cp95,"
        "replications,failures,right_censor_rate,flagged\n";
  for (const auto& row : rows) {
    const auto& s = row.summary;
    for (std::size_t l = 0; l < s.coefficients.size(); ++l) {
      const auto& c = s.coefficients[l];
      os << to_string(row.config.config) << ',' << format_number(row.config.alpha) << ','
         << format_number(row.fit_alpha) << ',' << row.config.n << ','
         << (row.knots ? std::to_string(*row.knots) : std::string("NA")) << ",beta" << (l + 1)
         << ',' << format_number(row.config.beta_true(static_cast<Eigen::Index>(l))) << ','
         << format_number(c.bias) << ',' << format_number(c.sd) << ',' << format_number(c.ase)
         << ',' << format_number(c.mse) << ',' << format_number(c.cp95) << ','
         << s.replications << ',' << s.failures << ',' << format_number(s.right_censor_rate)
         << ',' << (s.flagged ? 1 : 0) << '\n';
    }
  }
}

void write_power_csv(std::ostream& os, const SimConfig& base, const std::vector<PowerPoint>& curve) {
  os << "config,alpha,n,beta1,rejection_rate,replications,failures\n";
  for (const auto& p : curve) {
    os << to_string(base.config) << ',' << format_number(base.alpha) << ',' << base.n << ','
       << format_number(p.beta1) << ',' << format_number(p.rejection_rate) << ','
       << p.replications << ',' << p.failures << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw DomainError("csv: no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& cell = rows.at(row).at(column(name));
  if (cell == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ParseError("not a number: '" + cell + "'", row + 2);
  }
  return x;
}

CsvTable read_csv_table(std::istream& is) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("empty table", 1);
  return t;
}

}  // namespace transfit
