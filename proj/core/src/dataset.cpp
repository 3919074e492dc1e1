#include "transfit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "transfit/error.hpp"

namespace transfit {

std::string_view to_string(Censoring c) {
  switch (c) {
    case Censoring::Left: return "left";
    case Censoring::Interval: return "interval";
    case Censoring::Right: return "right";
  }
  return "?";
}

void check_observation(const IntervalObservation& obs) {
  const double l = obs.left;
  const double r = obs.right;
  switch (obs.status) {
    case Censoring::Left:
      if (l != 0.0) throw DomainError("left-censored observation must have left = 0");
      if (!std::isfinite(r) || r <= 0.0) {
        throw DomainError("left-censored observation needs a finite right endpoint > 0");
      }
      break;
    case Censoring::Interval:
      if (!std::isfinite(l) || !std::isfinite(r)) {
        throw DomainError("interval-censored observation needs finite endpoints");
      }
      if (l <= 0.0) throw DomainError("interval-censored observation needs left > 0");
      if (l >= r) throw DomainError("left >= right");
      break;
    case Censoring::Right:
      if (!std::isfinite(l) || l <= 0.0) {
        throw DomainError("right-censored observation needs a finite left endpoint > 0");
      }
      if (!std::isinf(r) || r < 0.0) {
        throw DomainError("right-censored observation must have right = inf");
      }
      break;
  }
  for (Eigen::Index k = 0; k < obs.covariates.size(); ++k) {
    if (!std::isfinite(obs.covariates(k))) throw DomainError("covariate values must be finite");
  }
}

Dataset::Dataset(std::vector<IntervalObservation> observations,
                 std::vector<std::string> covariate_names)
    : obs_(std::move(observations)), names_(std::move(covariate_names)) {
  if (obs_.empty()) throw DomainError("dataset has no observations");
  bool informative = false;
  for (const auto& o : obs_) {
    check_observation(o);
    if (static_cast<std::size_t>(o.covariates.size()) != names_.size()) {
      throw DomainError("observation has " + std::to_string(o.covariates.size()) +
                        " covariates, dataset declares " + std::to_string(names_.size()));
    }
    informative = informative || o.status != Censoring::Right;
  }
  if (!informative) {
    throw DomainError("every observation is right-censored; the likelihood is degenerate");
  }
}

std::vector<double> Dataset::finite_endpoints() const {
  std::vector<double> out;
  out.reserve(2 * obs_.size());
  for (const auto& o : obs_) {
    if (std::isfinite(o.left) && o.left > 0.0) out.push_back(o.left);
    if (std::isfinite(o.right) && o.right > 0.0) out.push_back(o.right);
  }
  return out;
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
  std::vector<IntervalObservation> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(obs_.at(i));
  return Dataset(std::move(picked), names_);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line, const char* what) {
  if (field.empty()) throw ParseError(std::string("empty ") + what + " field", line);
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(field) + "'", line);
  }
  return v;
}

Censoring parse_status(std::string_view field, std::size_t line) {
  if (field == "left") return Censoring::Left;
  if (field == "interval") return Censoring::Interval;
  if (field == "right") return Censoring::Right;
  throw ParseError("unknown status '" + std::string(field) + "' (expected left, interval or right)",
                   line);
}

void append_double(std::string& out, double v) {
  if (std::isinf(v)) {
    out += v > 0 ? "inf" : "-inf";
    return;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  bool have_header = false;
  std::vector<IntervalObservation> rows;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);

    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "left" || fields[1] != "right" || fields[2] != "status") {
        throw ParseError("header must start with left,right,status", line_no);
      }
      for (std::size_t k = 3; k < fields.size(); ++k) {
        if (fields[k].empty()) throw ParseError("empty covariate name in header", line_no);
        names.emplace_back(fields[k]);
      }
      have_header = true;
      continue;
    }

    if (fields.size() != names.size() + 3) {
      throw ParseError("expected " + std::to_string(names.size() + 3) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    IntervalObservation obs;
    obs.status = parse_status(fields[2], line_no);
    obs.left = parse_number(fields[0], line_no, "left");
    if (obs.status == Censoring::Right && fields[1].empty()) {
      obs.right = std::numeric_limits<double>::infinity();
    } else {
      obs.right = parse_number(fields[1], line_no, "right");
    }
    obs.covariates.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
      obs.covariates(static_cast<Eigen::Index>(k)) =
          parse_number(fields[k + 3], line_no, "covariate");
    }
    try {
      check_observation(obs);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), line_no);
    }
    rows.push_back(std::move(obs));
  }
  if (!have_header) throw ParseError("missing header row", 0);
  try {
    return Dataset(std::move(rows), std::move(names));
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
}

Dataset parse_dataset_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dataset(in);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  std::string buf = "left,right,status";
  for (const auto& name : ds.covariate_names()) buf += "," + name;
  buf += '\n';
  for (const auto& o : ds.observations()) {
    append_double(buf, o.left);
    buf += ',';
    append_double(buf, o.right);
    buf += ',';
    buf += to_string(o.status);
    for (Eigen::Index k = 0; k < o.covariates.size(); ++k) {
      buf += ',';
      append_double(buf, o.covariates(k));
    }
    buf += '\n';
  }
  out << buf;
}

std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

double DatasetReport::proportion(Censoring c) const {
  if (n == 0) return 0.0;
  const std::size_t count = c == Censoring::Left       ? left_censored
                            : c == Censoring::Interval ? interval_censored
                                                       : right_censored;
  return static_cast<double>(count) / static_cast<double>(n);
}

DatasetReport validate(const Dataset& ds) {
  DatasetReport rep;
  rep.n = ds.size();
  const auto d = static_cast<Eigen::Index>(ds.dimension());
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const auto& o : ds.observations()) {
    switch (o.status) {
      case Censoring::Left: ++rep.left_censored; break;
      case Censoring::Interval: ++rep.interval_censored; break;
      case Censoring::Right: ++rep.right_censored; break;
    }
    if (std::isfinite(o.right)) {
      rep.min_interval_width = std::min(rep.min_interval_width, o.right - o.left);
    }
    lo = lo.cwiseMin(o.covariates);
    hi = hi.cwiseMax(o.covariates);
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& name = ds.covariate_names()[static_cast<std::size_t>(k)];
    rep.covariate_ranges.push_back({name, lo(k), hi(k)});
    if (rep.n > 0 && lo(k) == hi(k)) rep.warnings.push_back("covariate '" + name + "' is constant");
  }
  if (rep.min_interval_width < 1e-8) {
    rep.warnings.push_back("minimum interval width below 1e-8");
  }
  return rep;
}

}  // namespace transfit
