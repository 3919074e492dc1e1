#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace transfit {

enum class Censoring { Left, Interval, Right };

std::string_view to_string(Censoring c);

/// One subject. Left-censored events are stored as the interval (0, right];
/// right-censored ones as (left, +inf).
struct IntervalObservation {
  Censoring status = Censoring::Interval;
  double left = 0.0;
  double right = std::numeric_limits<double>::infinity();
  Eigen::VectorXd covariates;
};

/// Throws DomainError when the censoring class and endpoints disagree.
void check_observation(const IntervalObservation& obs);

class Dataset {
 public:
  Dataset() = default;
  /// Validates every observation and the dataset-level invariants.
  Dataset(std::vector<IntervalObservation> observations, std::vector<std::string> covariate_names);

  std::size_t size() const noexcept { return obs_.size(); }
  std::size_t dimension() const noexcept { return names_.size(); }
  const std::vector<IntervalObservation>& observations() const noexcept { return obs_; }
  const IntervalObservation& operator[](std::size_t i) const { return obs_[i]; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  /// Finite, positive endpoints pooled across subjects (knot placement pool).
  std::vector<double> finite_endpoints() const;

  /// Subset / resample by index (indices may repeat).
  Dataset select(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<IntervalObservation> obs_;
  std::vector<std::string> names_;
};

/// Reads `left,right,status,<covariates...>`; `#` starts a comment line.
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset_string(std::string_view text);
Dataset load_dataset(const std::string& path);

/// Same dialect parse_dataset reads; doubles printed round-trip exact.
void write_dataset(std::ostream& out, const Dataset& ds);
std::string serialize_dataset(const Dataset& ds);

struct CovariateRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

struct DatasetReport {
  std::size_t n = 0;
  std::size_t left_censored = 0;
  std::size_t interval_censored = 0;
  std::size_t right_censored = 0;
  double min_interval_width = std::numeric_limits<double>::infinity();
  std::vector<CovariateRange> covariate_ranges;
  std::vector<std::string> warnings;

  double proportion(Censoring c) const;
};

/// Descriptive checks; never throws, only warns.
DatasetReport validate(const Dataset& ds);

}  // namespace transfit
