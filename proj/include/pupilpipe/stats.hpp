#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pupilpipe/features.hpp"

namespace pupilpipe {

struct ConstantInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct SingleClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Product-moment correlation; throws LengthMismatch / ConstantInput.
double pearson_r(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y);

/// Regularized incomplete beta I_x(a, b) via Lentz continued fraction,
/// absolute tolerance 1e-12.
double incomplete_beta(double a, double b, double x);

/// Two-tailed p for a correlation of n pairs: t = r sqrt((n-2)/(1-r^2)),
/// then the Student-t tail mass with n-2 degrees of freedom. |r| = 1 gives 0.
double p_value_two_tailed(double r, int n);

struct FeatureCorrelation {
  std::string feature_name;
  double r = 0;
  double p = 1;
  double depressive_mean = 0;
  double depressive_sd = 0;
  double nondepressive_mean = 0;
  double nondepressive_sd = 0;
  bool constant = false;  // zero-variance feature, reported with r = 0, p = 1
};

/// One row per feature: correlation against the 0/1 episode label plus
/// per-class mean/sd, sorted by |r| descending (ties by name). Throws
/// SingleClass when the table has only one label value.
std::vector<FeatureCorrelation> correlation_table(std::span<const LabeledDay> days);

inline constexpr double kDefaultTsfPMax = 0.05;
inline constexpr double kDefaultTsfRMin = 0.20;

/// Top significant features: p < p_max and |r| >= r_min, in |r|-descending
/// order. An empty result means nothing passed; the caller decides.
std::vector<std::string> select_tsf(std::span<const FeatureCorrelation> table,
                                    double p_max = kDefaultTsfPMax,
                                    double r_min = kDefaultTsfRMin);

void write_correlation_csv(const std::filesystem::path& path,
                           std::span<const FeatureCorrelation> table,
                           bool paper_format = false);

}  // namespace pupilpipe
