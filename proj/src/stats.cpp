#include "pupilpipe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pupilpipe/io.hpp"

namespace pupilpipe {

namespace {

double log_gamma(double x) {
  // Lanczos series, g = 5, n = 6.
  static constexpr double kCoef[6] = {76.18009172947146,  -86.50532032941677,
                                      24.01409824083091,  -1.231739572450155,
                                      0.1208650973866179e-2, -0.5395239384953e-5};
  const double tmp = x + 5.5 - (x + 0.5) * std::log(x + 5.5);
  double ser = 1.000000000190015;
  double y = x;
  for (double c : kCoef) ser += c / ++y;
  return -tmp + std::log(2.5066282746310005 * ser / x);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-12;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

struct MeanSd {
  double mean = 0;
  double sd = 0;
};

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  if (v.empty()) return out;
  double sum = 0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

}  // namespace

double pearson_r(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y) {
  if (x.size() != y.size()) throw LengthMismatch("pearson_r: series lengths differ");
  const Eigen::Index n = x.size();
  if (n < 3) throw std::invalid_argument("pearson_r: need n >= 3");
  // A literally constant series must raise, even when centering leaves
  // rounding residue behind.
  if (x.minCoeff() == x.maxCoeff() || y.minCoeff() == y.maxCoeff())
    throw ConstantInput("pearson_r: zero-variance input");
  const Eigen::ArrayXd xc = x.array() - x.mean();
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double sxx = (xc * xc).sum();
  const double syy = (yc * yc).sum();
  if (sxx == 0.0 || syy == 0.0) throw ConstantInput("pearson_r: zero-variance input");
  return (xc * yc).sum() / std::sqrt(sxx * syy);
}

double incomplete_beta(double a, double b, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                                a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double p_value_two_tailed(double r, int n) {
  if (n < 3) throw std::invalid_argument("p_value_two_tailed: need n >= 3");
  if (!(r >= -1.0 && r <= 1.0)) throw std::invalid_argument("p_value_two_tailed: |r| > 1");
  if (r == 0.0) return 1.0;
  if (std::fabs(r) == 1.0) return 0.0;
  const double df = n - 2;
  const double t2 = r * r * df / (1.0 - r * r);
  // Two-tailed tail mass of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
  return incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

std::vector<FeatureCorrelation> correlation_table(std::span<const LabeledDay> days) {
  if (days.size() < 3) throw std::invalid_argument("correlation_table: need >= 3 days");
  bool any_pos = false;
  bool any_neg = false;
  for (const auto& d : days) (d.label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw SingleClass("correlation_table: both classes required");

  const Eigen::Index n = static_cast<Eigen::Index>(days.size());
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels[i] = days[i].label ? 1.0 : 0.0;

  std::vector<FeatureCorrelation> table;
  table.reserve(kFeatureCount);
  for (int f = 0; f < kFeatureCount; ++f) {
    FeatureCorrelation row;
    row.feature_name = feature_names()[f];
    Eigen::VectorXd values(n);
    std::vector<double> pos, neg;
    for (Eigen::Index i = 0; i < n; ++i) {
      values[i] = days[i].features.values[f];
      (days[i].label ? pos : neg).push_back(values[i]);
    }
    const auto pos_ms = mean_sd(pos);
    const auto neg_ms = mean_sd(neg);
    row.depressive_mean = pos_ms.mean;
    row.depressive_sd = pos_ms.sd;
    row.nondepressive_mean = neg_ms.mean;
    row.nondepressive_sd = neg_ms.sd;
    try {
      row.r = pearson_r(values, labels);
      row.p = p_value_two_tailed(row.r, static_cast<int>(n));
    } catch (const ConstantInput&) {
      row.r = 0.0;
      row.p = 1.0;
      row.constant = true;
    }
    table.push_back(std::move(row));
  }

  std::sort(table.begin(), table.end(), [](const FeatureCorrelation& a, const FeatureCorrelation& b) {
    const double ra = std::fabs(a.r);
    const double rb = std::fabs(b.r);
    if (ra != rb) return ra > rb;
    return a.feature_name < b.feature_name;
  });
  return table;
}

std::vector<std::string> select_tsf(std::span<const FeatureCorrelation> table, double p_max,
                                    double r_min) {
  std::vector<const FeatureCorrelation*> kept;
  for (const auto& row : table)
    if (row.p < p_max && std::fabs(row.r) >= r_min) kept.push_back(&row);
  // Re-sorted here so the selection does not depend on the table's row order.
  std::sort(kept.begin(), kept.end(), [](const FeatureCorrelation* a, const FeatureCorrelation* b) {
    const double ra = std::fabs(a->r);
    const double rb = std::fabs(b->r);
    if (ra != rb) return ra > rb;
    return a->feature_name < b->feature_name;
  });
  std::vector<std::string> selected;
  selected.reserve(kept.size());
  for (const auto* row : kept) selected.push_back(row->feature_name);
  return selected;
}

void write_correlation_csv(const std::filesystem::path& path,
                           std::span<const FeatureCorrelation> table, bool paper_format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  auto fmt = [paper_format](double v) {
    if (!paper_format) return format_real(v);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  out << "feature,p_value,r_value,depressive_mean,depressive_sd,nondepressive_mean,"
         "nondepressive_sd\n";
  for (const auto& row : table) {
    out << row.feature_name << ',' << fmt(row.p) << ',' << fmt(row.r) << ','
        << fmt(row.depressive_mean) << ',' << fmt(row.depressive_sd) << ','
        << fmt(row.nondepressive_mean) << ',' << fmt(row.nondepressive_sd) << '\n';
  }
}

}  // namespace pupilpipe
