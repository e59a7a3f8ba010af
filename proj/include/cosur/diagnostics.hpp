#pragma once

#include "cosur/error.hpp"
#include "cosur/repstore.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace cosur {

enum class JsMode { MeanDistribution, MeanPairwise };

std::string to_string(JsMode mode);
JsMode parse_js_mode(const std::string& tag);

struct PairwiseMetricReport {
  std::pair<std::string, std::string> pair;
  double cs = 0.0;
  double mmd = 0.0;
  double cka = 0.0;
};

struct JsReport {
  std::pair<std::string, std::string> pair;
  JsMode mode = JsMode::MeanDistribution;
  double value = 0.0;  // bits
};

struct ProbeGapReport {
  double probe_acc_hidden = 0.0;
  double probe_acc_dist = 0.0;
  double gap = 0.0;
};

struct ProbeOptions {
  double holdout_fraction = 0.2;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

/// Cosine of the two class centroids.
double centroid_cosine(const RepresentationSet& a, const RepresentationSet& b);

/// Mean cosine over all cross pairs (alternative CS convention).
double mean_pairwise_cosine(const RepresentationSet& a, const RepresentationSet& b);

/// Median of all pairwise Euclidean distances in the pooled sample.
double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Unbiased MMD^2 U-statistic with the RBF kernel exp(-||x-y||^2 / (2 sigma^2)).
/// Without `bandwidth` sigma is the median pairwise distance of the pooled sample.
double mmd_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::optional<double> bandwidth = {});
double mmd_unbiased(const RepresentationSet& a, const RepresentationSet& b, std::optional<double> bandwidth = {});

/// Linear CKA of two feature matrices with the same number of rows (samples).
/// Computed in whichever of feature or sample space is smaller.
double linear_cka(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
double linear_cka(const RepresentationSet& a, const RepresentationSet& b);

/// Jensen-Shannon divergence in bits, with 0 log 0 = 0.
template <typename DerivedP, typename DerivedQ>
double js_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::DimensionMismatch, "JS divergence: lengths " + std::to_string(p.size()) + " and " +
                                                  std::to_string(q.size()) + " differ");
  }
  auto check = [](const auto& v, const char* name) {
    if (!(v.minCoeff() >= 0.0) || std::abs(v.sum() - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, std::string("JS divergence: ") + name + " is not a probability vector");
    }
  };
  check(p, "p");
  check(q, "q");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p[i]);
    const double qi = static_cast<double>(q[i]);
    const double m = 0.5 * (pi + qi);
    if (pi > 0.0) kl_p += pi * std::log2(pi / m);
    if (qi > 0.0) kl_q += qi * std::log2(qi / m);
  }
  return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, 1.0);
}

/// Softmax distributions of every row through the head (N x |V|).
Eigen::MatrixXd distributions(const RepresentationSet& set, const VocabHead& head, double temperature = 1.0);

inline constexpr std::size_t kMaxJsPairs = 10'000;

/// JS divergence between two categories as seen through the vocabulary head.
/// MeanPairwise averages over all cross pairs, or over kMaxJsPairs pairs drawn
/// with `seed` when there are more.
JsReport category_js(const RepresentationSet& a, const RepresentationSet& b, const VocabHead& head, JsMode mode,
                     std::uint64_t seed = 0);

/// Held-out accuracy of a ridge one-vs-rest linear probe on raw hidden states
/// versus on their vocabulary distributions. Features are standardized with
/// training statistics; the split is stratified and seeded.
ProbeGapReport probe_gap(std::span<const RepresentationSet> sets, const VocabHead& head, const ProbeOptions& opts = {});

/// CS, MMD and CKA for one pair. CKA uses the first min(N_a, N_b) rows of each.
PairwiseMetricReport pairwise_metrics(const RepresentationSet& a, const RepresentationSet& b);

}  // namespace cosur
