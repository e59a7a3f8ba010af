#include "cosur/diagnostics.hpp"

#include "cosur/editor.hpp"
#include "cosur/rng.hpp"

#include <algorithm>
#include <vector>

namespace cosur {

std::string to_string(JsMode mode) { return mode == JsMode::MeanDistribution ? "mean-distribution" : "mean-pairwise"; }

JsMode parse_js_mode(const std::string& tag) {
  if (tag == "mean-distribution") return JsMode::MeanDistribution;
  if (tag == "mean-pairwise") return JsMode::MeanPairwise;
  throw Error(ErrorKind::InvalidArgument, "unknown JS mode '" + tag + "'");
}

namespace {

void check_same_dim(const RepresentationSet& a, const RepresentationSet& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": '" + a.category() + "' has d=" +
                                                  std::to_string(a.dim()) + ", '" + b.category() + "' has d=" +
                                                  std::to_string(b.dim()));
  }
}

// Squared Euclidean distances between the rows of x and the rows of y.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::VectorXd xn = x.rowwise().squaredNorm();
  const Eigen::VectorXd yn = y.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * x * y.transpose();
  d.colwise() += xn;
  d.rowwise() += yn.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

double centroid_cosine(const RepresentationSet& a, const RepresentationSet& b) {
  check_same_dim(a, b, "centroid cosine");
  const Eigen::VectorXd ca = a.as_double().colwise().mean();
  const Eigen::VectorXd cb = b.as_double().colwise().mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::InvalidArgument, "centroid cosine: zero-norm centroid");
  return ca.dot(cb) / (na * nb);
}

double mean_pairwise_cosine(const RepresentationSet& a, const RepresentationSet& b) {
  check_same_dim(a, b, "pairwise cosine");
  Eigen::MatrixXd x = a.as_double();
  Eigen::MatrixXd y = b.as_double();
  const Eigen::VectorXd xn = x.rowwise().norm();
  const Eigen::VectorXd yn = y.rowwise().norm();
  if (xn.minCoeff() == 0.0 || yn.minCoeff() == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "pairwise cosine: zero-norm sample");
  }
  x.array().colwise() /= xn.array();
  y.array().colwise() /= yn.array();
  return (x * y.transpose()).mean();
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::MatrixXd d2 = squared_distances(pooled, pooled);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back(std::sqrt(d2(i, j)));
  }
  if (dist.empty()) return 0.0;
  const auto mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mmd_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::optional<double> bandwidth) {
  if (x.cols() != y.cols()) throw Error(ErrorKind::DimensionMismatch, "MMD: feature dimensions differ");
  if (x.rows() < 2 || y.rows() < 2) throw Error(ErrorKind::InvalidArgument, "MMD needs at least two samples per set");
  const double sigma = bandwidth ? *bandwidth : median_heuristic_bandwidth(x, y);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::InvalidArgument, "MMD: degenerate kernel bandwidth " + std::to_string(sigma));
  }
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto kernel_sum = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool skip_diagonal) {
    const Eigen::MatrixXd k = (-gamma * squared_distances(a, b)).array().exp();
    return skip_diagonal ? k.sum() - k.diagonal().sum() : k.sum();
  };
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  return kernel_sum(x, x, true) / (m * (m - 1)) + kernel_sum(y, y, true) / (n * (n - 1)) -
         2.0 * kernel_sum(x, y, false) / (m * n);
}

double mmd_unbiased(const RepresentationSet& a, const RepresentationSet& b, std::optional<double> bandwidth) {
  check_same_dim(a, b, "MMD");
  return mmd_unbiased(a.as_double(), b.as_double(), bandwidth);
}

double linear_cka(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "linear CKA needs equal sample counts, got " +
                                                  std::to_string(x.rows()) + " and " + std::to_string(y.rows()));
  }
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();

  double cross, self_x, self_y;
  if (x.rows() <= std::max(x.cols(), y.cols())) {
    // Sample space: ||Y^T X||_F^2 = <K_X, K_Y>, ||X^T X||_F = ||K_X||_F.
    const Eigen::MatrixXd kx = xc * xc.transpose();
    const Eigen::MatrixXd ky = yc * yc.transpose();
    cross = (kx.array() * ky.array()).sum();
    self_x = kx.norm();
    self_y = ky.norm();
  } else {
    cross = (yc.transpose() * xc).squaredNorm();
    self_x = (xc.transpose() * xc).norm();
    self_y = (yc.transpose() * yc).norm();
  }
  if (self_x == 0.0 || self_y == 0.0) throw Error(ErrorKind::InvalidArgument, "linear CKA: zero-variance input");
  return std::clamp(cross / (self_x * self_y), 0.0, 1.0);
}

double linear_cka(const RepresentationSet& a, const RepresentationSet& b) {
  return linear_cka(a.as_double(), b.as_double());
}

Eigen::MatrixXd distributions(const RepresentationSet& set, const VocabHead& head, double temperature) {
  if (set.dim() != head.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "set '" + set.category() + "' has d=" + std::to_string(set.dim()) +
                                                  ", head expects " + std::to_string(head.dim()));
  }
  Eigen::MatrixXd p(set.rows(), head.vocab_size());
  for (Eigen::Index i = 0; i < set.rows(); ++i) p.row(i) = vocab_distribution(set.row(i), head, temperature).transpose();
  return p;
}

JsReport category_js(const RepresentationSet& a, const RepresentationSet& b, const VocabHead& head, JsMode mode,
                     std::uint64_t seed) {
  const Eigen::MatrixXd pa = distributions(a, head);
  const Eigen::MatrixXd pb = distributions(b, head);
  JsReport r{{a.category(), b.category()}, mode, 0.0};
  if (mode == JsMode::MeanDistribution) {
    const Eigen::VectorXd ma = pa.colwise().mean();
    const Eigen::VectorXd mb = pb.colwise().mean();
    r.value = js_divergence(ma / ma.sum(), mb / mb.sum());
    return r;
  }

  const auto na = static_cast<std::uint64_t>(pa.rows());
  const auto nb = static_cast<std::uint64_t>(pb.rows());
  double sum = 0.0;
  if (na * nb <= kMaxJsPairs) {
    for (Eigen::Index i = 0; i < pa.rows(); ++i) {
      for (Eigen::Index j = 0; j < pb.rows(); ++j) sum += js_divergence(pa.row(i), pb.row(j));
    }
    r.value = sum / static_cast<double>(na * nb);
  } else {
    Philox rng(seed);
    for (std::size_t s = 0; s < kMaxJsPairs; ++s) {
      const auto i = static_cast<Eigen::Index>(rng.below(na));
      const auto j = static_cast<Eigen::Index>(rng.below(nb));
      sum += js_divergence(pa.row(i), pb.row(j));
    }
    r.value = sum / static_cast<double>(kMaxJsPairs);
  }
  return r;
}

namespace {

// Ridge one-vs-rest probe; returns held-out accuracy.
double probe_accuracy(const Eigen::MatrixXd& train, const std::vector<int>& train_y, const Eigen::MatrixXd& test,
                      const std::vector<int>& test_y, int classes, double ridge) {
  const Eigen::RowVectorXd mean = train.colwise().mean();
  Eigen::RowVectorXd scale = ((train.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < scale.size(); ++j) scale[j] = scale[j] > 1e-12 ? 1.0 / scale[j] : 0.0;
  const Eigen::MatrixXd xtr = (train.rowwise() - mean).array().rowwise() * scale.array();
  const Eigen::MatrixXd xte = (test.rowwise() - mean).array().rowwise() * scale.array();

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(xtr.rows(), classes);
  for (Eigen::Index i = 0; i < xtr.rows(); ++i) y(i, train_y[static_cast<std::size_t>(i)]) = 1.0;
  const Eigen::RowVectorXd intercept = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - intercept;

  // Centered features leave the intercept unregularized; solve in the smaller space.
  Eigen::MatrixXd beta;
  if (xtr.cols() <= xtr.rows()) {
    Eigen::MatrixXd gram = xtr.transpose() * xtr;
    gram.diagonal().array() += ridge;
    beta = gram.ldlt().solve(xtr.transpose() * yc);
  } else {
    Eigen::MatrixXd gram = xtr * xtr.transpose();
    gram.diagonal().array() += ridge;
    beta = xtr.transpose() * gram.ldlt().solve(yc);
  }

  const Eigen::MatrixXd scores = (xte * beta).rowwise() + intercept;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    if (best == test_y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

}  // namespace

ProbeGapReport probe_gap(std::span<const RepresentationSet> sets, const VocabHead& head, const ProbeOptions& opts) {
  if (sets.size() < 2) throw Error(ErrorKind::InvalidArgument, "probe gap needs at least two categories");
  if (!(opts.holdout_fraction > 0.0 && opts.holdout_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "probe holdout fraction must lie in (0, 1)");
  }
  for (const auto& s : sets) {
    if (s.rows() < 10) {
      throw Error(ErrorKind::InvalidArgument, "probe gap needs at least 10 samples per category; '" + s.category() +
                                                  "' has " + std::to_string(s.rows()));
    }
    if (s.dim() != head.dim()) throw Error(ErrorKind::DimensionMismatch, "probe gap: head and set dimensions differ");
  }

  std::vector<Eigen::VectorXd> h_train, h_test;
  std::vector<int> y_train, y_test;
  for (std::size_t c = 0; c < sets.size(); ++c) {
    const auto& s = sets[c];
    Philox rng(opts.seed, c);
    const auto order = permutation(static_cast<std::size_t>(s.rows()), rng);
    const auto n = static_cast<double>(s.rows());
    const auto n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(opts.holdout_fraction * n + 0.5)),
                                                1, static_cast<std::size_t>(s.rows()) - 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& bucket = i < n_test ? h_test : h_train;
      auto& labels = i < n_test ? y_test : y_train;
      bucket.push_back(s.row(static_cast<Eigen::Index>(order[i])));
      labels.push_back(static_cast<int>(c));
    }
  }

  auto stack = [](const std::vector<Eigen::VectorXd>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
  };
  auto to_dist = [&](const std::vector<Eigen::VectorXd>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), head.vocab_size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = vocab_distribution(rows[i], head).transpose();
    }
    return m;
  };

  const int classes = static_cast<int>(sets.size());
  ProbeGapReport r;
  r.probe_acc_hidden = probe_accuracy(stack(h_train), y_train, stack(h_test), y_test, classes, opts.ridge);
  r.probe_acc_dist = probe_accuracy(to_dist(h_train), y_train, to_dist(h_test), y_test, classes, opts.ridge);
  r.gap = r.probe_acc_hidden - r.probe_acc_dist;
  return r;
}

PairwiseMetricReport pairwise_metrics(const RepresentationSet& a, const RepresentationSet& b) {
  check_same_dim(a, b, "pairwise metrics");
  PairwiseMetricReport r;
  r.pair = {a.category(), b.category()};
  r.cs = centroid_cosine(a, b);
  r.mmd = mmd_unbiased(a, b);
  const Eigen::Index n = std::min(a.rows(), b.rows());
  r.cka = linear_cka(a.as_double().topRows(n), b.as_double().topRows(n));
  return r;
}

}  // namespace cosur
