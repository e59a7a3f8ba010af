#include "cosur/territory.hpp"

#include <Eigen/SVD>

namespace cosur {

std::string to_string(TerritoryMethod method) { return method == TerritoryMethod::Svd ? "svd" : "pca"; }

TerritoryMethod parse_territory_method(const std::string& tag) {
  if (tag == "svd") return TerritoryMethod::Svd;
  if (tag == "pca") return TerritoryMethod::Pca;
  throw Error(ErrorKind::InvalidArgument, "unknown territory method '" + tag + "' (expected svd or pca)");
}

TerritoryBasis decompose(const Eigen::MatrixXd& rows, Eigen::Index k, std::string category, TerritoryMethod method) {
  const Eigen::Index max_k = std::min(rows.rows(), rows.cols());
  if (k < 1 || k > max_k) {
    throw Error(ErrorKind::InvalidArgument, "territory '" + category + "': k=" + std::to_string(k) +
                                                " outside [1, min(N, d)] = [1, " + std::to_string(max_k) + "]");
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  const double cutoff = kRankTolerance * s[0];
  if (!(s[0] > 0.0) || s[k - 1] < cutoff) {
    Eigen::Index effective = 0;
    while (effective < s.size() && s[effective] > 0.0 && s[effective] >= cutoff) ++effective;
    throw RankDeficientError("territory '" + category + "': k=" + std::to_string(k) + " exceeds effective rank " +
                                 std::to_string(effective),
                             static_cast<long>(effective));
  }

  TerritoryBasis t;
  t.category = std::move(category);
  t.method = method;
  t.basis = svd.matrixV().leftCols(k);
  t.singular_values = s.head(k);
  canonicalize_signs(t.basis);
  return t;
}

namespace {

Eigen::MatrixXd prepared(const RepresentationSet& set, const TerritoryOptions& opts) {
  Eigen::MatrixXd h = set.as_double();
  if (opts.normalize_rows) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double n = h.row(i).norm();
      if (n > 0.0) h.row(i) /= n;
    }
  }
  return h;
}

}  // namespace

TerritoryBasis build_territory_svd(const RepresentationSet& set, Eigen::Index k, const TerritoryOptions& opts) {
  return decompose(prepared(set, opts), k, set.category(), TerritoryMethod::Svd);
}

TerritoryBasis build_territory_pca(const RepresentationSet& set, Eigen::Index k, const TerritoryOptions& opts) {
  Eigen::MatrixXd h = prepared(set, opts);
  h.rowwise() -= h.colwise().mean();
  return decompose(h, k, set.category(), TerritoryMethod::Pca);
}

TerritoryBasis build_territory(const RepresentationSet& set, Eigen::Index k, TerritoryMethod method,
                               const TerritoryOptions& opts) {
  return method == TerritoryMethod::Svd ? build_territory_svd(set, k, opts) : build_territory_pca(set, k, opts);
}

Centroid build_centroid(const RepresentationSet& set) {
  return Centroid{set.category(), set.as_double().colwise().mean().transpose()};
}

void write_territory(const TerritoryBasis& t, const std::filesystem::path& path) {
  const nlohmann::json header = {{"kind", "territory"},
                                 {"n", t.dim()},
                                 {"d", t.rank()},
                                 {"category", t.category},
                                 {"k", t.rank()},
                                 {"method", to_string(t.method)},
                                 {"singular_values", std::vector<double>(t.singular_values.data(),
                                                                         t.singular_values.data() +
                                                                             t.singular_values.size())}};
  repb::write(path, header, t.basis.cast<float>());
}

TerritoryBasis load_territory(const std::filesystem::path& path) {
  auto c = repb::read(path);
  const auto& h = c.header;
  if (h.value("kind", std::string{}) != "territory") {
    throw Error(ErrorKind::Format, path.string() + ": header kind must be \"territory\"");
  }
  TerritoryBasis t;
  try {
    t.category = h.at("category").get<std::string>();
    t.method = parse_territory_method(h.at("method").get<std::string>());
    const auto sv = h.at("singular_values").get<std::vector<double>>();
    t.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    if (h.at("k").get<Eigen::Index>() != c.matrix.cols()) {
      throw Error(ErrorKind::Format, path.string() + ": header k disagrees with basis width");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": invalid territory header: " + e.what());
  }
  if (t.singular_values.size() != c.matrix.cols()) {
    throw Error(ErrorKind::Format, path.string() + ": singular value count disagrees with basis width");
  }

  // Storage is float32; re-orthonormalize so downstream energies keep the
  // Bessel bound. Column signs are matched back to the stored columns.
  const Eigen::MatrixXd stored = c.matrix.cast<double>();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(stored);
  t.basis = qr.householderQ() * Eigen::MatrixXd::Identity(stored.rows(), stored.cols());
  for (Eigen::Index j = 0; j < t.basis.cols(); ++j) {
    if (t.basis.col(j).dot(stored.col(j)) < 0) t.basis.col(j) *= -1;
  }
  return t;
}

}  // namespace cosur
