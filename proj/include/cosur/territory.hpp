#pragma once

#include "cosur/error.hpp"
#include "cosur/repstore.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

namespace cosur {

enum class TerritoryMethod { Svd, Pca };

std::string to_string(TerritoryMethod method);
TerritoryMethod parse_territory_method(const std::string& tag);

/// Orthonormal d x k basis spanning one category's territory.
struct TerritoryBasis {
  std::string category;
  Eigen::MatrixXd basis;            // d x k, orthonormal columns
  Eigen::VectorXd singular_values;  // k values, non-increasing
  TerritoryMethod method = TerritoryMethod::Svd;

  Eigen::Index dim() const noexcept { return basis.rows(); }
  Eigen::Index rank() const noexcept { return basis.cols(); }
};

struct Centroid {
  std::string category;
  Eigen::VectorXd mean;
};

struct TerritoryOptions {
  bool normalize_rows = false;  // L2-normalize each sample before decomposition
};

/// Relative threshold below which a retained singular value counts as zero.
inline constexpr double kRankTolerance = 1e-12;

/// Territory from the top-k right singular vectors of the uncentered matrix.
TerritoryBasis build_territory_svd(const RepresentationSet& set, Eigen::Index k, const TerritoryOptions& opts = {});

/// Same as the SVD territory but rows are mean-centered first.
TerritoryBasis build_territory_pca(const RepresentationSet& set, Eigen::Index k, const TerritoryOptions& opts = {});

TerritoryBasis build_territory(const RepresentationSet& set, Eigen::Index k, TerritoryMethod method,
                               const TerritoryOptions& opts = {});

/// Top-k right singular subspace of an arbitrary double matrix. Used by the
/// builders above; exposed so tests can drive it without a RepresentationSet.
TerritoryBasis decompose(const Eigen::MatrixXd& rows, Eigen::Index k, std::string category, TerritoryMethod method);

Centroid build_centroid(const RepresentationSet& set);

/// Flips every column so its largest-magnitude entry is positive (first index
/// wins ties). Makes bases bit-reproducible regardless of the SVD backend.
template <typename Derived>
void canonicalize_signs(Eigen::MatrixBase<Derived>& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < basis.rows(); ++i) {
      if (std::abs(basis(i, j)) > std::abs(basis(pivot, j))) pivot = i;
    }
    if (basis(pivot, j) < 0) basis.col(j) *= -1;
  }
}

/// Principal angles between span(a) and span(b), ascending. Both arguments
/// must have orthonormal columns and the same number of rows.
///
/// Small angles come from the sines (singular values of b - a a^T b) and large
/// ones from the cosines (singular values of a^T b), so both ends keep full
/// precision.
template <typename DerivedA, typename DerivedB>
Eigen::VectorXd principal_angles(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "principal angles: ambient dimensions " + std::to_string(a.rows()) +
                                                  " and " + std::to_string(b.rows()) + " differ");
  }
  if (a.cols() > b.cols()) return principal_angles(b, a);
  const Eigen::MatrixXd ad = a.template cast<double>();
  const Eigen::MatrixXd bd = b.template cast<double>();
  const Eigen::MatrixXd cross = ad.transpose() * bd;
  const Eigen::VectorXd cosines = Eigen::JacobiSVD<Eigen::MatrixXd>(cross).singularValues();
  const Eigen::VectorXd sines = Eigen::JacobiSVD<Eigen::MatrixXd>(bd - ad * cross).singularValues();
  const Eigen::Index m = cosines.size();
  Eigen::VectorXd theta(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    const double s = std::clamp(sines[sines.size() - 1 - i], 0.0, 1.0);
    theta[i] = c * c >= 0.5 ? std::asin(s) : std::acos(c);
  }
  return theta;
}

namespace detail {

template <typename DerivedA, typename DerivedB>
void check_same_shape(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": bases are " + std::to_string(a.rows()) + "x" +
                                                  std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                                                  "x" + std::to_string(b.cols()));
  }
  if (a.cols() < 1) throw Error(ErrorKind::InvalidArgument, std::string(what) + ": empty basis");
}

}  // namespace detail

/// Normalized Grassmann distance: sqrt(sum theta_i^2) / (sqrt(k) * pi/2), in [0, 1].
template <typename DerivedA, typename DerivedB>
double subspace_ngd(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  detail::check_same_shape(a, b, "NGD");
  const Eigen::VectorXd theta = principal_angles(a, b);
  const double k = static_cast<double>(a.cols());
  return std::min(1.0, theta.norm() / (std::sqrt(k) * std::numbers::pi / 2));
}

/// Normalized projector Frobenius distance: ||A A^T - B B^T||_F / sqrt(2k), in [0, 1].
///
/// Evaluated as ||B - A A^T B||_F / sqrt(k) (equal for orthonormal bases), so
/// no d x d projector is formed and near-identical spans keep full precision.
template <typename DerivedA, typename DerivedB>
double subspace_nfd(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  detail::check_same_shape(a, b, "NFD");
  const double k = static_cast<double>(a.cols());
  const Eigen::MatrixXd ad = a.template cast<double>();
  const Eigen::MatrixXd bd = b.template cast<double>();
  const double residual = (bd - ad * (ad.transpose() * bd)).norm();
  return std::min(1.0, residual / std::sqrt(k));
}

inline double subspace_ngd(const TerritoryBasis& a, const TerritoryBasis& b) { return subspace_ngd(a.basis, b.basis); }
inline double subspace_nfd(const TerritoryBasis& a, const TerritoryBasis& b) { return subspace_nfd(a.basis, b.basis); }

/// Territory file: REPB with the d x k basis as the matrix.
void write_territory(const TerritoryBasis& territory, const std::filesystem::path& path);
TerritoryBasis load_territory(const std::filesystem::path& path);

}  // namespace cosur
