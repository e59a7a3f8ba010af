#pragma once

#include "cosur/error.hpp"
#include "cosur/territory.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cosur {

/// Per-sample scores and verdict. Scores are projection energies for the
/// territory rules and cosine similarities for the centroid rule.
struct EnergyDecision {
  std::string sample_id;
  std::vector<std::pair<std::string, double>> energies;  // in territory order
  std::string verdict;

  double energy(const std::string& category) const;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1 = 0.0;        // binary, positive_class as positive
  double macro_f1 = 0.0;  // unweighted mean over all categories seen
  std::string positive_class;
  std::size_t total = 0;
  std::map<std::string, std::map<std::string, std::size_t>> confusion;  // truth -> predicted -> count
};

/// ||V^T h||_2 in double precision.
template <typename Derived>
double projection_energy(const Eigen::MatrixBase<Derived>& h, const TerritoryBasis& territory) {
  if (h.size() != territory.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "projection energy: vector has dimension " + std::to_string(h.size()) +
                                                  ", territory '" + territory.category + "' has " +
                                                  std::to_string(territory.dim()));
  }
  const Eigen::VectorXd v = h.template cast<double>();
  if (!v.allFinite()) throw Error(ErrorKind::NonFinite, "projection energy: input vector has non-finite entries");
  return (territory.basis.transpose() * v).norm();
}

/// Two-territory rule: self when E_self > E_other strictly, otherwise other.
EnergyDecision decide(const Eigen::VectorXd& h, const TerritoryBasis& self, const TerritoryBasis& other,
                      std::string sample_id = {});

/// Argmax of energy over several territories. The maximum over the non-self
/// territories is taken first (earliest in list order on ties); `self_category`
/// wins only when its energy is strictly larger. An empty `self_category`
/// means plain first-maximum in list order.
EnergyDecision decide_multi(const Eigen::VectorXd& h, std::span<const TerritoryBasis> territories,
                            const std::string& self_category, std::string sample_id = {});

/// Centroid-cosine rule (ablation variant). Same tie semantics as decide_multi.
EnergyDecision decide_centroid(const Eigen::VectorXd& h, std::span<const Centroid> centroids,
                               const std::string& self_category, std::string sample_id = {});

/// Classifies every row of a set against the territories.
std::vector<EnergyDecision> classify(const RepresentationSet& set, std::span<const TerritoryBasis> territories,
                                     const std::string& self_category);
std::vector<EnergyDecision> classify(const RepresentationSet& set, std::span<const Centroid> centroids,
                                     const std::string& self_category);

/// Accuracy, binary F1 for `positive_class` (0 when precision + recall = 0),
/// macro F1 and the confusion table.
EvalReport evaluate(std::span<const EnergyDecision> decisions, const std::map<std::string, std::string>& labels,
                    const std::string& positive_class);

}  // namespace cosur
