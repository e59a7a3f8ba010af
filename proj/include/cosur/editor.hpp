#pragma once

#include "cosur/error.hpp"
#include "cosur/repstore.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>

namespace cosur {

inline constexpr double kDefaultAlpha = 100.0;

/// Steering target: the unit-normalized unembedding row of one token.
struct EditSpec {
  std::string target_token;
  Eigen::Index target_index = 0;
  Eigen::VectorXd direction;  // unit norm
  double alpha = 0.0;
};

struct EditOutcome {
  Eigen::VectorXd edited;
  double logit_delta_target = 0.0;
  std::string greedy_before;
  std::string greedy_after;
};

/// Logits W h + b in double precision.
Eigen::VectorXd logits(const Eigen::VectorXd& h, const VocabHead& head);

/// Index of the largest entry; lowest index wins ties.
template <typename Derived>
Eigen::Index greedy_index(const Eigen::MatrixBase<Derived>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

/// Numerically stable softmax (max subtracted) of a logit vector.
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& z) {
  const Eigen::VectorXd v = z.template cast<double>();
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// P = softmax((W h + b) / temperature).
Eigen::VectorXd vocab_distribution(const Eigen::VectorXd& h, const VocabHead& head, double temperature = 1.0);

/// Picks w_target for the verdict through `token_map` (category -> token name)
/// and normalizes it.
EditSpec make_edit_spec(const VocabHead& head, const std::string& verdict,
                        const std::map<std::string, std::string>& token_map, double alpha);

/// h + alpha * direction, with the target logit gain and greedy tokens before
/// and after measured through the head (bias included).
EditOutcome apply_edit(const Eigen::VectorXd& h, const EditSpec& spec, const VocabHead& head);

/// Smallest alpha (bisection, tolerance 1e-3 * alpha_max) at which the greedy
/// token becomes `target_index`; nullopt when no alpha in [0, alpha_max] does.
std::optional<double> minimal_flip_alpha(const Eigen::VectorXd& h, const VocabHead& head, Eigen::Index target_index,
                                         double alpha_max);

/// Whether ||w_t|| > max_{j != t} w_j . w_t / ||w_t||, the condition under which
/// a large enough edit toward t always makes t the greedy token.
bool satisfies_dominance(const VocabHead& head, Eigen::Index target_index);

}  // namespace cosur
