#include "cosur/editor.hpp"

#include <cmath>
#include <limits>

namespace cosur {

namespace {

void check_dim(const Eigen::VectorXd& h, const VocabHead& head, const char* what) {
  if (h.size() != head.dim()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": vector has dimension " +
                                                  std::to_string(h.size()) + ", head expects " +
                                                  std::to_string(head.dim()));
  }
}

}  // namespace

Eigen::VectorXd logits(const Eigen::VectorXd& h, const VocabHead& head) {
  check_dim(h, head, "logits");
  return head.weights().cast<double>() * h + head.bias().cast<double>();
}

Eigen::VectorXd vocab_distribution(const Eigen::VectorXd& h, const VocabHead& head, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
  const Eigen::VectorXd z = logits(h, head) / temperature;
  if (!z.allFinite()) throw Error(ErrorKind::NonFinite, "vocab distribution: non-finite logits");
  return softmax(z);
}

EditSpec make_edit_spec(const VocabHead& head, const std::string& verdict,
                        const std::map<std::string, std::string>& token_map, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "edit strength alpha must be finite and non-negative");
  }
  const auto it = token_map.find(verdict);
  if (it == token_map.end()) {
    throw Error(ErrorKind::UnknownToken, "no target token configured for verdict '" + verdict + "'");
  }
  EditSpec spec;
  spec.target_token = it->second;
  spec.target_index = head.token_index(it->second);
  const Eigen::VectorXd w = head.weights().row(spec.target_index).transpose().cast<double>();
  const double norm = w.norm();
  if (norm == 0.0) throw Error(ErrorKind::InvalidArgument, "weight row of token '" + spec.target_token + "' is zero");
  spec.direction = w / norm;
  spec.alpha = alpha;
  return spec;
}

EditOutcome apply_edit(const Eigen::VectorXd& h, const EditSpec& spec, const VocabHead& head) {
  check_dim(h, head, "apply_edit");
  if (spec.direction.size() != h.size()) {
    throw Error(ErrorKind::DimensionMismatch, "apply_edit: direction and vector dimensions differ");
  }
  EditOutcome out;
  out.edited = h + spec.alpha * spec.direction;
  const Eigen::VectorXd before = logits(h, head);
  const Eigen::VectorXd after = logits(out.edited, head);
  out.logit_delta_target = after[spec.target_index] - before[spec.target_index];
  out.greedy_before = head.token_names()[static_cast<std::size_t>(greedy_index(before))];
  out.greedy_after = head.token_names()[static_cast<std::size_t>(greedy_index(after))];
  return out;
}

bool satisfies_dominance(const VocabHead& head, Eigen::Index target) {
  const Eigen::MatrixXd w = head.weights().cast<double>();
  const double norm = w.row(target).norm();
  if (norm == 0.0) return false;
  const Eigen::VectorXd proj = w * (w.row(target).transpose() / norm);
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    if (j != target && !(norm > proj[j])) return false;
  }
  return true;
}

std::optional<double> minimal_flip_alpha(const Eigen::VectorXd& h, const VocabHead& head, Eigen::Index target,
                                         double alpha_max) {
  check_dim(h, head, "minimal_flip_alpha");
  if (target < 0 || target >= head.vocab_size()) {
    throw Error(ErrorKind::UnknownToken, "target index " + std::to_string(target) + " outside the vocabulary");
  }
  if (!(alpha_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha_max must be positive");

  const Eigen::MatrixXd w = head.weights().cast<double>();
  const Eigen::VectorXd base = logits(h, head);
  if (greedy_index(base) == target) return 0.0;

  const double norm = w.row(target).norm();
  if (norm == 0.0) return std::nullopt;
  const Eigen::VectorXd dir = w.row(target).transpose() / norm;
  const Eigen::VectorXd gain = w * dir;  // d logit_j / d alpha

  auto flips = [&](double alpha) { return greedy_index(logits(h + alpha * dir, head)) == target; };

  // Logits are affine in alpha, so the alphas where the target wins form one
  // interval. Locate a point inside it to seed the bisection.
  double seed = alpha_max;
  if (!flips(seed)) {
    double lo = 0.0;
    double hi = alpha_max;
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      if (j == target) continue;
      const double margin = base[target] - base[j];
      const double slope = gain[target] - gain[j];
      if (slope > 0.0) {
        lo = std::max(lo, -margin / slope);
      } else if (slope < 0.0) {
        hi = std::min(hi, -margin / slope);
      } else if (margin < 0.0 || (margin == 0.0 && j < target)) {
        return std::nullopt;
      }
    }
    if (!(lo < hi)) return std::nullopt;
    seed = 0.5 * (lo + hi);
    if (!flips(seed)) return std::nullopt;
  }

  const double tol = 1e-3 * alpha_max;
  double a = 0.0;
  double b = seed;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    (flips(mid) ? b : a) = mid;
  }
  return b;
}

}  // namespace cosur
