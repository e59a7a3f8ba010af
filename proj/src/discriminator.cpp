#include "cosur/discriminator.hpp"

#include <set>

namespace cosur {

double EnergyDecision::energy(const std::string& category) const {
  for (const auto& [cat, e] : energies) {
    if (cat == category) return e;
  }
  throw Error(ErrorKind::InvalidArgument, "decision for '" + sample_id + "' has no score for '" + category + "'");
}

namespace {

// Verdict over (category, score) pairs with self losing every tie.
std::string select(const std::vector<std::pair<std::string, double>>& scores, const std::string& self_category) {
  const std::pair<std::string, double>* best_other = nullptr;
  const std::pair<std::string, double>* self = nullptr;
  for (const auto& entry : scores) {
    if (!self_category.empty() && entry.first == self_category) {
      self = &entry;
    } else if (!best_other || entry.second > best_other->second) {
      best_other = &entry;
    }
  }
  if (!best_other) return self->first;
  if (self && self->second > best_other->second) return self->first;
  return best_other->first;
}

}  // namespace

EnergyDecision decide(const Eigen::VectorXd& h, const TerritoryBasis& self, const TerritoryBasis& other,
                      std::string sample_id) {
  const double e_self = projection_energy(h, self);
  const double e_other = projection_energy(h, other);
  EnergyDecision out;
  out.sample_id = std::move(sample_id);
  out.energies = {{self.category, e_self}, {other.category, e_other}};
  out.verdict = e_self > e_other ? self.category : other.category;
  return out;
}

EnergyDecision decide_multi(const Eigen::VectorXd& h, std::span<const TerritoryBasis> territories,
                            const std::string& self_category, std::string sample_id) {
  if (territories.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "decide_multi needs at least two territories, got " +
                                                std::to_string(territories.size()));
  }
  EnergyDecision out;
  out.sample_id = std::move(sample_id);
  out.energies.reserve(territories.size());
  for (const auto& t : territories) out.energies.emplace_back(t.category, projection_energy(h, t));
  out.verdict = select(out.energies, self_category);
  return out;
}

EnergyDecision decide_centroid(const Eigen::VectorXd& h, std::span<const Centroid> centroids,
                               const std::string& self_category, std::string sample_id) {
  if (centroids.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "centroid rule needs at least two centroids");
  }
  const double hn = h.norm();
  EnergyDecision out;
  out.sample_id = std::move(sample_id);
  for (const auto& c : centroids) {
    if (c.mean.size() != h.size()) {
      throw Error(ErrorKind::DimensionMismatch, "centroid '" + c.category + "' has dimension " +
                                                    std::to_string(c.mean.size()) + ", sample has " +
                                                    std::to_string(h.size()));
    }
    const double cn = c.mean.norm();
    if (cn == 0.0) throw Error(ErrorKind::InvalidArgument, "centroid '" + c.category + "' has zero norm");
    out.energies.emplace_back(c.category, hn == 0.0 ? 0.0 : h.dot(c.mean) / (hn * cn));
  }
  out.verdict = select(out.energies, self_category);
  return out;
}

std::vector<EnergyDecision> classify(const RepresentationSet& set, std::span<const TerritoryBasis> territories,
                                     const std::string& self_category) {
  std::vector<EnergyDecision> out;
  out.reserve(static_cast<std::size_t>(set.rows()));
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    out.push_back(decide_multi(set.row(i), territories, self_category, set.sample_ids()[static_cast<std::size_t>(i)]));
  }
  return out;
}

std::vector<EnergyDecision> classify(const RepresentationSet& set, std::span<const Centroid> centroids,
                                     const std::string& self_category) {
  std::vector<EnergyDecision> out;
  out.reserve(static_cast<std::size_t>(set.rows()));
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    out.push_back(decide_centroid(set.row(i), centroids, self_category, set.sample_ids()[static_cast<std::size_t>(i)]));
  }
  return out;
}

namespace {

double f1_for(const EvalReport& r, const std::string& cls) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [truth, row] : r.confusion) {
    for (const auto& [pred, count] : row) {
      if (truth == cls && pred == cls) tp += count;
      else if (pred == cls) fp += count;
      else if (truth == cls) fn += count;
    }
  }
  if (tp == 0) return 0.0;  // covers P + R = 0
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

EvalReport evaluate(std::span<const EnergyDecision> decisions, const std::map<std::string, std::string>& labels,
                    const std::string& positive_class) {
  std::set<std::string> known;
  for (const auto& [id, label] : labels) known.insert(label);

  EvalReport r;
  r.positive_class = positive_class;
  std::size_t correct = 0;
  for (const auto& d : decisions) {
    const auto it = labels.find(d.sample_id);
    if (it == labels.end()) throw Error(ErrorKind::Unlabeled, "sample '" + d.sample_id + "' has no label");
    ++r.confusion[it->second][d.verdict];
    if (it->second == d.verdict) ++correct;
    known.insert(d.verdict);
    for (const auto& [cat, e] : d.energies) known.insert(cat);
  }
  if (!known.contains(positive_class)) {
    throw Error(ErrorKind::InvalidArgument, "positive class '" + positive_class + "' is not a known category");
  }
  r.total = decisions.size();
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  r.f1 = f1_for(r, positive_class);

  std::set<std::string> seen;
  for (const auto& [truth, row] : r.confusion) {
    seen.insert(truth);
    for (const auto& [pred, count] : row) seen.insert(pred);
  }
  double sum = 0.0;
  for (const auto& c : seen) sum += f1_for(r, c);
  r.macro_f1 = seen.empty() ? 0.0 : sum / static_cast<double>(seen.size());
  return r;
}

}  // namespace cosur
