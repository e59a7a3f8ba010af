#pragma once

#include "cosur/repstore.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cosur {

/// One synthetic category.
///
/// Samples are shared_mean + mean_offset + latent_scale * B z + noise_sigma * e
/// with B a d x rank orthonormal private basis, z and e standard normal.
/// Without `angles` the private basis is orthogonal to every other class;
/// with `angles` (one per column, radians) its principal angles to the basis
/// of class `reference` are exactly those values.
struct SynthClass {
  std::string category;
  Eigen::Index rank = 1;
  std::optional<std::vector<double>> angles;
  std::size_t reference = 0;
  std::optional<Eigen::VectorXd> mean_offset;  // explicit vector
  double offset_norm = 0.0;                    // else: fresh direction of this norm
  double noise_sigma = 0.0;
  double latent_scale = 1.0;
};

struct SynthHeadConfig {
  Eigen::Index vocab_size = 2;
  Eigen::Index rank = 1;
  bool orthogonal_completion = false;
  std::vector<std::string> token_names;  // default t0, t1, ...
};

struct SynthConfig {
  Eigen::Index d = 1;
  Eigen::Index n_per_class = 1;
  std::uint64_t seed = 0;
  double shared_mean_norm = 0.0;
  std::optional<Eigen::VectorXd> shared_mean;  // overrides shared_mean_norm
  std::vector<SynthClass> classes;
  std::optional<SynthHeadConfig> head;
  std::vector<std::pair<std::string, std::string>> tokens;  // role -> token, copied to the manifest
  std::optional<std::string> self_category;
};

struct SynthOutput {
  std::vector<RepresentationSet> sets;
  std::optional<VocabHead> head;
  Eigen::VectorXd shared_mean;
  std::vector<Eigen::MatrixXd> private_bases;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& config);

/// Deterministic in `config`: identical configs give bitwise-identical sets.
SynthOutput generate(const SynthConfig& config);

/// W = A B (A: |V| x rank, B: rank x d, standard normal), rows scaled to unit
/// norm, b = 0. With `orthogonal_completion` (requires rank = d = |V|) W is a
/// random orthogonal matrix instead.
VocabHead generate_head(Eigen::Index d, Eigen::Index vocab_size, Eigen::Index rank, std::uint64_t seed,
                        bool orthogonal_completion = false, std::vector<std::string> token_names = {});

/// Random d x d orthogonal matrix (QR of a Gaussian matrix, R with positive diagonal).
Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::uint64_t seed, std::uint64_t stream = 0);

/// Writes one REPB file per class (<category>.repb), head.repb when present,
/// and manifest.json into `dir`. Returns the manifest path.
std::filesystem::path write_synth(const SynthOutput& out, const SynthConfig& config, const std::filesystem::path& dir);

// Named configurations.

/// Near-identical means, orthogonal rank-4 private subspaces, d = 64,
/// sigma = 0.1, 400 samples per class; categories "self" and "other". Carries
/// a 16-token unit-row head with tokens self=t0, other=t1.
SynthConfig paper_regime_config(std::uint64_t seed = 42);

/// Two classes sharing one private subspace; the only class signal is a
/// per-class offset of the (uncentered) mean along a fresh direction.
SynthConfig mean_offset_config(std::uint64_t seed = 42);

/// "self", "other" (orthogonal to self) and "unseen", whose private subspace
/// sits at small principal angles to "other"'s.
SynthConfig generalization_config(std::uint64_t seed = 42);

std::optional<SynthConfig> preset_config(const std::string& name, std::uint64_t seed);

/// Two classes that differ only along a direction outside the row space of a
/// rank-limited head, plus a full-rank orthogonal head for comparison.
struct BottleneckFixture {
  std::vector<RepresentationSet> sets;
  VocabHead limited_head;
  VocabHead full_head;
};

BottleneckFixture make_bottleneck_fixture(Eigen::Index d, Eigen::Index n_per_class, Eigen::Index head_rank,
                                          double separation, double noise, std::uint64_t seed);

}  // namespace cosur
