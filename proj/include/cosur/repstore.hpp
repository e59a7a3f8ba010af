#pragma once

#include "cosur/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cosur {

/// Row-major float32 storage; row i is one sample's hidden vector.
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FileFormat { Repb, Csv };

FileFormat parse_format(const std::string& tag);
std::string to_string(FileFormat format);

/// Final-layer representations of one text category.
///
/// Storage is 32-bit; every analysis routine converts to double via as_double().
class RepresentationSet {
 public:
  /// Validates the invariants (N, d >= 1, finite entries, unique ids). When
  /// `sample_ids` is empty the row indices "0".."N-1" are used.
  RepresentationSet(std::string category, MatrixF data, std::vector<std::string> sample_ids = {});

  const std::string& category() const noexcept { return category_; }
  const MatrixF& data() const noexcept { return data_; }
  const std::vector<std::string>& sample_ids() const noexcept { return ids_; }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index dim() const noexcept { return data_.cols(); }

  Eigen::MatrixXd as_double() const { return data_.cast<double>(); }
  Eigen::VectorXd row(Eigen::Index i) const { return data_.row(i).transpose().cast<double>(); }

  /// Rows at the given indices, keeping their ids.
  RepresentationSet subset(const std::vector<std::size_t>& rows) const;

 private:
  std::string category_;
  MatrixF data_;
  std::vector<std::string> ids_;
};

/// Output projection W (|V| x d) and bias b, with one name per vocabulary row.
class VocabHead {
 public:
  VocabHead(MatrixF weights, Eigen::VectorXf bias, std::vector<std::string> token_names);
  VocabHead(MatrixF weights, std::vector<std::string> token_names);

  const MatrixF& weights() const noexcept { return weights_; }
  const Eigen::VectorXf& bias() const noexcept { return bias_; }
  const std::vector<std::string>& token_names() const noexcept { return tokens_; }
  bool has_bias() const noexcept { return has_bias_; }

  Eigen::Index vocab_size() const noexcept { return weights_.rows(); }
  Eigen::Index dim() const noexcept { return weights_.cols(); }

  /// Row index of a token; throws UnknownToken.
  Eigen::Index token_index(const std::string& name) const;
  std::optional<Eigen::Index> find_token(const std::string& name) const;

 private:
  MatrixF weights_;
  Eigen::VectorXf bias_;
  std::vector<std::string> tokens_;
  bool has_bias_;
};

struct ManifestEntry {
  std::string category;
  std::filesystem::path path;
  FileFormat format = FileFormat::Repb;
};

/// Index of the files making up one analysis run.
///
/// Relative paths are resolved against the manifest's own directory. `self`
/// and `tokens` are optional run hints; CLI flags take precedence.
struct Manifest {
  std::vector<ManifestEntry> entries;
  std::optional<std::filesystem::path> head_path;
  std::optional<std::string> self_category;
  std::vector<std::pair<std::string, std::string>> tokens;  // role -> token name

  const ManifestEntry& entry(const std::string& category) const;
};

RepresentationSet load_representations(const std::filesystem::path& path, FileFormat format,
                                       const std::string& category = {});
void write_representations(const RepresentationSet& set, const std::filesystem::path& path, FileFormat format);

VocabHead load_vocab_head(const std::filesystem::path& path);
void write_vocab_head(const VocabHead& head, const std::filesystem::path& path);

Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Loads every entry of a manifest, in manifest order.
std::vector<RepresentationSet> load_all(const Manifest& manifest);

namespace repb {

inline constexpr char kMagic[4] = {'R', 'E', 'P', 'B'};
inline constexpr std::uint8_t kVersion = 0x01;

/// A parsed REPB container: JSON header plus the raw float payload.
/// `trailing` holds float32 values stored after the n*d matrix (the head bias).
struct Container {
  nlohmann::json header;
  MatrixF matrix;
  std::vector<float> trailing;
};

/// Reads a container. `trailing_count`, when given, derives from the header how
/// many float32 values follow the matrix; the payload must match exactly.
Container read(const std::filesystem::path& path, std::size_t (*trailing_count)(const nlohmann::json&) = nullptr);
void write(const std::filesystem::path& path, const nlohmann::json& header, const MatrixF& matrix,
           const std::vector<float>& trailing = {});

/// Size in bytes of the magic, version and header line for a given header.
std::size_t header_size(const nlohmann::json& header);

}  // namespace repb

}  // namespace cosur
