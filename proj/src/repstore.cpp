#include "cosur/repstore.hpp"

#include "cosur/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace cosur {

namespace fs = std::filesystem;
using nlohmann::json;

FileFormat parse_format(const std::string& tag) {
  if (tag == "repb") return FileFormat::Repb;
  if (tag == "csv") return FileFormat::Csv;
  throw Error(ErrorKind::InvalidArgument, "unknown file format '" + tag + "' (expected repb or csv)");
}

std::string to_string(FileFormat format) { return format == FileFormat::Repb ? "repb" : "csv"; }

namespace {

void check_finite(const MatrixF& m, const std::string& what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw Error(ErrorKind::NonFinite, what + ": non-finite value at row " + std::to_string(i) + ", column " +
                                              std::to_string(j));
      }
    }
  }
}

template <typename Names>
void check_unique(const Names& names, const std::string& what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw Error(ErrorKind::Format, what + ": duplicate name '" + n + "'");
  }
}

}  // namespace

RepresentationSet::RepresentationSet(std::string category, MatrixF data, std::vector<std::string> sample_ids)
    : category_(std::move(category)), data_(std::move(data)), ids_(std::move(sample_ids)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorKind::InvalidArgument, "representation set '" + category_ + "' must have N >= 1 and d >= 1");
  }
  if (ids_.empty()) {
    ids_.reserve(static_cast<std::size_t>(data_.rows()));
    for (Eigen::Index i = 0; i < data_.rows(); ++i) ids_.push_back(std::to_string(i));
  }
  if (static_cast<Eigen::Index>(ids_.size()) != data_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "representation set '" + category_ + "': " +
                                                  std::to_string(ids_.size()) + " ids for " +
                                                  std::to_string(data_.rows()) + " rows");
  }
  check_unique(ids_, "representation set '" + category_ + "' sample ids");
  check_finite(data_, "representation set '" + category_ + "'");
}

RepresentationSet RepresentationSet::subset(const std::vector<std::size_t>& rows) const {
  MatrixF out(static_cast<Eigen::Index>(rows.size()), data_.cols());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(rows[i]));
    ids.push_back(ids_.at(rows[i]));
  }
  return RepresentationSet(category_, std::move(out), std::move(ids));
}

VocabHead::VocabHead(MatrixF weights, Eigen::VectorXf bias, std::vector<std::string> token_names)
    : weights_(std::move(weights)), bias_(std::move(bias)), tokens_(std::move(token_names)), has_bias_(true) {
  if (weights_.rows() < 2 || weights_.cols() < 1) {
    throw Error(ErrorKind::InvalidArgument, "vocabulary head needs |V| >= 2 and d >= 1");
  }
  if (bias_.size() != weights_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "vocabulary head bias length " + std::to_string(bias_.size()) +
                                                  " != |V| " + std::to_string(weights_.rows()));
  }
  if (static_cast<Eigen::Index>(tokens_.size()) != weights_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "vocabulary head has " + std::to_string(tokens_.size()) +
                                                  " token names for " + std::to_string(weights_.rows()) + " rows");
  }
  check_unique(tokens_, "vocabulary head tokens");
  check_finite(weights_, "vocabulary head weights");
  for (Eigen::Index i = 0; i < bias_.size(); ++i) {
    if (!std::isfinite(bias_[i])) {
      throw Error(ErrorKind::NonFinite, "vocabulary head bias: non-finite value at index " + std::to_string(i));
    }
  }
}

VocabHead::VocabHead(MatrixF weights, std::vector<std::string> token_names)
    : VocabHead(weights, Eigen::VectorXf::Zero(weights.rows()), std::move(token_names)) {
  has_bias_ = false;
}

std::optional<Eigen::Index> VocabHead::find_token(const std::string& name) const {
  const auto it = std::find(tokens_.begin(), tokens_.end(), name);
  if (it == tokens_.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - tokens_.begin());
}

Eigen::Index VocabHead::token_index(const std::string& name) const {
  if (auto idx = find_token(name)) return *idx;
  throw Error(ErrorKind::UnknownToken, "token '" + name + "' is not in the vocabulary head");
}

const ManifestEntry& Manifest::entry(const std::string& category) const {
  for (const auto& e : entries) {
    if (e.category == category) return e;
  }
  throw Error(ErrorKind::InvalidArgument, "manifest has no category '" + category + "'");
}

// ---------------------------------------------------------------------------
// REPB container

namespace repb {

namespace {

constexpr bool kLittleEndian = std::endian::native == std::endian::little;

void to_le(std::uint32_t& bits) {
  if constexpr (!kLittleEndian) {
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
  }
}

void put_floats(std::ostream& os, const float* data, std::size_t count) {
  if constexpr (kLittleEndian) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint32_t>(data[i]);
      to_le(bits);
      os.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
}

void get_floats(const char* bytes, float* out, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes + 4 * i, 4);
    to_le(bits);
    out[i] = std::bit_cast<float>(bits);
  }
}

std::size_t header_dim(const json& header, const char* key, const fs::path& path) {
  const auto it = header.find(key);
  if (it == header.end() || !it->is_number_unsigned()) {
    throw Error(ErrorKind::Format, path.string() + ": header field '" + key + "' missing or not a non-negative integer");
  }
  return it->get<std::size_t>();
}

}  // namespace

std::size_t header_size(const json& header) { return sizeof(kMagic) + 1 + header.dump().size() + 1; }

void write(const fs::path& path, const json& header, const MatrixF& matrix, const std::vector<float>& trailing) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  os.put(static_cast<char>(kVersion));
  const std::string line = header.dump();
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  os.put('\n');
  put_floats(os, matrix.data(), static_cast<std::size_t>(matrix.size()));
  put_floats(os, trailing.data(), trailing.size());
  os.flush();
  if (!os) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

Container read(const fs::path& path, std::size_t (*trailing_count)(const json&)) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": missing REPB magic");
  }
  if (static_cast<std::uint8_t>(bytes[4]) != kVersion) {
    throw Error(ErrorKind::Format, path.string() + ": unsupported REPB version " +
                                       std::to_string(static_cast<std::uint8_t>(bytes[4])));
  }
  const auto newline = bytes.find('\n', 5);
  if (newline == std::string::npos) throw Error(ErrorKind::Format, path.string() + ": unterminated header line");

  Container out;
  try {
    out.header = json::parse(bytes.begin() + 5, bytes.begin() + static_cast<std::ptrdiff_t>(newline));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, path.string() + ": malformed header JSON: " + e.what());
  }
  if (!out.header.is_object()) throw Error(ErrorKind::Format, path.string() + ": header is not a JSON object");

  const std::size_t n = header_dim(out.header, "n", path);
  const std::size_t d = header_dim(out.header, "d", path);
  const std::size_t extra = trailing_count ? trailing_count(out.header) : 0;
  const std::size_t payload = bytes.size() - newline - 1;
  const std::size_t expected = (n * d + extra) * sizeof(float);
  if (payload != expected) {
    throw Error(ErrorKind::Format, path.string() + ": payload is " + std::to_string(payload) +
                                       " bytes but header n=" + std::to_string(n) + ", d=" + std::to_string(d) +
                                       " requires " + std::to_string(expected));
  }

  const char* p = bytes.data() + newline + 1;
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  get_floats(p, out.matrix.data(), n * d);
  out.trailing.resize(extra);
  get_floats(p + n * d * sizeof(float), out.trailing.data(), extra);
  return out;
}

}  // namespace repb

// ---------------------------------------------------------------------------
// CSV

namespace {

MatrixF read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");

  std::vector<float> values;
  Eigen::Index cols = -1;
  Eigen::Index row = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Eigen::Index col = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      while (p < end && *p == ' ') ++p;
      float v = 0.0f;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || next == p) {
        throw Error(ErrorKind::Format, path.string() + ": cannot parse value at row " + std::to_string(row) +
                                           ", column " + std::to_string(col));
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFinite, path.string() + ": non-finite value at row " + std::to_string(row) +
                                              ", column " + std::to_string(col));
      }
      values.push_back(v);
      ++col;
      p = next;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',') {
        throw Error(ErrorKind::Format, path.string() + ": unexpected character at row " + std::to_string(row) +
                                           ", column " + std::to_string(col));
      }
      ++p;
    }
    if (cols < 0) cols = col;
    if (col != cols) {
      throw Error(ErrorKind::DimensionMismatch, path.string() + ": row " + std::to_string(row) + " has " +
                                                    std::to_string(col) + " columns, expected " +
                                                    std::to_string(cols));
    }
    ++row;
  }
  if (row == 0) throw Error(ErrorKind::Format, path.string() + ": no rows");
  return Eigen::Map<MatrixF>(values.data(), row, cols);
}

void write_csv(const MatrixF& m, const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os.put(',');
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      os.write(buf, res.ptr - buf);
    }
    os.put('\n');
  }
  os.flush();
  if (!os) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::string stem_category(const fs::path& path) { return path.stem().string(); }

}  // namespace

RepresentationSet load_representations(const fs::path& path, FileFormat format, const std::string& category) {
  if (format == FileFormat::Csv) {
    return RepresentationSet(category.empty() ? stem_category(path) : category, read_csv(path));
  }
  auto c = repb::read(path);
  const auto& h = c.header;
  if (h.contains("kind") && h["kind"] != "representations") {
    throw Error(ErrorKind::Format, path.string() + ": expected a representation file, found kind " +
                                       h["kind"].dump());
  }
  std::string cat = category;
  if (cat.empty()) cat = h.value("category", stem_category(path));
  std::vector<std::string> ids;
  if (h.contains("ids")) {
    try {
      ids = h["ids"].get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::Format, path.string() + ": header 'ids' must be an array of strings");
    }
    if (static_cast<Eigen::Index>(ids.size()) != c.matrix.rows()) {
      throw Error(ErrorKind::DimensionMismatch, path.string() + ": header lists " + std::to_string(ids.size()) +
                                                    " ids for n=" + std::to_string(c.matrix.rows()));
    }
  }
  try {
    return RepresentationSet(std::move(cat), std::move(c.matrix), std::move(ids));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_representations(const RepresentationSet& set, const fs::path& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    write_csv(set.data(), path);
    return;
  }
  const json header = {{"n", set.rows()}, {"d", set.dim()}, {"category", set.category()}, {"ids", set.sample_ids()}};
  repb::write(path, header, set.data());
}

VocabHead load_vocab_head(const fs::path& path) {
  auto c = repb::read(path, [](const json& h) -> std::size_t {
    return h.value("bias", false) ? h.value("n", std::size_t{0}) : 0;
  });
  const auto& h = c.header;
  if (h.value("kind", std::string{}) != "head") {
    throw Error(ErrorKind::Format, path.string() + ": header kind must be \"head\"");
  }
  if (!h.contains("tokens") || !h["tokens"].is_array()) {
    throw Error(ErrorKind::Format, path.string() + ": head file requires a 'tokens' array");
  }
  std::vector<std::string> tokens;
  try {
    tokens = h["tokens"].get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Format, path.string() + ": 'tokens' must be an array of strings");
  }
  try {
    if (h.value("bias", false)) {
      Eigen::VectorXf bias = Eigen::Map<Eigen::VectorXf>(c.trailing.data(), static_cast<Eigen::Index>(c.trailing.size()));
      return VocabHead(std::move(c.matrix), std::move(bias), std::move(tokens));
    }
    return VocabHead(std::move(c.matrix), std::move(tokens));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_vocab_head(const VocabHead& head, const fs::path& path) {
  const json header = {{"kind", "head"},
                       {"n", head.vocab_size()},
                       {"d", head.dim()},
                       {"tokens", head.token_names()},
                       {"bias", head.has_bias()}};
  std::vector<float> bias;
  if (head.has_bias()) bias.assign(head.bias().data(), head.bias().data() + head.bias().size());
  repb::write(path, header, head.weights(), bias);
}

// ---------------------------------------------------------------------------
// Manifest

Manifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open manifest '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, path.string() + ": malformed manifest JSON: " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  Manifest m;
  try {
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.category = e.at("category").get<std::string>();
      entry.path = resolve(e.at("path").get<std::string>());
      entry.format = parse_format(e.value("format", std::string("repb")));
      m.entries.push_back(std::move(entry));
    }
    if (j.contains("head") && !j["head"].is_null()) m.head_path = resolve(j["head"].get<std::string>());
    if (j.contains("self")) m.self_category = j["self"].get<std::string>();
    if (j.contains("tokens")) {
      for (const auto& [role, token] : j["tokens"].items()) m.tokens.emplace_back(role, token.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": invalid manifest: " + e.what());
  }

  std::vector<std::string> cats;
  for (const auto& e : m.entries) cats.push_back(e.category);
  try {
    check_unique(cats, "manifest categories");
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  for (const auto& e : m.entries) {
    if (!fs::exists(e.path)) throw Error(ErrorKind::Io, path.string() + ": missing file '" + e.path.string() + "'");
  }
  if (m.head_path && !fs::exists(*m.head_path)) {
    throw Error(ErrorKind::Io, path.string() + ": missing head file '" + m.head_path->string() + "'");
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"category", e.category}, {"path", e.path.generic_string()}, {"format", to_string(e.format)}});
  }
  json j = {{"entries", entries}};
  if (manifest.head_path) j["head"] = manifest.head_path->generic_string();
  if (manifest.self_category) j["self"] = *manifest.self_category;
  if (!manifest.tokens.empty()) {
    json t = json::object();
    for (const auto& [role, token] : manifest.tokens) t[role] = token;
    j["tokens"] = t;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::vector<RepresentationSet> load_all(const Manifest& manifest) {
  std::vector<RepresentationSet> sets;
  sets.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) sets.push_back(load_representations(e.path, e.format, e.category));
  return sets;
}

}  // namespace cosur
