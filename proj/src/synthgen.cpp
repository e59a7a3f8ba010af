#include "cosur/synthgen.hpp"

#include "cosur/error.hpp"
#include "cosur/rng.hpp"

#include <cmath>
#include <fstream>

namespace cosur {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids: 0 frame, 1 shared mean, 2 head, 16 + c for class c samples.
constexpr std::uint64_t kFrameStream = 0;
constexpr std::uint64_t kMeanStream = 1;
constexpr std::uint64_t kHeadStream = 2;
constexpr std::uint64_t kClassStreamBase = 16;

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Philox& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Eigen::VectorXd to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json from_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::uint64_t seed, std::uint64_t stream) {
  Philox rng(seed, stream);
  const Eigen::MatrixXd g = gaussian(d, d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1;
  }
  return q;
}

VocabHead generate_head(Eigen::Index d, Eigen::Index vocab_size, Eigen::Index rank, std::uint64_t seed,
                        bool orthogonal_completion, std::vector<std::string> token_names) {
  if (vocab_size < 2 || d < 1) throw Error(ErrorKind::InvalidArgument, "head needs |V| >= 2 and d >= 1");
  if (rank < 1 || rank > std::min(vocab_size, d)) {
    throw Error(ErrorKind::InvalidArgument, "head rank " + std::to_string(rank) + " outside [1, min(|V|, d)] = [1, " +
                                                std::to_string(std::min(vocab_size, d)) + "]");
  }
  if (token_names.empty()) {
    for (Eigen::Index i = 0; i < vocab_size; ++i) token_names.push_back("t" + std::to_string(i));
  }

  Eigen::MatrixXd w;
  if (orthogonal_completion) {
    if (!(rank == d && d == vocab_size)) {
      throw Error(ErrorKind::InvalidArgument, "orthogonal completion requires rank = d = |V|");
    }
    w = random_orthogonal(d, seed, kHeadStream);
  } else {
    Philox rng(seed, kHeadStream);
    const Eigen::MatrixXd a = gaussian(vocab_size, rank, rng);
    const Eigen::MatrixXd b = gaussian(rank, d, rng);
    w = a * b;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const double n = w.row(i).norm();
      if (n > 0.0) w.row(i) /= n;
    }
  }
  return VocabHead(w.cast<float>(), std::move(token_names));
}

SynthOutput generate(const SynthConfig& cfg) {
  if (cfg.d < 1 || cfg.n_per_class < 1) throw Error(ErrorKind::InvalidArgument, "synth: d and n_per_class must be >= 1");
  if (cfg.classes.empty()) throw Error(ErrorKind::InvalidArgument, "synth: no classes configured");

  const Eigen::MatrixXd frame = random_orthogonal(cfg.d, cfg.seed, kFrameStream);
  Eigen::Index next = 0;
  auto take = [&](Eigen::Index count, const std::string& who) {
    if (next + count > cfg.d) {
      throw Error(ErrorKind::InvalidArgument, "synth: class '" + who + "' needs " + std::to_string(count) +
                                                  " fresh directions but only " + std::to_string(cfg.d - next) +
                                                  " of d=" + std::to_string(cfg.d) + " remain");
    }
    Eigen::MatrixXd cols = frame.middleCols(next, count);
    next += count;
    return cols;
  };

  SynthOutput out;
  if (cfg.shared_mean) {
    if (cfg.shared_mean->size() != cfg.d) throw Error(ErrorKind::DimensionMismatch, "synth: shared_mean length != d");
    out.shared_mean = *cfg.shared_mean;
  } else {
    Philox rng(cfg.seed, kMeanStream);
    Eigen::VectorXd dir = gaussian(cfg.d, 1, rng);
    out.shared_mean = cfg.shared_mean_norm * dir / dir.norm();
  }

  std::vector<Eigen::VectorXd> offsets;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    const auto& cls = cfg.classes[c];
    if (cls.rank < 1 || cls.rank > cfg.d) {
      throw Error(ErrorKind::InvalidArgument, "synth: class '" + cls.category + "' rank must lie in [1, d]");
    }
    if (cls.noise_sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "synth: noise_sigma must be >= 0");

    Eigen::MatrixXd basis;
    if (cls.angles) {
      if (cls.reference >= c) {
        throw Error(ErrorKind::InvalidArgument, "synth: class '" + cls.category +
                                                    "' must reference an earlier class for its angle profile");
      }
      const auto& ref = out.private_bases[cls.reference];
      if (static_cast<Eigen::Index>(cls.angles->size()) != cls.rank || cls.rank > ref.cols()) {
        throw Error(ErrorKind::InvalidArgument, "synth: class '" + cls.category +
                                                    "' needs one angle per column and rank <= reference rank");
      }
      const Eigen::MatrixXd fresh = take(cls.rank, cls.category);
      basis.resize(cfg.d, cls.rank);
      for (Eigen::Index i = 0; i < cls.rank; ++i) {
        const double theta = (*cls.angles)[static_cast<std::size_t>(i)];
        basis.col(i) = std::cos(theta) * ref.col(i) + std::sin(theta) * fresh.col(i);
      }
    } else {
      basis = take(cls.rank, cls.category);
    }
    out.private_bases.push_back(basis);

    if (cls.mean_offset) {
      if (cls.mean_offset->size() != cfg.d) throw Error(ErrorKind::DimensionMismatch, "synth: mean_offset length != d");
      offsets.push_back(*cls.mean_offset);
    } else if (cls.offset_norm != 0.0) {
      offsets.push_back(cls.offset_norm * take(1, cls.category).col(0));
    } else {
      offsets.push_back(Eigen::VectorXd::Zero(cfg.d));
    }
  }

  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    const auto& cls = cfg.classes[c];
    const Eigen::MatrixXd& basis = out.private_bases[c];
    const Eigen::VectorXd center = out.shared_mean + offsets[c];
    Philox rng(cfg.seed, kClassStreamBase + c);
    MatrixF data(cfg.n_per_class, cfg.d);
    std::vector<std::string> ids;
    Eigen::VectorXd z(cls.rank);
    Eigen::VectorXd e(cfg.d);
    for (Eigen::Index i = 0; i < cfg.n_per_class; ++i) {
      for (Eigen::Index j = 0; j < cls.rank; ++j) z[j] = rng.normal();
      for (Eigen::Index j = 0; j < cfg.d; ++j) e[j] = rng.normal();
      const Eigen::VectorXd sample = center + cls.latent_scale * (basis * z) + cls.noise_sigma * e;
      data.row(i) = sample.transpose().cast<float>();
      ids.push_back(cls.category + "-" + std::to_string(i));
    }
    out.sets.emplace_back(cls.category, std::move(data), std::move(ids));
  }

  if (cfg.head) {
    out.head = generate_head(cfg.d, cfg.head->vocab_size, cfg.head->rank, cfg.seed, cfg.head->orthogonal_completion,
                             cfg.head->token_names);
  }
  return out;
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig cfg;
  try {
    cfg.d = j.at("d").get<Eigen::Index>();
    cfg.n_per_class = j.at("n_per_class").get<Eigen::Index>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.shared_mean_norm = j.value("shared_mean_norm", 0.0);
    if (j.contains("shared_mean")) cfg.shared_mean = to_vector(j["shared_mean"]);
    for (const auto& c : j.at("classes")) {
      SynthClass cls;
      cls.category = c.at("category").get<std::string>();
      cls.rank = c.value("rank", Eigen::Index{1});
      if (c.contains("angles")) {
        const auto& a = c["angles"];
        if (a.is_array()) {
          cls.angles = a.get<std::vector<double>>();
        } else if (!(a.is_string() && a.get<std::string>() == "orthogonal")) {
          throw Error(ErrorKind::Format, "synth config: 'angles' must be an array or \"orthogonal\"");
        }
      }
      cls.reference = c.value("reference", std::size_t{0});
      if (c.contains("mean_offset")) {
        const auto& m = c["mean_offset"];
        if (m.is_array()) {
          cls.mean_offset = to_vector(m);
        } else {
          cls.offset_norm = m.at("norm").get<double>();
        }
      }
      cls.noise_sigma = c.value("noise_sigma", 0.0);
      cls.latent_scale = c.value("latent_scale", 1.0);
      cfg.classes.push_back(std::move(cls));
    }
    if (j.contains("head")) {
      const auto& h = j["head"];
      SynthHeadConfig head;
      head.vocab_size = h.at("vocab_size").get<Eigen::Index>();
      head.rank = h.value("rank", std::min(head.vocab_size, cfg.d));
      head.orthogonal_completion = h.value("orthogonal_completion", false);
      if (h.contains("token_names")) head.token_names = h["token_names"].get<std::vector<std::string>>();
      cfg.head = head;
    }
    if (j.contains("tokens")) {
      for (const auto& [role, tok] : j["tokens"].items()) cfg.tokens.emplace_back(role, tok.get<std::string>());
    }
    if (j.contains("self")) cfg.self_category = j["self"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("synth config: ") + e.what());
  }
  return cfg;
}

json to_json(const SynthConfig& cfg) {
  json classes = json::array();
  for (const auto& c : cfg.classes) {
    json cj = {{"category", c.category}, {"rank", c.rank}, {"noise_sigma", c.noise_sigma},
               {"latent_scale", c.latent_scale}};
    if (c.angles) {
      cj["angles"] = *c.angles;
      cj["reference"] = c.reference;
    }
    if (c.mean_offset) {
      cj["mean_offset"] = from_vector(*c.mean_offset);
    } else if (c.offset_norm != 0.0) {
      cj["mean_offset"] = {{"norm", c.offset_norm}};
    }
    classes.push_back(cj);
  }
  json j = {{"d", cfg.d}, {"n_per_class", cfg.n_per_class}, {"seed", cfg.seed}, {"classes", classes}};
  if (cfg.shared_mean) {
    j["shared_mean"] = from_vector(*cfg.shared_mean);
  } else {
    j["shared_mean_norm"] = cfg.shared_mean_norm;
  }
  if (cfg.head) {
    j["head"] = {{"vocab_size", cfg.head->vocab_size},
                 {"rank", cfg.head->rank},
                 {"orthogonal_completion", cfg.head->orthogonal_completion}};
    if (!cfg.head->token_names.empty()) j["head"]["token_names"] = cfg.head->token_names;
  }
  if (!cfg.tokens.empty()) {
    json t = json::object();
    for (const auto& [role, tok] : cfg.tokens) t[role] = tok;
    j["tokens"] = t;
  }
  if (cfg.self_category) j["self"] = *cfg.self_category;
  return j;
}

fs::path write_synth(const SynthOutput& out, const SynthConfig& cfg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());

  Manifest m;
  for (const auto& s : out.sets) {
    const std::string file = s.category() + ".repb";
    write_representations(s, dir / file, FileFormat::Repb);
    m.entries.push_back({s.category(), file, FileFormat::Repb});
  }
  if (out.head) {
    write_vocab_head(*out.head, dir / "head.repb");
    m.head_path = "head.repb";
  }
  m.tokens = cfg.tokens;
  m.self_category = cfg.self_category;
  const fs::path manifest = dir / "manifest.json";
  write_manifest(m, manifest);
  return manifest;
}

namespace {

SynthClass plain_class(std::string category, Eigen::Index rank, double noise_sigma) {
  SynthClass c;
  c.category = std::move(category);
  c.rank = rank;
  c.noise_sigma = noise_sigma;
  return c;
}

SynthConfig base_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.d = 64;
  cfg.n_per_class = 400;
  cfg.seed = seed;
  cfg.shared_mean_norm = 10.0;
  cfg.self_category = "self";
  return cfg;
}

}  // namespace

SynthConfig paper_regime_config(std::uint64_t seed) {
  SynthConfig cfg = base_config(seed);
  cfg.classes = {plain_class("self", 4, 0.1), plain_class("other", 4, 0.1)};
  SynthHeadConfig head;
  head.vocab_size = 16;
  head.rank = 16;
  cfg.head = head;
  cfg.tokens = {{"self", "t0"}, {"other", "t1"}};
  return cfg;
}

SynthConfig mean_offset_config(std::uint64_t seed) {
  SynthConfig cfg = base_config(seed);
  SynthClass self = plain_class("self", 4, 0.1);
  self.offset_norm = 2.0;
  SynthClass other = plain_class("other", 4, 0.1);
  other.angles = std::vector<double>(4, 0.0);
  other.reference = 0;
  other.offset_norm = 2.0;
  cfg.classes = {self, other};
  return cfg;
}

SynthConfig generalization_config(std::uint64_t seed) {
  SynthConfig cfg = base_config(seed);
  SynthClass unseen = plain_class("unseen", 4, 0.1);
  unseen.angles = std::vector<double>(4, 0.3);
  unseen.reference = 1;
  cfg.classes = {plain_class("self", 4, 0.1), plain_class("other", 4, 0.1), unseen};
  return cfg;
}

std::optional<SynthConfig> preset_config(const std::string& name, std::uint64_t seed) {
  if (name == "paper-regime") return paper_regime_config(seed);
  if (name == "mean-offset") return mean_offset_config(seed);
  if (name == "generalization") return generalization_config(seed);
  return std::nullopt;
}

BottleneckFixture make_bottleneck_fixture(Eigen::Index d, Eigen::Index n_per_class, Eigen::Index head_rank,
                                          double separation, double noise, std::uint64_t seed) {
  VocabHead limited = generate_head(d, d, head_rank, seed);
  VocabHead full = generate_head(d, d, d, seed, true);

  // Separation direction: random, projected off the limited head's row space.
  const Eigen::MatrixXd w = limited.weights().cast<double>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinV);
  const Eigen::MatrixXd row_space = svd.matrixV().leftCols(head_rank);
  Philox rng(seed, kMeanStream);
  Eigen::VectorXd u = gaussian(d, 1, rng);
  u -= row_space * (row_space.transpose() * u);
  u.normalize();

  std::vector<RepresentationSet> sets;
  for (int c = 0; c < 2; ++c) {
    const double sign = c == 0 ? 0.5 : -0.5;
    Philox cls_rng(seed, kClassStreamBase + static_cast<std::uint64_t>(c));
    MatrixF data(n_per_class, d);
    std::vector<std::string> ids;
    const std::string category = c == 0 ? "a" : "b";
    for (Eigen::Index i = 0; i < n_per_class; ++i) {
      Eigen::VectorXd h = sign * separation * u;
      for (Eigen::Index j = 0; j < d; ++j) h[j] += noise * cls_rng.normal();
      data.row(i) = h.transpose().cast<float>();
      ids.push_back(category + "-" + std::to_string(i));
    }
    sets.emplace_back(category, std::move(data), std::move(ids));
  }
  return BottleneckFixture{std::move(sets), std::move(limited), std::move(full)};
}

}  // namespace cosur
