#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bcareid/dataset.hpp"
#include "bcareid/errors.hpp"
#include "bcareid/text.hpp"

namespace bcareid {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kQuery: return "query";
    case Split::kGallery: return "gallery";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "query") return Split::kQuery;
  if (s == "gallery") return Split::kGallery;
  return std::nullopt;
}

std::optional<int> Channel::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

void GeneratorConfig::validate() const {
  if (n_ids < 2) throw ConfigError("n_ids must be >= 2");
  if (samples_per_id < 1) throw ConfigError("samples_per_id must be >= 1");
  if (d_id < 1) throw ConfigError("d_id must be >= 1");
  if (d_in < 1) throw ConfigError("d_in must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (n_cameras < 1) throw ConfigError("n_cameras must be >= 1");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ConfigError("train_fraction must lie in [0, 1]");
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (c.name.empty()) throw ConfigError("channel name must be non-empty");
    if (!seen.insert(c.name).second) throw ConfigError("duplicate channel '" + c.name + "'");
    if (c.classes < 2) throw ConfigError("channel '" + c.name + "' needs >= 2 classes");
    if (c.latent_dim < 1) throw ConfigError("channel '" + c.name + "' needs latent dim >= 1");
    if (!(c.gain >= 0.0)) throw ConfigError("channel '" + c.name + "' gain must be >= 0");
  }
}

std::optional<std::size_t> Dataset::channel_index(std::string_view n) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == n) return i;
  return std::nullopt;
}

std::size_t Dataset::require_channel(std::string_view n) const {
  if (auto i = channel_index(n)) return *i;
  throw ConfigError("dataset has no bias channel '" + std::string(n) + "'");
}

const std::string& Dataset::label(const Sample& s, std::size_t channel) const {
  return channels.at(channel).classes.at(static_cast<std::size_t>(s.bias.at(channel)));
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == split) out.push_back(i);
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [split](const Sample& s) { return s.split == split; }));
}

Matrix Dataset::feature_matrix(std::span<const std::size_t> rows) const {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = samples.at(rows[r]).features;
    for (std::size_t c = 0; c < feature_dim; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
  }
  return m;
}

void Dataset::validate() const {
  std::map<int, int> train_counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.features.size() != feature_dim)
      throw DataError("sample " + std::to_string(i) + ": feature length " +
                      std::to_string(s.features.size()) + " != " + std::to_string(feature_dim));
    if (s.bias.size() != channels.size())
      throw DataError("sample " + std::to_string(i) + ": missing bias channel labels");
    for (std::size_t c = 0; c < channels.size(); ++c)
      if (s.bias[c] < 0 || static_cast<std::size_t>(s.bias[c]) >= channels[c].classes.size())
        throw DataError("sample " + std::to_string(i) + ": label outside channel '" +
                        channels[c].name + "'");
    if (s.split == Split::kTrain) ++train_counts[s.id];
  }
  for (const auto& [id, n] : train_counts)
    if (n < 2)
      throw DataError("train identity " + std::to_string(id) + " has fewer than 2 samples");
}

bool same_content(const Dataset& a, const Dataset& b) {
  if (a.feature_dim != b.feature_dim || a.samples.size() != b.samples.size() ||
      a.channels.size() != b.channels.size())
    return false;
  for (std::size_t c = 0; c < a.channels.size(); ++c)
    if (a.channels[c].name != b.channels[c].name) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& x = a.samples[i];
    const auto& y = b.samples[i];
    if (x.id != y.id || x.camera != y.camera || x.split != y.split || x.features != y.features)
      return false;
    for (std::size_t c = 0; c < a.channels.size(); ++c)
      if (a.label(x, c) != b.label(y, c)) return false;
  }
  return true;
}

namespace {

std::vector<std::string> class_names(const ChannelSpec& spec) {
  static const std::vector<std::string> pose{"frontal", "side", "oblique"};
  static const std::vector<std::string> part{"upper", "central", "bottom"};
  std::vector<std::string> out;
  for (int k = 0; k < spec.classes; ++k) {
    if (spec.name == "pose" && spec.classes <= 3)
      out.push_back(pose[k]);
    else if (spec.name == "part" && spec.classes <= 3)
      out.push_back(part[k]);
    else
      out.push_back(std::to_string(k));
  }
  return out;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * normal(rng);
  return m;
}

}  // namespace

Dataset generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset ds;
  ds.name = "synthetic";
  ds.feature_dim = static_cast<std::size_t>(cfg.d_in);
  ds.generator = cfg;
  ds.seed = seed;

  std::optional<std::size_t> camera_channel;
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    ds.channels.push_back({cfg.channels[c].name, class_names(cfg.channels[c])});
    if (cfg.channels[c].name == "camera") camera_channel = c;
  }

  // Mixing matrices are scaled so every latent block contributes unit
  // variance per feature before its gain.
  Rng mix = derive_rng(cfg.mixing_seed, "mixing");
  const Matrix id_mixing = gaussian(cfg.d_in, cfg.d_id, 1.0 / std::sqrt(cfg.d_id), mix);
  std::vector<Matrix> channel_mixing;
  for (const auto& ch : cfg.channels)
    channel_mixing.push_back(gaussian(cfg.d_in, ch.latent_dim, 1.0 / std::sqrt(ch.latent_dim), mix));

  Rng latent = derive_rng(seed, "latents");
  std::vector<std::vector<Vector>> class_offsets;  // per channel, per class: B_c * v
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    std::vector<Vector> offsets;
    for (int k = 0; k < cfg.channels[c].classes; ++k) {
      const Matrix v = gaussian(cfg.channels[c].latent_dim, 1, 1.0, latent);
      offsets.push_back(cfg.channels[c].gain * (channel_mixing[c] * v).col(0));
    }
    class_offsets.push_back(std::move(offsets));
  }

  Rng sampling = derive_rng(seed, "samples");
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_train_ids = static_cast<int>(std::lround(cfg.train_fraction * cfg.n_ids));
  for (int id = 0; id < cfg.n_ids; ++id) {
    const Vector identity = (id_mixing * gaussian(cfg.d_id, 1, 1.0, latent)).col(0);
    for (int k = 0; k < cfg.samples_per_id; ++k) {
      Sample s;
      s.id = id;
      s.split = id < n_train_ids ? Split::kTrain : Split::kGallery;
      Vector f = identity;
      for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
        std::uniform_int_distribution<int> pick(0, cfg.channels[c].classes - 1);
        const int cls = pick(sampling);
        s.bias.push_back(cls);
        f += class_offsets[c][static_cast<std::size_t>(cls)];
      }
      if (camera_channel) {
        s.camera = s.bias[*camera_channel];
      } else {
        std::uniform_int_distribution<int> cam(0, cfg.n_cameras - 1);
        s.camera = cam(sampling);
      }
      if (cfg.sigma > 0.0)
        for (Eigen::Index j = 0; j < f.size(); ++j) f[j] += cfg.sigma * normal(sampling);
      s.features.assign(f.data(), f.data() + f.size());
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_feature_column(std::string_view name) {
  if (name.size() < 2 || (name[0] != 'f' && name[0] != 'e')) return false;
  return std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

Dataset parse_dataset_csv(std::string_view text, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == text.npos) nl = text.size();
      lines.push_back(trim_cr(text.substr(start, nl - start)));
      start = nl + 1;
    }
  }
  if (lines.empty() || lines.front().empty()) throw ParseError("missing header", 1, "");

  const auto header = split_fields(lines.front());
  static const char* kFixed[] = {"id", "camera", "split"};
  for (std::size_t i = 0; i < 3; ++i)
    if (header.size() <= i || header[i] != kFixed[i])
      throw ParseError(std::string("expected column '") + kFixed[i] + "'", 1,
                       header.size() > i ? std::string(header[i]) : "");
  std::size_t first_feature = 3;
  while (first_feature < header.size() && !is_feature_column(header[first_feature])) {
    ds.channels.push_back({std::string(header[first_feature]), {}});
    ++first_feature;
  }
  const std::size_t dim = header.size() - first_feature;
  for (std::size_t j = 0; j < dim; ++j) {
    const auto col = header[first_feature + j];
    if (!is_feature_column(col) || col.substr(1) != std::to_string(j) ||
        col[0] != header[first_feature][0])
      throw ParseError("feature columns must be numbered consecutively from 0", 1,
                       std::string(col));
  }
  ds.feature_dim = dim;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto line = lines[li];
    const std::size_t row = li + 1;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       row, fields.size() < header.size() ? "<missing>" : "<extra>");
    Sample s;
    if (!parse_number(fields[0], s.id)) throw ParseError("non-integer id", row, "id");
    if (!parse_number(fields[1], s.camera)) throw ParseError("non-integer camera", row, "camera");
    auto split = parse_split(fields[2]);
    if (!split) throw ParseError("unknown split '" + std::string(fields[2]) + "'", row, "split");
    s.split = *split;
    for (std::size_t c = 0; c < ds.channels.size(); ++c) {
      const auto label = fields[3 + c];
      if (label.empty()) throw ParseError("empty bias label", row, ds.channels[c].name);
      auto& ch = ds.channels[c];
      auto idx = ch.index_of(label);
      if (!idx) {
        ch.classes.emplace_back(label);
        idx = static_cast<int>(ch.classes.size() - 1);
      }
      s.bias.push_back(*idx);
    }
    s.features.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto field = fields[first_feature + j];
      if (!parse_number(field, s.features[j]) || !std::isfinite(s.features[j]))
        throw ParseError("non-numeric feature '" + std::string(field) + "'", row,
                         std::string(header[first_feature + j]));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset_csv(buf.str(), path.stem().string());
}

std::string dataset_to_csv(const Dataset& ds, std::string_view prefix) {
  std::string out = "id,camera,split";
  for (const auto& c : ds.channels) out += "," + c.name;
  for (std::size_t j = 0; j < ds.feature_dim; ++j)
    out += "," + std::string(prefix) + std::to_string(j);
  out += '\n';
  for (const auto& s : ds.samples) {
    out += std::to_string(s.id) + "," + std::to_string(s.camera) + "," +
           std::string(to_string(s.split));
    for (std::size_t c = 0; c < ds.channels.size(); ++c) out += "," + ds.label(s, c);
    for (double v : s.features) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, std::string_view prefix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  out << dataset_to_csv(ds, prefix);
  if (!out) throw DataError("write failed for " + path.string());
}

SplitResult split_query_gallery(const Dataset& ds, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("query fraction must lie in [0, 1]");
  std::map<int, std::vector<std::size_t>> held_out;
  std::set<int> train_ids;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].split == Split::kTrain)
      train_ids.insert(ds.samples[i].id);
    else
      held_out[ds.samples[i].id].push_back(i);
  }
  for (const auto& [id, rows] : held_out)
    if (train_ids.count(id))
      throw ConfigError("identity " + std::to_string(id) + " is both train and held-out");

  std::vector<Split> tags(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    tags[i] = ds.samples[i].split == Split::kTrain ? Split::kTrain : Split::kGallery;

  for (auto& [id, rows] : held_out) {
    std::vector<std::size_t> order = rows;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_query = static_cast<std::size_t>(std::lround(fraction * order.size()));
    if (fraction > 0.0 && n_query == 0) n_query = 1;
    if (n_query >= order.size()) n_query = order.size() > 1 ? order.size() - 1 : 0;
    for (std::size_t k = 0; k < n_query; ++k) tags[order[k]] = Split::kQuery;
  }

  SplitResult result;
  result.dataset.name = ds.name;
  result.dataset.channels = ds.channels;
  result.dataset.feature_dim = ds.feature_dim;
  result.dataset.generator = ds.generator;
  result.dataset.seed = ds.seed;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (tags[i] == Split::kQuery) {
      bool has_positive = false;
      for (std::size_t j : held_out[s.id])
        if (tags[j] == Split::kGallery && ds.samples[j].camera != s.camera) has_positive = true;
      if (!has_positive) {
        ++result.dropped_queries;
        continue;
      }
    }
    Sample copy = s;
    copy.split = tags[i];
    result.dataset.samples.push_back(std::move(copy));
  }
  if (result.dataset.count(Split::kQuery) == 0)
    throw EvaluationError("no valid queries after query/gallery split");
  return result;
}

}  // namespace bcareid
