#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bcareid/config.hpp"
#include "bcareid/errors.hpp"
#include "bcareid/text.hpp"

namespace bcareid {

void RunConfig::sync_seeds() {
  branch.seed = seed;
  probe.seed = seed;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == s.npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_num(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': expected on/off, got '" + std::string(v) + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == v.npos ? v.npos : comma - start)));
    if (comma == v.npos) break;
    start = comma + 1;
  }
  return out;
}

std::string fmt_double(double v) { return format_double(v); }

struct KeyDef {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(NAME, FIELD, HELP)                                                        \
  KeyDef {                                                                                \
    NAME, HELP, [](RunConfig& c, std::string_view k, std::string_view v) {                \
      c.FIELD = parse_num<decltype(c.FIELD)>(k, v);                                       \
    },                                                                                    \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                        \
  }
#define REAL_KEY(NAME, FIELD, HELP)                                                                     \
  KeyDef {                                                                                              \
    NAME, HELP, [](RunConfig& c, std::string_view k, std::string_view v) { c.FIELD = parse_num<double>(k, v); }, \
        [](const RunConfig& c) { return fmt_double(c.FIELD); }                                          \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      INT_KEY("seed", seed, "run seed; every random stream derives from it"),
      INT_KEY("n_ids", generator.n_ids, "synthetic: number of identities"),
      INT_KEY("samples_per_id", generator.samples_per_id, "synthetic: samples per identity"),
      INT_KEY("d_id", generator.d_id, "synthetic: identity latent dimension"),
      INT_KEY("d_in", generator.d_in, "synthetic: feature dimension"),
      REAL_KEY("sigma", generator.sigma, "synthetic: feature noise scale"),
      INT_KEY("mixing_seed", generator.mixing_seed, "synthetic: seed of the fixed mixing matrices"),
      INT_KEY("n_cameras", generator.n_cameras,
              "synthetic: camera count when no channel is named camera"),
      REAL_KEY("train_fraction", generator.train_fraction, "synthetic: share of identities used for training"),
      KeyDef{"channels", "synthetic: comma-separated bias channel names",
             [](RunConfig& c, std::string_view, std::string_view v) {
               std::vector<ChannelSpec> next;
               for (auto name : split_list(v)) {
                 ChannelSpec spec{std::string(name), 2, 8, 1.0};
                 for (const auto& old : c.generator.channels)
                   if (old.name == name) spec = old;
                 next.push_back(spec);
               }
               c.generator.channels = std::move(next);
             },
             [](const RunConfig& c) {
               std::string out;
               for (const auto& ch : c.generator.channels) out += (out.empty() ? "" : ",") + ch.name;
               return out;
             }},
      REAL_KEY("query_fraction", query_fraction, "share of each held-out identity tagged query"),
      KeyDef{"mode", "branch mode: reduce | enhance",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               auto m = parse_mode(v);
               if (!m) throw ConfigError("key '" + std::string(k) + "': expected reduce or enhance");
               c.branch.mode = *m;
             },
             [](const RunConfig& c) { return std::string(to_string(c.branch.mode)); }},
      KeyDef{"bias_channel", "channel the bias loss and default statistics use",
             [](RunConfig& c, std::string_view, std::string_view v) { c.branch.bias_channel = std::string(v); },
             [](const RunConfig& c) { return c.branch.bias_channel; }},
      REAL_KEY("lambda_dr", branch.lambda_dr, "weight of the re-identification loss"),
      KeyDef{"lambda_db", "weight of the bias loss (>= 0, sign from mode) or auto",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "auto")
                 c.branch.lambda_db.reset();
               else
                 c.branch.lambda_db = parse_num<double>(k, v);
             },
             [](const RunConfig& c) {
               return c.branch.lambda_db ? fmt_double(*c.branch.lambda_db) : std::string("auto");
             }},
      REAL_KEY("margin_dr", branch.margin_dr, "margin of the re-identification loss"),
      REAL_KEY("margin_db", branch.margin_db, "margin of the bias loss"),
      KeyDef{"bias_hinge", "on: hinge on the bias term; off: raw bias argument",
             [](RunConfig& c, std::string_view k, std::string_view v) { c.branch.bias_hinge = parse_bool(k, v); },
             [](const RunConfig& c) { return std::string(c.branch.bias_hinge ? "on" : "off"); }},
      INT_KEY("P", branch.p, "identities per batch"),
      INT_KEY("K", branch.k, "instances per identity per batch"),
      INT_KEY("epochs", branch.epochs, "training epochs"),
      REAL_KEY("base_rate", branch.base_rate, "Adam learning rate at epoch 0 (linear decay to zero)"),
      KeyDef{"hidden", "comma-separated hidden layer widths",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               c.branch.hidden.clear();
               for (auto w : split_list(v)) c.branch.hidden.push_back(parse_num<int>(k, w));
             },
             [](const RunConfig& c) {
               std::string out;
               for (int h : c.branch.hidden) out += (out.empty() ? "" : ",") + std::to_string(h);
               return out;
             }},
      INT_KEY("emb_dim", branch.emb_dim, "embedding dimension"),
      REAL_KEY("leaky_slope", branch.leaky_slope, "negative slope of hidden activations"),
      INT_KEY("probe_epochs", probe.epochs, "bias probe: full-batch epochs"),
      REAL_KEY("probe_rate", probe.rate, "bias probe: Adam learning rate"),
      INT_KEY("max_rank", eval.max_rank, "CMC and rank-probability curve length"),
      INT_KEY("nauc_k", eval.nauc_k, "ranks aggregated by nauc"),
      KeyDef{"l2_normalize", "normalize embeddings to unit length before retrieval",
             [](RunConfig& c, std::string_view k, std::string_view v) { c.eval.l2_normalize = parse_bool(k, v); },
             [](const RunConfig& c) { return std::string(c.eval.l2_normalize ? "on" : "off"); }},
  };
  return table;
}

#undef INT_KEY
#undef REAL_KEY

const char* kChannelFields[] = {"classes", "dim", "gain"};

}  // namespace

RunConfig parse_run_config(std::string_view text, RunConfig cfg) {
  struct Entry {
    std::string value;
    std::size_t line;
  };
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == text.npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (entries.count(key))
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    entries[key] = {std::string(trim(line.substr(eq + 1))), line_no};
    order.push_back(key);
    if (nl == text.size()) break;
  }

  auto apply = [&](const KeyDef& def, const std::string& key) {
    const auto& e = entries.at(key);
    try {
      def.set(cfg, key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  };

  // The channel list decides which per-channel keys exist, so it goes first.
  for (const auto& def : key_table())
    if (std::string_view(def.name) == "channels" && entries.count("channels")) apply(def, "channels");

  for (const auto& key : order) {
    if (key == "channels") continue;
    const auto& e = entries.at(key);
    bool handled = false;
    for (const auto& def : key_table())
      if (key == def.name) {
        apply(def, key);
        handled = true;
      }
    if (handled) continue;
    const auto dot = key.rfind('.');
    if (dot != key.npos) {
      const std::string ch = key.substr(0, dot), field = key.substr(dot + 1);
      for (auto& spec : cfg.generator.channels) {
        if (spec.name != ch) continue;
        try {
          if (field == "classes") {
            spec.classes = parse_num<int>(key, e.value);
            handled = true;
          } else if (field == "dim") {
            spec.latent_dim = parse_num<int>(key, e.value);
            handled = true;
          } else if (field == "gain") {
            spec.gain = parse_num<double>(key, e.value);
            handled = true;
          }
        } catch (const ConfigError& err) {
          throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
        }
      }
    }
    if (!handled)
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::move(base));
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& def : key_table()) {
    out += std::string(def.name) + " = " + def.get(cfg) + "\n";
    if (std::string_view(def.name) == "channels")
      for (const auto& ch : cfg.generator.channels) {
        out += ch.name + ".classes = " + std::to_string(ch.classes) + "\n";
        out += ch.name + ".dim = " + std::to_string(ch.latent_dim) + "\n";
        out += ch.name + ".gain = " + fmt_double(ch.gain) + "\n";
      }
  }
  return out;
}

std::string config_key_help() {
  std::string out;
  const RunConfig defaults;
  for (const auto& def : key_table()) {
    out += "  " + std::string(def.name) + " = " + def.get(defaults) + "\n      " + def.help + "\n";
    if (std::string_view(def.name) == "channels")
      for (const char* f : kChannelFields)
        out += "  <channel>." + std::string(f) + "\n      per-channel " +
               (std::string_view(f) == "classes" ? "class count"
                : std::string_view(f) == "dim"   ? "latent dimension"
                                                 : "signal gain") +
               " for each listed channel\n";
  }
  return out;
}


namespace {

const std::map<std::string, std::string>& preset_table() {
  // Desk-scale settings. margin_db is wide so the easy-pair hinge stays
  // active at the distance scale this encoder reaches; the higher rate
  // makes up for a run of only a few hundred steps.
  static const std::string kDesk =
      "P = 8\nK = 4\nmargin_db = 1000\nbase_rate = 0.001\n";
  static const std::map<std::string, std::string> table = {
      {"preset-pose2",
       "channels = pose\npose.classes = 2\npose.gain = 0.4\nbias_channel = pose\n"
       "sigma = 0.2\n" + kDesk},
      {"preset-pose2-clean",
       "channels = pose\npose.classes = 2\npose.gain = 0.4\nbias_channel = pose\n"
       "sigma = 0\n" + kDesk},
      {"preset-cam6",
       "channels = camera\ncamera.classes = 6\ncamera.gain = 0.4\nbias_channel = camera\n"
       "sigma = 0.2\n" + kDesk},
      {"preset-part3",
       "channels = part\npart.classes = 3\npart.gain = 0.4\nbias_channel = part\n"
       "sigma = 0.2\n" + kDesk},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : preset_table()) out.push_back(name);
  return out;
}

std::string preset_text(std::string_view name) {
  auto it = preset_table().find(std::string(name));
  if (it == preset_table().end()) throw ConfigError("unknown preset '" + std::string(name) + "'");
  return it->second;
}

RunConfig preset(std::string_view name) { return parse_run_config(preset_text(name)); }

}  // namespace bcareid
