// bca: command-line driver for generating data, training reduce/enhance
// branches, embedding, and auditing bias in the resulting rankings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcareid/checkpoint.hpp"
#include "bcareid/errors.hpp"
#include "bcareid/experiment.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace bcareid;

namespace {

constexpr const char* kVersion = "0.3.0";

struct Options {
  std::string config;
  std::string preset;
  std::string data;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string channel;
  std::string protocol = "standard";
  std::string lambdas = "0.005,0.01,0.05,0.1";
  std::vector<std::string> checkpoints;
};

// Tracks what a command read and wrote; serialized as manifest.json.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void config(const RunConfig& c) { config_ = format_run_config(c), seed_ = c.seed; }

  // Writes a text artifact and records it.
  void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
    outputs_.push_back(p.string());
  }
  void record(const fs::path& p) { outputs_.push_back(p.string()); }

  void finish(const fs::path& dir, const Options& o) {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config_path"] = o.config;
    j["preset"] = o.preset;
    j["seed"] = seed_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    auto outputs = outputs_;
    outputs.push_back((dir / "manifest.json").string());
    j["outputs"] = outputs;
    j["version"] = kVersion;
    j["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream(dir / "manifest.json") << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> inputs_, outputs_;
  std::string config_;
  std::uint64_t seed_ = 0;
};

RunConfig resolve_config(const Options& o, Manifest& m) {
  RunConfig cfg = o.preset.empty() ? RunConfig{} : preset(o.preset);
  if (!o.config.empty()) {
    cfg = load_run_config(o.config, cfg);
    m.input(o.config);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.mode.empty()) {
    auto mode = parse_mode(o.mode);
    if (!mode) throw ConfigError("--mode must be reduce or enhance, got '" + o.mode + "'");
    cfg.branch.mode = *mode;
  }
  if (!o.channel.empty()) cfg.branch.bias_channel = o.channel;
  cfg.sync_seeds();
  m.config(cfg);
  return cfg;
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
  return value;
}

Dataset read_data(const Options& o, Manifest& m) {
  const auto& path = require(o.data, "--data");
  m.input(path);
  return load_dataset(path);
}

Protocol parse_protocol(const Options& o, const RunConfig& cfg) {
  if (o.protocol == "standard") return Protocol::standard();
  if (o.protocol == "nobias") return Protocol::nobias(cfg.branch.bias_channel);
  throw ConfigError("--protocol must be standard or nobias, got '" + o.protocol + "'");
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("--lambdas: cannot parse '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void cmd_gen(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto split = prepare_dataset(cfg);
  save_dataset(split.dataset, out / "dataset.csv");
  m.record(out / "dataset.csv");
  m.write(out / "run.cfg", format_run_config(cfg));
  std::printf("samples=%zu train=%zu query=%zu gallery=%zu dropped_queries=%zu\n",
              split.dataset.samples.size(), split.dataset.count(Split::kTrain),
              split.dataset.count(Split::kQuery), split.dataset.count(Split::kGallery),
              split.dropped_queries);
}

void cmd_train(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto ds = read_data(o, m);
  auto result = train_branch(ds, cfg.branch);
  const auto name = std::string(to_string(cfg.branch.mode)) + "-" + cfg.branch.bias_channel;
  const auto ckpt = out / (name + ".ckpt");
  checkpoint_save({result.state.params, result.state.adam, result.state.epoch, format_run_config(cfg)},
                  ckpt);
  m.record(ckpt);
  m.write(out / (name + "_log.csv"), result.log.to_csv());
  const auto& last = result.log.epochs.empty() ? EpochLog{} : result.log.epochs.back();
  std::printf("branch=%s epochs=%d lambda_db=%g loss_dr=%.6g loss_db=%.6g checkpoint=%s\n",
              name.c_str(), result.state.epoch, cfg.branch.effective_lambda_db(), last.loss_dr,
              last.loss_db, ckpt.string().c_str());
}

void cmd_embed(const Options& o, Manifest& m, const fs::path& out) {
  if (o.checkpoints.empty()) throw ConfigError("--checkpoint is required (repeatable)");
  auto ds = read_data(o, m);
  std::vector<EmbeddingSet> sets;
  std::map<std::string, int> seen;
  RunConfig first;
  for (const auto& path : o.checkpoints) {
    m.input(path);
    auto ckpt = checkpoint_load(path);
    auto cfg = parse_run_config(ckpt.config);
    if (sets.empty()) first = cfg;
    auto name = std::string(cfg.branch.mode == BranchMode::kReduce ? "R" : "E") + ":" +
                cfg.branch.bias_channel;
    if (int n = seen[name]++; n > 0) name += "#" + std::to_string(n + 1);
    sets.push_back(embed_all(ckpt.params, ds, {}, {cfg.eval.l2_normalize, name}));
  }
  m.config(first);
  auto all = concat(sets);
  save_dataset(all.to_dataset(), out / "embeddings.csv", "e");
  m.record(out / "embeddings.csv");
  json spans = json::array();
  for (const auto& s : all.provenance) spans.push_back({{"branch", s.branch}, {"begin", s.begin}, {"end", s.end}});
  m.write(out / "provenance.json", spans.dump(2) + "\n");
  std::printf("rows=%zu dim=%ld branches=%zu\n", all.size(), static_cast<long>(all.dim()),
              all.provenance.size());
}

EmbeddingSet read_embeddings(const Options& o, Manifest& m) {
  return EmbeddingSet::from_dataset(read_data(o, m), "input");
}

void write_report(const EvalReport& rep, Manifest& m, const fs::path& out) {
  m.write(out / "report.json", rep.to_json());
  m.write(out / "metrics.csv", rep.metrics_csv());
  for (const auto& ch : rep.channels) m.write(out / ("curves_" + ch.channel + ".csv"), ch.curves_csv());
}

void cmd_eval(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto emb = read_embeddings(o, m);
  auto opts = evaluate_options(cfg);
  if (!o.channel.empty()) opts.channels = {o.channel};
  auto rep = evaluate_embeddings(emb, parse_protocol(o, cfg), opts);
  write_report(rep, m, out);
  std::printf("protocol=%s queries=%zu dropped=%zu rank1=%.4f rank5=%.4f map=%.4f\n",
              rep.protocol.c_str(), rep.queries, rep.dropped_queries, rep.rank1(),
              rep.metrics.rank(5), rep.metrics.mean_ap);
  for (const auto& ch : rep.channels)
    std::printf("channel=%s probe_acc=%.4f nauc_neg=%.4f nauc_pos=%.4f\n", ch.channel.c_str(),
                ch.probe ? ch.probe->accuracy : -1.0, ch.nauc_neg, ch.nauc_pos);
}

void cmd_probe(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto emb = read_embeddings(o, m);
  auto r = probe_embeddings(emb, cfg.branch.bias_channel, cfg.probe);
  json j{{"channel", r.channel}, {"accuracy", r.accuracy}, {"chance", r.chance},
         {"classes", r.classes}, {"train_rows", r.train_rows}, {"test_rows", r.test_rows}};
  m.write(out / ("probe_" + r.channel + ".json"), j.dump(2) + "\n");
  std::printf("channel=%s accuracy=%.4f chance=%.4f\n", r.channel.c_str(), r.accuracy, r.chance);
}

void cmd_stats(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto emb = read_embeddings(o, m);
  auto opts = evaluate_options(cfg);
  opts.run_probe = false;
  opts.channels = {cfg.branch.bias_channel};
  auto rep = evaluate_embeddings(emb, parse_protocol(o, cfg), opts);
  const auto& ch = rep.channels.at(0);
  m.write(out / ("curves_" + ch.channel + ".csv"), ch.curves_csv());
  json j{{"channel", ch.channel}, {"protocol", rep.protocol}, {"nauc_k", ch.nauc_k},
         {"nauc_neg", ch.nauc_neg}, {"nauc_pos", ch.nauc_pos}, {"queries", rep.queries}};
  m.write(out / ("stats_" + ch.channel + ".json"), j.dump(2) + "\n");
  std::printf("channel=%s nauc_neg=%.4f nauc_pos=%.4f\n", ch.channel.c_str(), ch.nauc_neg, ch.nauc_pos);
}

void cmd_sweep(const Options& o, Manifest& m, const fs::path& out) {
  auto cfg = resolve_config(o, m);
  auto ds = read_data(o, m);
  auto lambdas = parse_lambdas(o.lambdas);
  auto rows = lambda_sweep(ds, cfg, cfg.branch.mode, lambdas);
  auto csv = sweep_csv(rows);
  m.write(out / "sweep.csv", csv);
  std::fputs(csv.c_str(), stdout);
}

std::string escape(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '"') c = c == '\n' ? ' ' : '\'';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bca - bias-controlled metric learning toolkit for re-identification"};
  app.require_subcommand(1);
  app.footer("Config keys (key = value, one per line; unknown keys are rejected):\n" +
             config_key_help() + "\nPresets:" + [] {
               std::string s;
               for (const auto& n : preset_names()) s += " " + n;
               return s;
             }());

  Options o;
  using Handler = void (*)(const Options&, Manifest&, const fs::path&);
  struct Command {
    const char* name;
    const char* help;
    Handler fn;
  };
  const Command commands[] = {
      {"gen", "generate a synthetic dataset with a query/gallery split", cmd_gen},
      {"train", "train one reduce or enhance branch", cmd_train},
      {"embed", "embed a dataset with one or more checkpoints (concatenated)", cmd_embed},
      {"eval", "retrieval metrics, probe accuracy and same-bias rank curves", cmd_eval},
      {"probe", "bias probe accuracy on frozen embeddings", cmd_probe},
      {"stats", "same-bias rank-probability curves and nauc", cmd_stats},
      {"sweep", "train and evaluate over a list of bias-loss weights", cmd_sweep},
  };
  std::map<CLI::App*, const Command*> by_app;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "bundled preset applied before --config");
    sub->add_option("--seed", o.seed, "run seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--mode", o.mode, "reduce | enhance");
    sub->add_option("--channel", o.channel, "bias channel (overrides bias_channel)");
    std::string_view n = c.name;
    if (n != "gen") sub->add_option("--data", o.data, "dataset or embedding CSV");
    if (n == "embed") sub->add_option("--checkpoint", o.checkpoints, "branch checkpoint (repeatable)");
    if (n == "eval" || n == "stats")
      sub->add_option("--protocol", o.protocol, "standard | nobias");
    if (n == "sweep") sub->add_option("--lambdas", o.lambdas, "comma-separated bias weights");
    by_app[sub] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error kind=usage message=\"%s\"\n", escape(e.what()).c_str());
    return 2;
  }

  auto* sub = app.get_subcommands().front();
  const Command* cmd = by_app.at(sub);
  try {
    const fs::path out = o.out;
    fs::create_directories(out);
    Manifest manifest(cmd->name, std::vector<std::string>(argv, argv + argc));
    cmd->fn(o, manifest, out);
    manifest.finish(out, o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error kind=%s message=\"%s\"\n", e.kind().c_str(), escape(e.what()).c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error kind=internal message=\"%s\"\n", escape(e.what()).c_str());
    return 1;
  }
  return 0;
}
