// Copyright 2026 The Leop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leop/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "leop/error.hpp"
#include "leop/metrics.hpp"
#include "leop/rng.hpp"
#include "leop/sampler.hpp"
#include "leop/weights.hpp"

namespace leop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Task t) {
  switch (t) {
    case Task::kScaffoldDecoration: return "scaffold_decoration";
    case Task::kLinkerDesign: return "linker_design";
    case Task::kScaffoldHopping: return "scaffold_hopping";
  }
  return "unknown";
}

// ---------------------------------------------------------------- config

namespace {

class Block {
 public:
  Block(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError("config: '" + label() + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& item : j_.items()) {
      if (!ok.count(item.key())) throw ValidationError("config: unknown key '" + field(item.key()) + "'");
    }
  }

  template <class T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError("config: field '" + field(key) + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError("config: field '" + field(key) + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) {
          throw ValidationError("config: field '" + field(key) + "' must be non-negative");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError("config: field '" + field(key) + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError("config: field '" + field(key) + "' must be a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: field '" + field(key) + "' has the wrong type");
    }
  }

  std::optional<Block> sub(const char* key) const {
    if (!j_.contains(key)) return std::nullopt;
    return Block(j_.at(key), field(key));
  }

  std::string field(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }
  std::string label() const { return where_.empty() ? "<root>" : where_; }

 private:
  const json& j_;
  std::string where_;
};

void read_range(const Block& b, const char* key, chem::Range& r) {
  std::vector<double> v;
  b.read(key, v);
  if (v.empty()) return;
  if (v.size() != 2) throw ValidationError("config: field '" + b.field(key) + "' must be a [lo, hi] pair");
  r = {v[0], v[1]};
}

chem::ToyDatasetSpec parse_spec(const Block& b) {
  b.allow({"n_complexes", "pocket_size_range", "ligand_size_range", "mask_fraction_range", "random_seed",
           "contact_radius", "linker_fraction"});
  chem::ToyDatasetSpec s;
  b.read("n_complexes", s.n_complexes);
  read_range(b, "pocket_size_range", s.pocket_size);
  read_range(b, "ligand_size_range", s.ligand_size);
  read_range(b, "mask_fraction_range", s.mask_fraction);
  b.read("random_seed", s.random_seed);
  b.read("contact_radius", s.contact_radius);
  b.read("linker_fraction", s.linker_fraction);
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + b.label() + ": " + e.what());
  }
  return s;
}

json spec_json(const chem::ToyDatasetSpec& s) {
  return {{"n_complexes", s.n_complexes},
          {"pocket_size_range", {s.pocket_size.lo, s.pocket_size.hi}},
          {"ligand_size_range", {s.ligand_size.lo, s.ligand_size.hi}},
          {"mask_fraction_range", {s.mask_fraction.lo, s.mask_fraction.hi}},
          {"random_seed", s.random_seed},
          {"contact_radius", s.contact_radius},
          {"linker_fraction", s.linker_fraction}};
}

}  // namespace

RunConfig parse_config(const json& j) {
  Block root(j, "");
  root.allow({"task", "seed", "schedule", "model", "vocab", "train", "affinity_train", "guidance", "data", "sampling",
              "weights", "output_dir", "threads", "evaluate"});
  RunConfig c;
  std::string task = to_string(c.task);
  root.read("task", task);
  if (task == "scaffold_decoration") {
    c.task = Task::kScaffoldDecoration;
  } else if (task == "linker_design") {
    c.task = Task::kLinkerDesign;
  } else if (task == "scaffold_hopping") {
    c.task = Task::kScaffoldHopping;
  } else {
    throw ValidationError("config: field 'task' must be scaffold_decoration, linker_design or scaffold_hopping");
  }
  root.read("seed", c.seed);
  root.read("vocab", c.vocab);
  root.read("weights", c.weights);
  root.read("output_dir", c.output_dir);
  root.read("threads", c.threads);
  if (c.threads < 0) throw ValidationError("config: field 'threads' must be >= 0");

  if (auto b = root.sub("schedule")) {
    b->allow({"kind", "T", "power"});
    std::string kind = to_string(c.schedule.kind);
    b->read("kind", kind);
    c.schedule.kind = schedule_kind_from_string(kind);
    b->read("T", c.schedule.T);
    b->read("power", c.schedule.power);
  }
  c.schedule.build();  // validates

  if (auto b = root.sub("model")) {
    b->allow({"layers", "hidden", "edge_hidden", "knn", "time_dim", "rbf", "rbf_max"});
    b->read("layers", c.model.layers);
    b->read("hidden", c.model.hidden);
    b->read("edge_hidden", c.model.edge_hidden);
    b->read("knn", c.model.knn);
    b->read("time_dim", c.model.time_dim);
    b->read("rbf", c.model.rbf);
    b->read("rbf_max", c.model.rbf_max);
  }
  c.model.atom_types = static_cast<int>(c.vocab.size()) + 1;
  c.model.validate();

  if (auto b = root.sub("train")) {
    b->allow({"lambda_atom", "lambda_bond", "learning_rate", "batch_size", "epochs", "beta1", "beta2", "eps",
              "cosine_decay", "resume"});
    b->read("lambda_atom", c.train.lambda_atom);
    b->read("lambda_bond", c.train.lambda_bond);
    b->read("learning_rate", c.train.learning_rate);
    b->read("batch_size", c.train.batch_size);
    b->read("epochs", c.train.epochs);
    b->read("beta1", c.train.beta1);
    b->read("beta2", c.train.beta2);
    b->read("eps", c.train.eps);
    b->read("cosine_decay", c.train.cosine_decay);
    b->read("resume", c.resume);
  }
  if (auto b = root.sub("affinity_train")) {
    b->allow({"learning_rate", "batch_size", "epochs", "validation_fraction"});
    b->read("learning_rate", c.affinity_train.learning_rate);
    b->read("batch_size", c.affinity_train.batch_size);
    b->read("epochs", c.affinity_train.epochs);
    b->read("validation_fraction", c.affinity_train.validation_fraction);
  }
  if (auto b = root.sub("guidance")) {
    b->allow({"enabled", "s", "r1", "r2", "delta"});
    b->read("enabled", c.guidance.enabled);
    b->read("s", c.guidance.s);
    b->read("r1", c.guidance.r1);
    b->read("r2", c.guidance.r2);
    b->read("delta", c.guidance.delta);
  }
  if (auto b = root.sub("data")) {
    b->allow({"spec", "dataset_dir"});
    if (auto s = b->sub("spec")) c.data_spec = parse_spec(*s);
    b->read("dataset_dir", c.dataset_dir);
  }
  if (auto b = root.sub("sampling")) {
    b->allow({"n_samples", "targets", "t_hop", "hop_fragment", "padding_mean", "padding_max"});
    b->read("n_samples", c.n_samples);
    b->read("targets", c.targets);
    b->read("t_hop", c.t_hop);
    b->read("hop_fragment", c.hop_fragment);
    b->read("padding_mean", c.padding.mean_extra);
    b->read("padding_max", c.padding.max_extra);
  }
  if (auto b = root.sub("evaluate")) {
    b->allow({"run_dir"});
    b->read("run_dir", c.run_dir);
  }
  if (c.n_samples < 1) throw ValidationError("config: field 'sampling.n_samples' must be >= 1");
  if (c.targets.empty()) throw ValidationError("config: field 'sampling.targets' must not be empty");
  if (c.t_hop < 0 || c.t_hop > c.schedule.T) throw ValidationError("config: field 'sampling.t_hop' outside [0, T]");
  c.padding.validate();
  c.guidance.validate();
  c.train.padding = c.padding;
  c.affinity_train.padding = c.padding;
  c.train.validate();
  c.affinity_train.validate();
  return c;
}

json RunConfig::to_json() const {
  json j = {{"task", to_string(task)},
            {"seed", seed},
            {"schedule", {{"kind", leop::to_string(schedule.kind)}, {"T", schedule.T}, {"power", schedule.power}}},
            {"model",
             {{"layers", model.layers},
              {"hidden", model.hidden},
              {"edge_hidden", model.edge_hidden},
              {"knn", model.knn},
              {"time_dim", model.time_dim},
              {"rbf", model.rbf},
              {"rbf_max", model.rbf_max}}},
            {"vocab", vocab},
            {"train",
             {{"lambda_atom", train.lambda_atom},
              {"lambda_bond", train.lambda_bond},
              {"learning_rate", train.learning_rate},
              {"batch_size", train.batch_size},
              {"epochs", train.epochs},
              {"beta1", train.beta1},
              {"beta2", train.beta2},
              {"eps", train.eps},
              {"cosine_decay", train.cosine_decay},
              {"resume", resume}}},
            {"affinity_train",
             {{"learning_rate", affinity_train.learning_rate},
              {"batch_size", affinity_train.batch_size},
              {"epochs", affinity_train.epochs},
              {"validation_fraction", affinity_train.validation_fraction}}},
            {"guidance",
             {{"enabled", guidance.enabled},
              {"s", guidance.s},
              {"r1", guidance.r1},
              {"r2", guidance.r2},
              {"delta", guidance.delta}}},
            {"data", {{"dataset_dir", dataset_dir}}},
            {"sampling",
             {{"n_samples", n_samples},
              {"targets", targets},
              {"t_hop", t_hop},
              {"hop_fragment", hop_fragment},
              {"padding_mean", padding.mean_extra},
              {"padding_max", padding.max_extra}}},
            {"evaluate", {{"run_dir", run_dir}}},
            {"weights", weights},
            {"output_dir", output_dir},
            {"threads", threads}};
  if (data_spec) j["data"]["spec"] = spec_json(*data_spec);
  return j;
}

// ---------------------------------------------------------------- dataset

namespace {

std::string numbered(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d%s", stem, i, ext);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  try {
    write_file_atomic(p, text);
  } catch (const fs::filesystem_error& e) {
    throw Error("cannot write '" + p.string() + "': " + e.what());
  }
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create directory '" + p.string() + "': " + ec.message());
}

}  // namespace

void write_dataset(const std::string& dir, const chem::ToyDatasetSpec& spec, const chem::AtomVocab& vocab) {
  const fs::path root(dir);
  make_dirs(root / "pockets");
  make_dirs(root / "ligands");
  const auto complexes = chem::gen_toy_dataset(spec, vocab);
  json manifest = json::array();
  std::ostringstream scores;
  scores << "index,pocket_file,ligand_file,oracle_affinity\n";
  chem::OracleConstants oc;
  oc.contact_radius = spec.contact_radius;
  for (std::size_t i = 0; i < complexes.size(); ++i) {
    const auto& c = complexes[i];
    const std::string pf = "pockets/" + numbered("pocket", static_cast<int>(i), ".pdb");
    const std::string lf = "ligands/" + numbered("ligand", static_cast<int>(i), ".sdf");
    write_text(root / pf, chem::write_pdb_pocket(c.pocket, vocab));
    write_text(root / lf, chem::write_sdf(c.ligand, vocab, numbered("ligand", static_cast<int>(i), "")));
    manifest.push_back({{"pocket_file", pf}, {"ligand_file", lf}, {"mask_indices", c.mask_indices}});
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10f", chem::oracle_affinity(c.pocket, c.ligand, vocab, oc));
    scores << i << ',' << pf << ',' << lf << ',' << buf << '\n';
  }
  write_text(root / "dataset.json", manifest.dump(2) + "\n");
  write_text(root / "oracle_scores.csv", scores.str());
  write_text(root / "spec.json", spec_json(spec).dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir, const chem::AtomVocab& vocab) {
  const fs::path root(dir);
  if (dir.empty()) throw UsageError("no dataset path configured (data.dataset_dir)");
  if (!fs::exists(root / "dataset.json")) throw UsageError("dataset not found: '" + (root / "dataset.json").string() + "'");
  json manifest;
  try {
    manifest = json::parse(read_file(root / "dataset.json"));
  } catch (const json::exception& e) {
    throw ParseError("dataset manifest '" + (root / "dataset.json").string() + "': " + e.what(), 0);
  }
  if (!manifest.is_array() || manifest.empty()) throw ValidationError("dataset manifest must be a non-empty array");
  Dataset ds;
  if (fs::exists(root / "spec.json")) {
    const json spec = json::parse(read_file(root / "spec.json"));
    ds.oracle.contact_radius = spec.value("contact_radius", ds.oracle.contact_radius);
  }
  for (const auto& item : manifest) {
    DatasetEntry e;
    const fs::path pf = root / item.at("pocket_file").get<std::string>();
    const fs::path lf = root / item.at("ligand_file").get<std::string>();
    std::ifstream pin(pf);
    if (!pin) throw UsageError("dataset file not found: '" + pf.string() + "'");
    auto pr = chem::parse_pdb_pocket(pin, vocab, pf.stem().string());
    e.pocket = std::move(pr.pocket);
    std::ifstream lin(lf);
    if (!lin) throw UsageError("dataset file not found: '" + lf.string() + "'");
    e.ligand = chem::parse_sdf_molecule(lin, vocab);
    e.mask_indices = item.at("mask_indices").get<std::vector<int>>();
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

// ---------------------------------------------------------------- commands

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_guidance = false;
  std::string output;
};

chem::AtomVocab vocab_of(const RunConfig& c) { return chem::AtomVocab(c.vocab); }

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

RunConfig load_run_config(const Flags& f) {
  if (!fs::exists(f.config)) throw UsageError("config file not found: '" + f.config + "'");
  json j;
  try {
    j = json::parse(read_file(f.config));
  } catch (const json::exception& e) {
    throw ValidationError("config '" + f.config + "' is not valid JSON: " + e.what());
  }
  RunConfig c = parse_config(j);
  if (const char* env = std::getenv("LEOP_SEED")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(std::string("LEOP_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.no_guidance) c.guidance.enabled = false;
  if (!f.output.empty()) c.output_dir = f.output;
  c.train.seed = c.seed;
  c.train.threads = c.threads;
  c.affinity_train.seed = c.seed;
  c.affinity_train.threads = c.threads;
  return c;
}

std::string require_output(const RunConfig& c) {
  if (c.output_dir.empty()) throw UsageError("no output directory (set output_dir or pass --output)");
  return c.output_dir;
}

std::string weights_path(const RunConfig& c) {
  if (!c.weights.empty()) return c.weights;
  if (!c.output_dir.empty()) return (fs::path(c.output_dir) / "weights.leop").string();
  throw UsageError("no weights path configured (weights)");
}

WeightsFile load_checked_weights(const RunConfig& c) {
  const std::string path = weights_path(c);
  if (!fs::exists(path)) throw UsageError("weights file not found: '" + path + "'");
  WeightsFile w = load_weights(path);
  const auto cfg_vocab = vocab_of(c);
  if (!(w.params.vocab == cfg_vocab)) {
    throw UsageError("weights vocabulary [" + join(w.params.vocab.symbols()) + "] differs from config vocabulary [" +
                     join(cfg_vocab.symbols()) + "]");
  }
  return w;
}

void write_resolved(const fs::path& dir, const RunConfig& c, const std::string& weights_hash = "") {
  make_dirs(dir);
  json j = {{"tool_version", kToolVersion}, {"config", c.to_json()}};
  if (!weights_hash.empty()) j["weights_hash"] = weights_hash;
  write_text(dir / "config.resolved.json", j.dump(2) + "\n");
}

std::vector<chem::MaskedComplex> masked(const Dataset& ds) {
  std::vector<chem::MaskedComplex> out;
  for (const auto& e : ds.entries) out.push_back({e.pocket, chem::partition_retain_mask(e.ligand, e.mask_indices)});
  return out;
}

int cmd_gen_data(const RunConfig& c) {
  if (!c.data_spec) throw ValidationError("config: gen-data needs a 'data.spec' block");
  const std::string out = require_output(c);
  write_dataset(out, *c.data_spec, vocab_of(c));
  write_resolved(out, c);
  std::cout << "gen-data: wrote " << c.data_spec->n_complexes << " complexes to " << out << "\n";
  return 0;
}

int cmd_train(const RunConfig& c) {
  const std::string out = require_output(c);
  const Dataset ds = load_dataset(c.dataset_dir, vocab_of(c));
  const auto data = masked(ds);
  const std::string wpath = weights_path(c);
  make_dirs(out);
  WeightsFile w;
  const fs::path loss_csv = fs::path(out) / "loss.csv";
  std::string trace_text = "epoch,l_pos,l_atom,l_bond,total\n";
  if (c.resume && fs::exists(wpath)) {
    w = load_checked_weights(c);
    if (!(w.params.config == c.model) || !(w.schedule == c.schedule)) {
      throw UsageError("resume: checkpoint model or schedule differs from the config");
    }
    if (fs::exists(loss_csv)) {
      std::istringstream in(read_file(loss_csv));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (!line.empty() && std::stoi(line.substr(0, line.find(','))) <= w.epoch) trace_text += line + "\n";
      }
    }
    std::cout << "train: resuming at epoch " << w.epoch << "\n";
  } else {
    w.params = egnn::ModelParams::init(c.model, vocab_of(c), c.seed);
    w.schedule = c.schedule;
  }
  training::TrainHooks hooks;
  hooks.checkpoint = wpath;
  hooks.on_epoch = [&](int epoch, const training::LossBreakdown& l) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", epoch, l.l_pos, l.l_atom, l.l_bond, l.total);
    trace_text += buf;
    write_text(loss_csv, trace_text);
    std::cout << "epoch " << epoch << " total " << l.total << "\n";
  };
  if (w.epoch == c.train.epochs) save_weights(wpath, w);
  training::train(w, data, c.train, hooks);
  if (!fs::exists(loss_csv)) write_text(loss_csv, trace_text);
  // Load-and-verify: the file must decode to exactly what is in memory.
  if (encode_weights(load_weights(wpath)) != encode_weights(w)) throw Error("weights self-check failed for " + wpath);
  write_resolved(out, c, file_hash(wpath));
  std::cout << "train: " << w.epoch << " epochs, weights " << wpath << " (" << file_hash(wpath) << ")\n";
  return 0;
}

int cmd_train_affinity(const RunConfig& c) {
  const std::string out = require_output(c);
  const Dataset ds = load_dataset(c.dataset_dir, vocab_of(c));
  const auto data = masked(ds);
  std::vector<double> targets;
  const auto vocab = vocab_of(c);
  for (const auto& e : ds.entries) targets.push_back(chem::oracle_affinity(e.pocket, e.ligand, vocab, ds.oracle));
  WeightsFile w = load_checked_weights(c);
  w.affinity_epoch = 0;
  make_dirs(out);
  std::string trace_text = "epoch,train_mse,val_rmse\n";
  affinity::train_affinity(w, data, targets, c.affinity_train, [&](int epoch, double mse, double rmse) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", epoch, mse, rmse);
    trace_text += buf;
    std::cout << "affinity epoch " << epoch << " train_mse " << mse << " val_rmse " << rmse << "\n";
  });
  const std::string wpath = weights_path(c);
  save_weights(wpath, w);
  if (encode_weights(load_weights(wpath)) != encode_weights(w)) throw Error("weights self-check failed for " + wpath);
  write_text(fs::path(out) / "affinity_loss.csv", trace_text);
  write_resolved(out, c, file_hash(wpath));
  return 0;
}

void print_summary(const char* what, const std::vector<sampler::SampleRecord>& recs, const chem::AtomVocab& vocab) {
  int emitted = 0, valid = 0;
  double aff = 0;
  for (const auto& r : recs) {
    if (!r.molecule) continue;
    ++emitted;
    valid += metrics::valence_validity(*r.molecule, vocab);
    aff += *r.oracle_affinity * chem::kAffinityDisplayScale;
  }
  std::printf("%s: emitted %d/%zu, validity %.1f%%, mean affinity %.3f\n", what, emitted, recs.size(),
              emitted ? 100.0 * valid / emitted : 0.0, emitted ? aff / emitted : 0.0);
}

json run_meta(const RunConfig& c, const std::string& wpath, const chem::AtomVocab& vocab) {
  return {{"tool_version", kToolVersion},
          {"task", to_string(c.task)},
          {"weights_hash", file_hash(wpath)},
          {"seed", c.seed},
          {"guided", c.guidance.active()},
          {"vocab", vocab.symbols()},
          {"config", c.to_json()}};
}

const DatasetEntry& target_entry(const Dataset& ds, int t) {
  if (t < 0 || t >= static_cast<int>(ds.entries.size())) {
    throw ValidationError("config: sampling target " + std::to_string(t) + " outside the dataset");
  }
  return ds.entries[static_cast<std::size_t>(t)];
}

int cmd_sample(const RunConfig& c, bool hop) {
  const std::string out = require_output(c);
  const auto vocab = vocab_of(c);
  const WeightsFile w = load_checked_weights(c);
  const Dataset ds = load_dataset(c.dataset_dir, vocab);
  const NoiseSchedule s = w.schedule.build();
  std::vector<sampler::SampleRecord> all;
  for (std::size_t ti = 0; ti < c.targets.size(); ++ti) {
    const int target = c.targets[ti];
    const DatasetEntry& e = target_entry(ds, target);
    sampler::SampleRunConfig sc;
    sc.n_samples = c.n_samples;
    sc.guidance = c.guidance;
    sc.seed = derive_seed(c.seed, static_cast<std::uint64_t>(target));
    sc.padding = c.padding;
    sc.threads = c.threads;
    std::vector<sampler::SampleRecord> recs;
    if (hop) {
      const int t_hop = c.t_hop > 0 ? c.t_hop : std::max(1, s.steps() / 10);
      const auto& frag = c.hop_fragment.empty() ? e.mask_indices : c.hop_fragment;
      recs = sampler::scaffold_hop(w.params, s, e.pocket, e.ligand, frag, t_hop, sc);
    } else {
      recs = sampler::generate(w.params, s, e.pocket, chem::partition_retain_mask(e.ligand, e.mask_indices), sc);
    }
    const double ref = chem::oracle_affinity(e.pocket, e.ligand, vocab, ds.oracle);
    for (auto& r : recs) {
      r.index += static_cast<int>(ti) * c.n_samples;
      r.target = "target_" + std::to_string(target);
      r.reference_affinity = ref;
      all.push_back(std::move(r));
    }
  }
  const std::string wpath = weights_path(c);
  sampler::write_run(out, all, vocab, run_meta(c, wpath, vocab));
  write_resolved(out, c, file_hash(wpath));
  print_summary(hop ? "hop" : "sample", all, vocab);
  return 0;
}

int cmd_evaluate(const RunConfig& c) {
  const std::string run = c.run_dir.empty() ? require_output(c) : c.run_dir;
  const auto rep = metrics::evaluate_run(run, {}, c.output_dir.empty() ? fs::path(run) : fs::path(c.output_dir));
  auto shown = [](const std::optional<double>& v, const char* f) {
    if (!v) return std::string("n/a");
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, *v);
    return std::string(buf);
  };
  std::printf("evaluate: emitted %d/%d, validity %s, mean affinity %s\n", rep.n_emitted, rep.n_samples,
              shown(rep.validity_pct, "%.1f%%").c_str(), shown(rep.mean_affinity, "%.3f").c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Pocket-conditioned molecule optimization by equivariant diffusion"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1, 1);
  Flags flags;
  std::uint64_t seed_value = 0;
  int threads_value = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed_value, "Override the configured seed");
    sub->add_option("--threads", threads_value, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-guidance", flags.no_guidance, "Disable affinity guidance");
    sub->add_option("--output", flags.output, "Output directory");
  };
  std::vector<std::pair<std::string, CLI::App*>> subs;
  const std::pair<const char*, const char*> commands[] = {
      {"gen-data", "Write the seed-pinned toy dataset (PDB pockets, SDF ligands, manifest)"},
      {"train", "Train the denoiser, checkpointing every epoch"},
      {"train-affinity", "Train the affinity head on a trained denoiser"},
      {"sample", "Generate ligands for the configured target complexes"},
      {"hop", "Renoise and regenerate a fragment of each target ligand"},
      {"evaluate", "Score a sample run and write the metrics report"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    subs.emplace_back(name, sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  std::string cmd;
  for (auto& [name, sub] : subs) {
    if (sub->parsed()) {
      cmd = name;
      if (sub->count("--seed")) flags.seed = seed_value;
      if (sub->count("--threads")) flags.threads = threads_value;
    }
  }
  try {
    const RunConfig c = load_run_config(flags);
    if (cmd == "gen-data") return cmd_gen_data(c);
    if (cmd == "train") return cmd_train(c);
    if (cmd == "train-affinity") return cmd_train_affinity(c);
    if (cmd == "sample") return cmd_sample(c, false);
    if (cmd == "hop") return cmd_sample(c, true);
    if (cmd == "evaluate") return cmd_evaluate(c);
    throw UsageError("unknown command");
  } catch (const NumericError& e) {
    std::cerr << "leop: numeric failure: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "leop: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "leop: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "leop: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "leop: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace leop::cli
