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

#include "leop/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "leop/error.hpp"

namespace leop {

namespace {

using nlohmann::json;
static_assert(std::endian::native == std::endian::little, "weights I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("weights file truncated", 0);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

json model_json(const egnn::ModelConfig& c) {
  return {{"layers", c.layers},     {"hidden", c.hidden},     {"edge_hidden", c.edge_hidden},
          {"knn", c.knn},           {"time_dim", c.time_dim}, {"rbf", c.rbf},
          {"rbf_max", c.rbf_max},   {"atom_types", c.atom_types}, {"bond_types", c.bond_types}};
}

egnn::ModelConfig model_from_json(const json& j) {
  egnn::ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.edge_hidden = j.at("edge_hidden").get<int>();
  c.knn = j.at("knn").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.rbf = j.at("rbf").get<int>();
  c.rbf_max = j.at("rbf_max").get<double>();
  c.atom_types = j.at("atom_types").get<int>();
  c.bond_types = j.at("bond_types").get<int>();
  return c;
}

}  // namespace

std::string encode_weights(const WeightsFile& w) {
  const auto& p = w.params;
  json sections = json::array();
  std::vector<const ad::Mat*> arrays;
  auto add = [&](const std::string& name, const ad::Mat& m) {
    sections.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    arrays.push_back(&m);
  };
  for (int i = 0; i < p.denoiser.size(); ++i) add("denoiser/" + p.denoiser.name(i), p.denoiser.at(i));
  for (int i = 0; i < p.affinity.size(); ++i) add("affinity/" + p.affinity.name(i), p.affinity.at(i));
  json header = {{"format", "leop-weights"},
                 {"version", kWeightsVersion},
                 {"vocab", p.vocab.symbols()},
                 {"bond_vocab", chem::bond_names()},
                 {"model", model_json(p.config)},
                 {"schedule", {{"kind", to_string(w.schedule.kind)}, {"T", w.schedule.T}, {"power", w.schedule.power}}},
                 {"seed", p.seed},
                 {"epoch", w.epoch},
                 {"affinity_epoch", w.affinity_epoch}};
  if (w.optimizer) {
    const auto& o = *w.optimizer;
    if (o.m.size() != static_cast<std::size_t>(p.denoiser.size()) || o.v.size() != o.m.size()) {
      throw ValidationError("optimizer state does not match the denoiser parameters");
    }
    header["optimizer"] = {{"kind", "adam"}, {"step", o.step}};
    for (int i = 0; i < p.denoiser.size(); ++i) add("adam_m/" + p.denoiser.name(i), o.m[static_cast<std::size_t>(i)]);
    for (int i = 0; i < p.denoiser.size(); ++i) add("adam_v/" + p.denoiser.name(i), o.v[static_cast<std::size_t>(i)]);
  }
  header["sections"] = sections;
  const std::string text = header.dump();
  std::string out = "LEOP";
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const ad::Mat* m : arrays) {
    out.append(reinterpret_cast<const char*>(m->data()), static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  return out;
}

WeightsFile decode_weights(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "LEOP") != 0) throw ParseError("not a weights file (bad magic)", 0);
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kWeightsVersion) {
    throw ParseError("unsupported weights format version " + std::to_string(version), 0);
  }
  const auto hlen = take<std::uint64_t>(bytes, pos);
  if (hlen > bytes.size() - pos) throw ParseError("weights header truncated", 0);
  json header;
  try {
    header = json::parse(bytes.substr(pos, hlen));
  } catch (const json::exception& e) {
    throw ParseError(std::string("weights header: ") + e.what(), 0);
  }
  pos += hlen;

  WeightsFile w;
  try {
    auto symbols = header.at("vocab").get<std::vector<std::string>>();
    if (symbols.empty() || symbols.back() != "FAKE") throw ParseError("weights vocab must end with FAKE", 0);
    symbols.pop_back();
    w.params.vocab = chem::AtomVocab(symbols);
    if (header.at("bond_vocab").get<std::vector<std::string>>() != chem::bond_names()) {
      throw ParseError("weights bond vocabulary differs from this build", 0);
    }
    w.params.config = model_from_json(header.at("model"));
    w.params.seed = header.at("seed").get<std::uint64_t>();
    const json& sj = header.at("schedule");
    w.schedule.kind = schedule_kind_from_string(sj.at("kind").get<std::string>());
    w.schedule.T = sj.at("T").get<int>();
    w.schedule.power = sj.at("power").get<double>();
    w.epoch = header.at("epoch").get<int>();
    w.affinity_epoch = header.value("affinity_epoch", 0);
    if (header.contains("optimizer")) {
      w.optimizer = OptimizerState{};
      w.optimizer->step = header["optimizer"].at("step").get<std::int64_t>();
    }
    for (const json& s : header.at("sections")) {
      const auto name = s.at("name").get<std::string>();
      const auto rows = s.at("rows").get<Eigen::Index>();
      const auto cols = s.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw ParseError("negative section shape for '" + name + "'", 0);
      ad::Mat m(rows, cols);
      const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (nbytes > bytes.size() - pos) throw ParseError("weights payload truncated at '" + name + "'", 0);
      std::memcpy(m.data(), bytes.data() + pos, nbytes);
      pos += nbytes;
      const auto slash = name.find('/');
      const std::string group = name.substr(0, slash), pname = name.substr(slash + 1);
      if (slash == std::string::npos) throw ParseError("section name without group: '" + name + "'", 0);
      if (group == "denoiser") {
        w.params.denoiser.add(pname, std::move(m));
      } else if (group == "affinity") {
        w.params.affinity.add(pname, std::move(m));
      } else if (group == "adam_m" && w.optimizer) {
        w.optimizer->m.push_back(std::move(m));
      } else if (group == "adam_v" && w.optimizer) {
        w.optimizer->v.push_back(std::move(m));
      } else {
        throw ParseError("unknown weights section '" + name + "'", 0);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("weights header: ") + e.what(), 0);
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes after weights payload", 0);
  if (w.params.config.atom_types != w.params.vocab.size()) {
    throw ParseError("weights model atom_types differs from its vocabulary", 0);
  }
  w.params.bind();
  if (w.optimizer) {
    const auto n = static_cast<std::size_t>(w.params.denoiser.size());
    if (w.optimizer->m.size() != n || w.optimizer->v.size() != n) {
      throw ParseError("optimizer sections do not match the denoiser", 0);
    }
  }
  return w;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save_weights(const std::filesystem::path& path, const WeightsFile& w) {
  write_file_atomic(path, encode_weights(w));
}

WeightsFile load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a(read_file(path))); }

}  // namespace leop
