// polyctc/data/corpus.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/data/corpus.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "feature file I/O assumes a little-endian host");

constexpr char kFeatureMagic[4] = {'M', 'L', 'F', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;
constexpr Split kSplits[] = {Split::kTrain, Split::kDevStandard, Split::kDevDialect};

std::vector<std::string> SplitFields(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string FeaturePath(const Utterance &u) { return "feats/" + u.id + ".mlft"; }

void WriteManifest(const std::vector<Utterance> &utts, const fs::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const Utterance &u : utts) {
    os << u.id << '\t' << u.language << '\t' << FeaturePath(u) << '\t';
    for (std::size_t i = 0; i < u.transcript.size(); ++i) {
      os << (i ? " " : "") << u.transcript[i];
    }
    os << '\n';
  }
}

std::vector<Utterance> ReadManifest(const fs::path &dir, const std::string &name) {
  const fs::path path = dir / name;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<Utterance> utts;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (line.empty()) continue;
    const std::vector<std::string> f = SplitFields(line, '\t');
    if (f.size() != 4) {
      throw ParseError(path.string(), lineno,
                       "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) throw ParseError(path.string(), lineno, "empty id or language");
    Utterance u;
    u.id = f[0];
    u.language = f[1];
    std::istringstream tokens(f[3]);
    for (std::string t; tokens >> t;) u.transcript.push_back(t);
    if (u.transcript.empty()) throw ParseError(path.string(), lineno, "empty transcript");
    u.features = ReadFeatures((dir / f[2]).string());
    utts.push_back(std::move(u));
  }
  return utts;
}

}  // namespace

std::string SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDevStandard: return "dev_standard";
    case Split::kDevDialect: return "dev_dialect";
  }
  return "?";
}

Split ParseSplit(const std::string &name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "train") return Split::kTrain;
  if (n == "dev_standard" || n == "dev") return Split::kDevStandard;
  if (n == "dev_dialect") return Split::kDevDialect;
  throw ConfigError("unknown split '" + name + "' (train, dev-standard, dev-dialect)");
}

std::string TierName(Tier tier) {
  switch (tier) {
    case Tier::kNormal: return "normal";
    case Tier::kFewShot: return "few_shot";
    case Tier::kDialect: return "dialect";
  }
  return "?";
}

Tier ParseTier(const std::string &name) {
  if (name == "normal") return Tier::kNormal;
  if (name == "few_shot" || name == "few-shot") return Tier::kFewShot;
  if (name == "dialect") return Tier::kDialect;
  throw ConfigError("unknown tier '" + name + "' (normal, few_shot, dialect)");
}

std::vector<Utterance> &Corpus::split(Split s) {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kDevStandard: return dev_standard;
    case Split::kDevDialect: return dev_dialect;
  }
  return train;
}

const std::vector<Utterance> &Corpus::split(Split s) const {
  return const_cast<Corpus *>(this)->split(s);
}

const LanguageInfo *Corpus::FindLanguage(const std::string &code) const {
  for (const auto &l : languages) {
    if (l.code == code) return &l;
  }
  return nullptr;
}

std::vector<std::string> Corpus::CodesWithTier(Tier tier) const {
  std::vector<std::string> out;
  for (const auto &l : languages) {
    if (l.tier == tier) out.push_back(l.code);
  }
  return out;
}

std::vector<int> Corpus::Target(const Utterance &u) const {
  std::vector<int> ids;
  ids.reserve(u.transcript.size() + 1);
  ids.push_back(vocab.id(u.language));
  if (!vocab.is_language_code(ids.front())) {
    throw VocabularyError("'" + u.language + "' is not a language code");
  }
  for (const auto &t : u.transcript) {
    const int id = vocab.id(t);
    if (vocab.is_language_code(id)) {
      throw VocabularyError("utterance " + u.id + ": language code '" + t + "' inside transcript");
    }
    ids.push_back(id);
  }
  return ids;
}

std::size_t Corpus::feature_dim() const {
  for (Split s : kSplits) {
    if (!split(s).empty()) return split(s).front().features.cols();
  }
  return 0;
}

Corpus Corpus::Subset(const std::vector<std::string> &codes) const {
  const std::set<std::string> keep(codes.begin(), codes.end());
  Corpus out;
  out.vocab = vocab;
  for (const auto &l : languages) {
    if (keep.count(l.code)) out.languages.push_back(l);
  }
  for (Split s : kSplits) {
    for (const auto &u : split(s)) {
      if (keep.count(u.language)) out.split(s).push_back(u);
    }
  }
  return out;
}

void CheckCorpus(const Corpus &corpus) {
  for (Split s : kSplits) {
    std::set<std::string> ids;
    for (const auto &u : corpus.split(s)) {
      if (!ids.insert(u.id).second) {
        throw ContractError("duplicate utterance id '" + u.id + "' in " + SplitName(s));
      }
    }
  }
  std::set<std::string> parents;
  for (const auto &l : corpus.languages) {
    if (l.tier == Tier::kDialect) parents.insert(l.parent);
  }
  for (const auto &u : corpus.dev_dialect) {
    if (!parents.count(u.language)) {
      throw ContractError("dialect split holds '" + u.id + "' of non-dialect language " + u.language);
    }
  }
}

void WriteFeatures(const ad::Tensor &features, const std::string &path) {
  std::string buf(kFeatureMagic, 4);
  auto put32 = [&buf](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
  };
  put32(kFeatureVersion);
  put32(static_cast<std::uint32_t>(features.rows()));
  put32(static_cast<std::uint32_t>(features.cols()));
  for (double v : features.data()) {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    buf.append(b, 4);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw std::runtime_error("cannot write " + path);
  }
}

ad::Tensor ReadFeatures(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open feature file");
  const std::string data{std::istreambuf_iterator<char>(is), {}};
  if (data.size() < 16 || std::memcmp(data.data(), kFeatureMagic, 4) != 0) {
    throw FormatError(path + ": not a feature file (bad magic)");
  }
  std::uint32_t header[3];
  std::memcpy(header, data.data() + 4, 12);
  if (header[0] != kFeatureVersion) {
    throw FormatError(path + ": unsupported feature version " + std::to_string(header[0]));
  }
  const std::size_t rows = header[1], cols = header[2];
  if (rows == 0 || cols == 0) throw FormatError(path + ": empty feature matrix");
  if (data.size() != 16 + rows * cols * 4) {
    throw FormatError(path + ": payload size does not match " + std::to_string(rows) + " x " +
                      std::to_string(cols));
  }
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    float f;
    std::memcpy(&f, data.data() + 16 + 4 * i, 4);
    values[i] = f;
  }
  return ad::Tensor::Matrix(rows, cols, std::move(values));
}

void SaveCorpus(const Corpus &corpus, const std::string &dir) {
  CheckCorpus(corpus);
  const fs::path root(dir);
  fs::create_directories(root / "feats");
  corpus.vocab.Save((root / "vocab.txt").string());
  nlohmann::ordered_json langs = nlohmann::ordered_json::array();
  for (const auto &l : corpus.languages) {
    nlohmann::ordered_json j{{"code", l.code}, {"tier", TierName(l.tier)}};
    if (!l.parent.empty()) j["parent"] = l.parent;
    langs.push_back(j);
  }
  std::ofstream(root / "languages.json", std::ios::binary) << langs.dump(2) << '\n';
  for (Split s : kSplits) {
    WriteManifest(corpus.split(s), root / (SplitName(s) + ".tsv"));
    for (const auto &u : corpus.split(s)) WriteFeatures(u.features, (root / FeaturePath(u)).string());
  }
}

Corpus LoadCorpus(const std::string &dir) {
  const fs::path root(dir);
  Corpus corpus;
  corpus.vocab = Vocabulary::Load((root / "vocab.txt").string());
  std::ifstream is(root / "languages.json");
  if (!is) throw std::runtime_error("cannot read " + (root / "languages.json").string());
  nlohmann::json langs;
  try {
    langs = nlohmann::json::parse(is);
    for (const auto &j : langs) {
      LanguageInfo l;
      l.code = j.at("code").get<std::string>();
      l.tier = ParseTier(j.at("tier").get<std::string>());
      l.parent = j.value("parent", "");
      corpus.languages.push_back(l);
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError((root / "languages.json").string() + ": " + e.what());
  }
  for (Split s : kSplits) corpus.split(s) = ReadManifest(root, SplitName(s) + ".tsv");
  CheckCorpus(corpus);
  return corpus;
}

}  // namespace polyctc
