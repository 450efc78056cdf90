#include "serlab/pair_io.hpp"

#include <fstream>

#include <json.hpp>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<double> to_vector(std::span<const double> v) {
  return {v.begin(), v.end()};
}

ordered_json answer_json(const FeatureStore& store, std::int64_t qid,
                         std::int64_t aid) {
  ordered_json j;
  j["id"] = aid;
  j["features"] = to_vector(store.answer_features(qid, aid));
  return j;
}

ordered_json label_json(PrefLabel label) {
  switch (label) {
    case PrefLabel::Chosen1: return "chosen1";
    case PrefLabel::Chosen2: return "chosen2";
    case PrefLabel::Unlabeled: return nullptr;
  }
  return nullptr;
}

ordered_json source_json(LabelSource source) {
  switch (source) {
    case LabelSource::HumanSim: return "human";
    case LabelSource::SelfLabel: return "self";
    case LabelSource::Oracle: return "oracle";
    case LabelSource::None: return nullptr;
  }
  return nullptr;
}

PrefLabel parse_label(const ordered_json& j, const std::string& where) {
  if (j.is_null()) return PrefLabel::Unlabeled;
  const std::string s = j.get<std::string>();
  if (s == "chosen1") return PrefLabel::Chosen1;
  if (s == "chosen2") return PrefLabel::Chosen2;
  throw FormatError(where + ": unknown label '" + s + "'");
}

LabelSource parse_source(const ordered_json& j, const std::string& where) {
  if (j.is_null()) return LabelSource::None;
  const std::string s = j.get<std::string>();
  if (s == "human") return LabelSource::HumanSim;
  if (s == "self") return LabelSource::SelfLabel;
  if (s == "oracle") return LabelSource::Oracle;
  throw FormatError(where + ": unknown source '" + s + "'");
}

}  // namespace

void export_pairs_jsonl(const std::string& path, const FeatureStore& store,
                        std::span<const PreferencePair> pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const PreferencePair& p : pairs) {
    ordered_json j;
    j["question_id"] = p.question_id;
    j["question_features"] = to_vector(store.question_features(p.question_id));
    j["answer_1"] = answer_json(store, p.question_id, p.answer_1_id);
    j["answer_2"] = answer_json(store, p.question_id, p.answer_2_id);
    j["label"] = label_json(p.label);
    j["source"] = source_json(p.source);
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

void write_dataset_manifest(const std::string& path,
                            const DatasetManifest& m) {
  ordered_json j;
  j["dimension"] = m.dimension;
  j["pairs"] = m.n_pairs;
  j["labeled"] = m.n_labeled;
  j["seed"] = m.seed;
  j["oracle_spec"] = m.oracle_spec;
  j["oracle_spec_hash"] = m.oracle_spec_hash;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << j.dump(2) << "\n")) {
    throw IoError("cannot write " + path);
  }
}

DatasetManifest read_dataset_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  DatasetManifest m;
  m.dimension = j.at("dimension").get<int>();
  m.n_pairs = j.at("pairs").get<std::int64_t>();
  m.n_labeled = j.at("labeled").get<std::int64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.oracle_spec = j.at("oracle_spec").get<std::string>();
  m.oracle_spec_hash = j.at("oracle_spec_hash").get<std::uint64_t>();
  return m;
}

std::span<const double> ImportedDataset::question_features(
    std::int64_t qid) const {
  auto it = contexts_.find(qid);
  if (it == contexts_.end()) {
    throw LookupError("unknown question id " + std::to_string(qid));
  }
  return it->second;
}

std::span<const double> ImportedDataset::answer_features(
    std::int64_t qid, std::int64_t aid) const {
  auto it = answers_.find({qid, aid});
  if (it == answers_.end()) {
    throw LookupError("unknown answer id " + std::to_string(aid) +
                      " for question " + std::to_string(qid));
  }
  return it->second;
}

const std::vector<std::int64_t>& ImportedDataset::answer_ids(
    std::int64_t qid) const {
  auto it = answer_ids_.find(qid);
  if (it == answer_ids_.end()) {
    throw LookupError("unknown question id " + std::to_string(qid));
  }
  return it->second;
}

std::vector<std::int64_t> ImportedDataset::question_ids() const {
  return question_order_;
}

void ImportedDataset::add_question(std::int64_t qid,
                                   std::vector<double> context) {
  if (static_cast<int>(context.size()) != dim_) {
    throw ShapeError("context for question " + std::to_string(qid) +
                     " has dim " + std::to_string(context.size()) +
                     ", expected " + std::to_string(dim_));
  }
  if (contexts_.emplace(qid, std::move(context)).second) {
    question_order_.push_back(qid);
    answer_ids_.emplace(qid, std::vector<std::int64_t>{});
  }
}

void ImportedDataset::add_answer(std::int64_t qid, std::int64_t aid,
                                 std::vector<double> features) {
  if (static_cast<int>(features.size()) != dim_) {
    throw ShapeError("answer " + std::to_string(aid) + " of question " +
                     std::to_string(qid) + " has dim " +
                     std::to_string(features.size()) + ", expected " +
                     std::to_string(dim_));
  }
  if (!contexts_.contains(qid)) {
    throw LookupError("answer added before its question " +
                      std::to_string(qid));
  }
  if (answers_.emplace(std::make_pair(qid, aid), std::move(features)).second) {
    answer_ids_[qid].push_back(aid);
  }
}

bool ImportedDataset::has_question(std::int64_t qid) const {
  return contexts_.contains(qid);
}

bool ImportedDataset::has_answer(std::int64_t qid, std::int64_t aid) const {
  return answers_.contains({qid, aid});
}

ImportedPairs import_pairs_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);

  int dim = -1;
  std::vector<PreferencePair> pairs;
  std::vector<ordered_json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.contains("question_id") || !j.contains("answer_1") ||
        !j.contains("answer_2")) {
      throw FormatError(where + ": missing required fields");
    }
    const auto& feats = j.at("answer_1").at("features");
    if (dim < 0) dim = static_cast<int>(feats.size());
    rows.push_back(std::move(j));
  }
  if (dim <= 0) throw FormatError(path + ": no pairs found");

  ImportedPairs out{ImportedDataset(dim), {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ordered_json& j = rows[i];
    const std::string where = path + " pair " + std::to_string(i);
    PreferencePair p;
    p.question_id = j.at("question_id").get<std::int64_t>();
    if (!out.store.has_question(p.question_id)) {
      std::vector<double> ctx(static_cast<std::size_t>(dim), 0.0);
      if (j.contains("question_features") && !j.at("question_features").is_null()) {
        ctx = j.at("question_features").get<std::vector<double>>();
      }
      out.store.add_question(p.question_id, std::move(ctx));
    }
    for (const char* key : {"answer_1", "answer_2"}) {
      const ordered_json& a = j.at(key);
      const std::int64_t aid = a.at("id").get<std::int64_t>();
      if (!out.store.has_answer(p.question_id, aid)) {
        out.store.add_answer(p.question_id, aid,
                             a.at("features").get<std::vector<double>>());
      }
    }
    p.answer_1_id = j.at("answer_1").at("id").get<std::int64_t>();
    p.answer_2_id = j.at("answer_2").at("id").get<std::int64_t>();
    if (p.answer_1_id == p.answer_2_id) {
      throw FormatError(where + ": identical answer ids");
    }
    p.label = parse_label(j.contains("label") ? j.at("label") : ordered_json(nullptr), where);
    p.source = parse_source(j.contains("source") ? j.at("source") : ordered_json(nullptr), where);
    if ((p.label == PrefLabel::Unlabeled) != (p.source == LabelSource::None)) {
      throw FormatError(where + ": label and source provenance disagree");
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

}  // namespace serlab
