#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "serlab/world.hpp"

namespace serlab {

// JSONL pair exchange: one pair per line with question_id,
// question_features, answer_1/answer_2 {id, features}, label
// ("chosen1" | "chosen2" | null) and source ("human" | "self" | "oracle" |
// null). question_features is optional on import (defaults to zeros), so
// externally produced data with answer-only features still loads.

void export_pairs_jsonl(const std::string& path, const FeatureStore& store,
                        std::span<const PreferencePair> pairs);

struct DatasetManifest {
  int dimension = 0;
  std::int64_t n_pairs = 0;
  std::int64_t n_labeled = 0;
  std::uint64_t seed = 0;
  std::string oracle_spec;
  std::uint64_t oracle_spec_hash = 0;
};

void write_dataset_manifest(const std::string& path,
                            const DatasetManifest& manifest);
DatasetManifest read_dataset_manifest(const std::string& path);

// Feature store backed by imported JSONL rows.
class ImportedDataset final : public FeatureStore {
 public:
  explicit ImportedDataset(int dim) : dim_(dim) {}

  int dim() const override { return dim_; }
  std::span<const double> question_features(std::int64_t qid) const override;
  std::span<const double> answer_features(std::int64_t qid,
                                          std::int64_t aid) const override;
  const std::vector<std::int64_t>& answer_ids(std::int64_t qid) const override;
  std::vector<std::int64_t> question_ids() const override;

  void add_question(std::int64_t qid, std::vector<double> context);
  void add_answer(std::int64_t qid, std::int64_t aid,
                  std::vector<double> features);
  bool has_question(std::int64_t qid) const;
  bool has_answer(std::int64_t qid, std::int64_t aid) const;

 private:
  int dim_;
  std::vector<std::int64_t> question_order_;
  std::unordered_map<std::int64_t, std::vector<double>> contexts_;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> answer_ids_;
  struct AnswerKeyHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
      return static_cast<std::size_t>(
          Rng::mix(static_cast<std::uint64_t>(k.first) * 0x9E3779B97F4A7C15ULL ^
                   static_cast<std::uint64_t>(k.second)));
    }
  };
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<double>,
                     AnswerKeyHash>
      answers_;
};

struct ImportedPairs {
  ImportedDataset store;
  std::vector<PreferencePair> pairs;
};

ImportedPairs import_pairs_jsonl(const std::string& path);

}  // namespace serlab
