#pragma once

#include <map>
#include <string>
#include <vector>

#include "bdtf/graph.hpp"
#include "bdtf/params.hpp"
#include "bdtf/types.hpp"

namespace bdtf {

// Deterministic metadata-to-text prompt: one "factor_name: value" line per field, in the
// canonical factor order.
std::string render_prompt(const AgingCondition& condition);

// Inverse of AgingCondition::key().
AgingCondition condition_from_key(const std::string& key);

// Per-factor vocabularies for the lookup embedder, built from the training conditions.
// Unseen values at test time hash into one of 16 out-of-vocabulary buckets per factor.
struct EmbedVocab {
  static constexpr int kFactors = 5;  // pos. electrode, neg. electrode, temperature, package, manufacturer
  static constexpr i64 kOovBuckets = 16;
  std::vector<std::string> values[kFactors];

  static EmbedVocab build(const std::vector<AgingCondition>& training_conditions);
  static const char* factor_name(int f);
  // Row index into factor table f for a value (vocab slot or OOV bucket).
  i64 row(int f, const std::string& value) const;
  static std::string factor_value(const AgingCondition& c, int f);
};

// Trainable factor-wise lookup embedder ("lookup" path; the built-in default).
class LookupEmbedder {
 public:
  LookupEmbedder(const EmbedVocab& vocab, i64 d_enc, ParamStore& store);
  // Graph node [1 x d_enc]: sum of the five factor rows.
  int embed(Graph& g, const ParamStore& store, const AgingCondition& condition) const;

 private:
  const EmbedVocab* vocab_;
  i64 d_enc_;
  int tables_[EmbedVocab::kFactors];
};

// File-backed external embeddings (offline language-embedder output).
class ExternalEmbeddings {
 public:
  static ExternalEmbeddings load(const std::string& path);
  void save(const std::string& path) const;

  // Throws MissingEmbedding for unknown keys.
  const std::vector<double>& vector_for(const std::string& condition_key) const;
  bool contains(const std::string& key) const { return vectors_.count(key) > 0; }
  i64 d_enc() const { return d_enc_; }
  const std::string& embedder_name() const { return name_; }

  void put(const std::string& key, std::vector<double> v);
  void set_meta(std::string name, i64 d_enc) {
    name_ = std::move(name);
    d_enc_ = d_enc;
  }

 private:
  std::string name_;
  i64 d_enc_ = 0;
  std::map<std::string, std::vector<double>> vectors_;
};

// Deterministic stand-in for an offline language embedder: the prompt's lines are hashed to
// seeded gaussian vectors, summed and normalized. Used by `synth` to emit embeddings.json.
std::vector<double> synthetic_prompt_embedding(const AgingCondition& condition, i64 d_enc);

}  // namespace bdtf
