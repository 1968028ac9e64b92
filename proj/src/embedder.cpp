#include "bdtf/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "bdtf/error.hpp"

namespace bdtf {

using nlohmann::json;

namespace {

std::string num_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string render_prompt(const AgingCondition& c) {
  std::ostringstream os;
  os << "positive_electrode: " << c.positive_electrode << "\n";
  os << "negative_electrode: " << c.negative_electrode << "\n";
  os << "electrolyte: " << c.electrolyte << "\n";
  os << "package_structure: " << c.package_structure << "\n";
  os << "nominal_capacity: " << num_str(c.nominal_capacity_ah) << "\n";
  os << "manufacturer: " << c.manufacturer << "\n";
  os << "formation_protocol: " << c.formation_protocol << "\n";
  os << "charge_protocol: " << c.charge_protocol << "\n";
  os << "discharge_protocol: " << c.discharge_protocol << "\n";
  os << "operating_temperature: " << num_str(c.operating_temperature_c) << "\n";
  return os.str();
}

AgingCondition condition_from_key(const std::string& key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : key) {
    if (ch == '\x1f') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 10) throw Error("InvalidRecord", "malformed condition key");
  AgingCondition c;
  c.positive_electrode = parts[0];
  c.negative_electrode = parts[1];
  c.electrolyte = parts[2];
  c.package_structure = parts[3];
  c.nominal_capacity_ah = std::strtod(parts[4].c_str(), nullptr);
  c.manufacturer = parts[5];
  c.formation_protocol = parts[6];
  c.charge_protocol = parts[7];
  c.discharge_protocol = parts[8];
  c.operating_temperature_c = std::strtod(parts[9].c_str(), nullptr);
  return c;
}

const char* EmbedVocab::factor_name(int f) {
  static const char* names[kFactors] = {"positive_electrode", "negative_electrode",
                                        "operating_temperature", "package_structure",
                                        "manufacturer"};
  return names[f];
}

std::string EmbedVocab::factor_value(const AgingCondition& c, int f) {
  switch (f) {
    case 0: return c.positive_electrode;
    case 1: return c.negative_electrode;
    case 2: return num_str(c.operating_temperature_c);
    case 3: return c.package_structure;
    default: return c.manufacturer;
  }
}

EmbedVocab EmbedVocab::build(const std::vector<AgingCondition>& training_conditions) {
  EmbedVocab v;
  for (int f = 0; f < kFactors; ++f) {
    std::set<std::string> seen;
    for (const auto& c : training_conditions) seen.insert(factor_value(c, f));
    v.values[f].assign(seen.begin(), seen.end());
  }
  return v;
}

i64 EmbedVocab::row(int f, const std::string& value) const {
  const auto& vals = values[f];
  const auto it = std::lower_bound(vals.begin(), vals.end(), value);
  if (it != vals.end() && *it == value) return static_cast<i64>(it - vals.begin());
  return static_cast<i64>(vals.size()) +
         static_cast<i64>(fnv1a(value) % static_cast<std::uint64_t>(kOovBuckets));
}

LookupEmbedder::LookupEmbedder(const EmbedVocab& vocab, i64 d_enc, ParamStore& store)
    : vocab_(&vocab), d_enc_(d_enc) {
  for (int f = 0; f < EmbedVocab::kFactors; ++f) {
    const i64 rows = static_cast<i64>(vocab.values[f].size()) + EmbedVocab::kOovBuckets;
    tables_[f] = store.add_gaussian(std::string("embed.table.") + EmbedVocab::factor_name(f),
                                    {rows, d_enc}, 0.02);
  }
}

int LookupEmbedder::embed(Graph& g, const ParamStore& store, const AgingCondition& c) const {
  int out = -1;
  for (int f = 0; f < EmbedVocab::kFactors; ++f) {
    const i64 row = vocab_->row(f, EmbedVocab::factor_value(c, f));
    const int table = g.param(store[tables_[f]], tables_[f]);
    auto idx = std::make_shared<std::vector<i64>>();
    idx->reserve(static_cast<size_t>(d_enc_));
    for (i64 j = 0; j < d_enc_; ++j) idx->push_back(row * d_enc_ + j);
    const int rowv = g.gather(table, idx, {1, d_enc_});
    out = out < 0 ? rowv : g.add(out, rowv);
  }
  return out;
}

ExternalEmbeddings ExternalEmbeddings::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open embeddings file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("IOError", std::string("embeddings file is not valid JSON: ") + e.what());
  }
  ExternalEmbeddings e;
  e.name_ = j.at("embedder").get<std::string>();
  e.d_enc_ = j.at("d_enc").get<i64>();
  for (const auto& [key, vec] : j.at("vectors").items()) {
    auto v = vec.get<std::vector<double>>();
    if (static_cast<i64>(v.size()) != e.d_enc_)
      throw Error("DimensionMismatch", "vector length disagrees with header d_enc for a key");
    e.vectors_.emplace(key, std::move(v));
  }
  return e;
}

void ExternalEmbeddings::save(const std::string& path) const {
  json vectors = json::object();
  for (const auto& [k, v] : vectors_) vectors[k] = v;
  json j{{"embedder", name_}, {"d_enc", d_enc_}, {"vectors", vectors}};
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write embeddings file: " + path);
  out << j.dump() << "\n";
}

const std::vector<double>& ExternalEmbeddings::vector_for(const std::string& key) const {
  const auto it = vectors_.find(key);
  if (it == vectors_.end())
    throw Error("MissingEmbedding", "condition key has no offline embedding");
  return it->second;
}

void ExternalEmbeddings::put(const std::string& key, std::vector<double> v) {
  if (d_enc_ == 0) d_enc_ = static_cast<i64>(v.size());
  if (static_cast<i64>(v.size()) != d_enc_)
    throw Error("DimensionMismatch", "vector length disagrees with established d_enc");
  vectors_[key] = std::move(v);
}

std::vector<double> synthetic_prompt_embedding(const AgingCondition& c, i64 d_enc) {
  std::vector<double> out(static_cast<size_t>(d_enc), 0.0);
  std::istringstream lines(render_prompt(c));
  std::string line;
  while (std::getline(lines, line)) {
    Rng rng(mix_seed(0x5eedf00dULL, fnv1a(line)));
    for (i64 j = 0; j < d_enc; ++j) out[static_cast<size_t>(j)] += rng.gaussian();
  }
  double norm2 = 0.0;
  for (double v : out) norm2 += v * v;
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  for (double& v : out) v *= inv;
  return out;
}

}  // namespace bdtf
