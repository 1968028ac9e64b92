#include "bdtf/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "bdtf/error.hpp"
#include "bdtf/rng.hpp"

namespace bdtf {

using nlohmann::json;

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("InvalidConfig", msg); };
  if (d <= 0 || h <= 0 || d % h != 0) fail("d must be positive and divisible by h");
  if (L <= 0 || L % 2 != 0) fail("L must be positive and even");
  if (P <= 0 || P > L) fail("P must satisfy 0 < P <= L");
  if (soc_tokens() < 1) fail("M = floor((L-P)/P)+1 must be >= 1");
  if (s_bar < 1) fail("s_bar must be >= 1");
  if (N_mem < 2) fail("N_mem must be >= 2 (top-2 retrieval)");
  if (S_max < 1) fail("S_max must be >= 1");
  if (L_de < 0 || L_intra < 0) fail("layer counts must be >= 0");
  if (d_ff <= 0 || d_ffs <= 0 || d_enc <= 0) fail("feed-forward dims must be positive");
  if (T_max < 1) fail("T_max must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0,1)");
  if (lambda1 < 0.0 || lambda2 < 0.0) fail("loss weights must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1 || patience < 1) fail("epochs and patience must be >= 1");
  if (!(lr > 0.0) && lr != 0.0) fail("lr must be >= 0");
}

namespace {

json to_json_obj(const ModelConfig& c) {
  return json{{"d", c.d},
              {"L", c.L},
              {"S_max", c.S_max},
              {"P", c.P},
              {"h", c.h},
              {"s_bar", c.s_bar},
              {"L_de", c.L_de},
              {"L_intra", c.L_intra},
              {"N_mem", c.N_mem},
              {"d_ff", c.d_ff},
              {"d_ffs", c.d_ffs},
              {"d_enc", c.d_enc},
              {"T_max", c.T_max},
              {"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"dropout", c.dropout},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"socview", c.socview},
              {"mdpm", c.mdpm},
              {"acdecoder", c.acdecoder},
              {"acattention", c.acattention},
              {"acquery", c.acquery},
              {"llm_embedder", c.llm_embedder}};
}

}  // namespace

std::string ModelConfig::to_json() const { return to_json_obj(*this).dump(2); }

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error("InvalidConfig", std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("InvalidConfig", "config must be a flat JSON object");

  ModelConfig c;
  const json defaults = to_json_obj(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error("InvalidConfig", "unknown config key: " + key);
    (void)value;
  }
  auto geti = [&](const char* k, std::int64_t& out) {
    if (j.contains(k)) out = j.at(k).get<std::int64_t>();
  };
  auto getd = [&](const char* k, double& out) {
    if (j.contains(k)) out = j.at(k).get<double>();
  };
  auto getb = [&](const char* k, bool& out) {
    if (j.contains(k)) out = j.at(k).get<bool>();
  };
  geti("d", c.d);
  geti("L", c.L);
  geti("S_max", c.S_max);
  geti("P", c.P);
  geti("h", c.h);
  geti("s_bar", c.s_bar);
  geti("L_de", c.L_de);
  geti("L_intra", c.L_intra);
  geti("N_mem", c.N_mem);
  geti("d_ff", c.d_ff);
  geti("d_ffs", c.d_ffs);
  geti("d_enc", c.d_enc);
  geti("T_max", c.T_max);
  getd("lambda1", c.lambda1);
  getd("lambda2", c.lambda2);
  getd("dropout", c.dropout);
  getd("lr", c.lr);
  getd("weight_decay", c.weight_decay);
  geti("batch_size", c.batch_size);
  geti("epochs", c.epochs);
  geti("patience", c.patience);
  getb("socview", c.socview);
  getb("mdpm", c.mdpm);
  getb("acdecoder", c.acdecoder);
  getb("acattention", c.acattention);
  getb("acquery", c.acquery);
  getb("llm_embedder", c.llm_embedder);
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void ModelConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write config file: " + path);
  out << to_json() << "\n";
}

std::uint64_t ModelConfig::fingerprint() const {
  const std::string s = to_json_obj(*this).dump();
  return fnv1a(s);
}

}  // namespace bdtf
