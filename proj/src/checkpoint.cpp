#include "bdtf/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "bdtf/error.hpp"

namespace bdtf {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "bdtf-checkpoint";
constexpr int kVersion = 1;
}  // namespace

Checkpoint Checkpoint::capture(const Forecaster& model, const FitResult& fit,
                               const SplitPlan& plan_in) {
  Checkpoint c;
  c.config = model.config();
  c.vocab = model.vocab();
  c.seed = model.seed();
  c.best_epoch = fit.best_epoch;
  c.best_val_mape = fit.best_val_mape;
  c.history = fit.history;
  c.plan = plan_in;
  c.diverged = fit.diverged;
  c.diagnostic = fit.diagnostic;
  for (const auto& p : model.params().items()) c.parameters.emplace_back(p.name, p.value);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  json hist = json::array();
  for (const auto& e : c.history)
    hist.push_back(json{{"epoch", e.epoch},
                        {"pred", e.train.pred},
                        {"align", e.train.align},
                        {"recover", e.train.recover},
                        {"total", e.train.total},
                        {"skipped", e.train.skipped_samples},
                        {"val_mape", e.val_mape}});
  json vocab = json::object();
  for (int f = 0; f < EmbedVocab::kFactors; ++f)
    vocab[EmbedVocab::factor_name(f)] = c.vocab.values[f];
  json assignment = json::object();
  for (const auto& [k, v] : c.plan.assignment)
    assignment[k] = v == Split::train ? "train" : (v == Split::val ? "val" : "test");
  json params = json::object();
  json shapes = json::object();
  for (const auto& [name, t] : c.parameters) {
    params[name] = t.data;
    shapes[name] = t.shape;
  }
  json j{{"format", kFormat},
         {"version", kVersion},
         {"config", json::parse(c.config.to_json())},
         {"vocab", vocab},
         {"seed", c.seed},
         {"best_epoch", c.best_epoch},
         {"best_val_mape", c.best_val_mape},
         {"history", hist},
         {"split", json{{"mode", c.plan.mode}, {"seed", c.plan.seed}, {"assignment", assignment}}},
         {"diverged", c.diverged},
         {"diagnostic", c.diagnostic},
         {"param_shapes", shapes},
         {"params", params}};
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("IOError", std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.contains("format") || j.at("format").get<std::string>() != kFormat)
    throw Error("IOError", "not a checkpoint file");
  if (j.at("version").get<int>() != kVersion)
    throw Error("IOError", "unsupported checkpoint version");

  Checkpoint c;
  c.config = ModelConfig::from_json(j.at("config").dump());
  for (int f = 0; f < EmbedVocab::kFactors; ++f)
    c.vocab.values[f] = j.at("vocab").at(EmbedVocab::factor_name(f)).get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.best_epoch = j.at("best_epoch").get<i64>();
  c.best_val_mape = j.at("best_val_mape").get<double>();
  for (const auto& e : j.at("history")) {
    EpochStats s;
    s.epoch = e.at("epoch").get<i64>();
    s.train.pred = e.at("pred").get<double>();
    s.train.align = e.at("align").get<double>();
    s.train.recover = e.at("recover").get<double>();
    s.train.total = e.at("total").get<double>();
    s.train.skipped_samples = e.at("skipped").get<i64>();
    s.val_mape = e.at("val_mape").get<double>();
    c.history.push_back(s);
  }
  const json& split = j.at("split");
  c.plan.mode = split.at("mode").get<std::string>();
  c.plan.seed = split.at("seed").get<std::uint64_t>();
  for (const auto& [k, v] : split.at("assignment").items()) {
    const std::string sv = v.get<std::string>();
    c.plan.assignment[k] =
        sv == "train" ? Split::train : (sv == "val" ? Split::val : Split::test);
  }
  c.diverged = j.at("diverged").get<bool>();
  c.diagnostic = j.at("diagnostic").get<std::string>();
  for (const auto& [name, data] : j.at("params").items()) {
    Tensor t;
    t.shape = j.at("param_shapes").at(name).get<std::vector<i64>>();
    t.data = data.get<std::vector<double>>();
    if (Tensor::numel(t.shape) != static_cast<i64>(t.data.size()))
      throw Error("IOError", "checkpoint parameter shape mismatch: " + name);
    c.parameters.emplace_back(name, std::move(t));
  }
  return c;
}

std::unique_ptr<Forecaster> restore_model(const Checkpoint& c) {
  auto model = std::make_unique<Forecaster>(c.config, c.vocab, c.seed);
  for (const auto& [name, t] : c.parameters) {
    const int idx = model->params().find(name);
    if (idx < 0) throw Error("IOError", "checkpoint parameter unknown to this config: " + name);
    Param& p = model->params()[idx];
    if (p.value.shape != t.shape)
      throw Error("IOError", "checkpoint parameter shape mismatch: " + name);
    p.value = t;
  }
  return model;
}

}  // namespace bdtf
