#include "bdtf/ablation.hpp"

#include <cmath>

#include "bdtf/error.hpp"

namespace bdtf {

const char* variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_socview: return "no_socview";
    case AblationVariant::no_mdpm: return "no_mdpm";
    case AblationVariant::no_acdecoder: return "no_acdecoder";
    case AblationVariant::no_acattention: return "no_acattention";
    case AblationVariant::no_acquery: return "no_acquery";
    default: return "no_llm";
  }
}

AblationVariant variant_from_name(const std::string& name) {
  for (AblationVariant v : all_variants())
    if (name == variant_name(v)) return v;
  throw Error("InvalidConfig", "unknown ablation variant: " + name);
}

const std::vector<AblationVariant>& all_variants() {
  static const std::vector<AblationVariant> v = {
      AblationVariant::full,         AblationVariant::no_socview,
      AblationVariant::no_mdpm,      AblationVariant::no_acdecoder,
      AblationVariant::no_acattention, AblationVariant::no_acquery,
      AblationVariant::no_llm};
  return v;
}

ModelConfig apply_variant(const ModelConfig& full_config, AblationVariant v) {
  ModelConfig c = full_config;
  switch (v) {
    case AblationVariant::full: break;
    case AblationVariant::no_socview: c.socview = false; break;
    case AblationVariant::no_mdpm: c.mdpm = false; break;
    case AblationVariant::no_acdecoder: c.acdecoder = false; break;
    case AblationVariant::no_acattention: c.acattention = false; break;
    case AblationVariant::no_acquery: c.acquery = false; break;
    case AblationVariant::no_llm: c.llm_embedder = false; break;
  }
  return c;
}

EvalReport evaluate_samples(const Forecaster& model, const std::vector<ProcessedSample>& samples,
                            const EmbeddingSource& embeddings) {
  if (samples.empty()) throw Error("NothingToScore", "no samples to evaluate");
  EvalReport report;
  double p_mape = 0.0, p_mae = 0.0;
  for (const auto& s : samples) {
    Graph g;
    ForwardOptions opts;
    const std::vector<double>* z = embeddings.resolve(model, s.input);
    const Forecaster::Output out = model.forward(g, s.input, z, opts);
    Tensor y_hat({model.config().T_max});
    y_hat.data = g.val(out.y_hat).data;
    const Metrics m = compute_metrics(y_hat, s.target);
    report.per_battery.push_back({s.battery_id, m.mape_pct, m.mae});
    const Metrics pm = persistence_metrics(s.last_obs_soh, s.target);
    p_mape += pm.mape_pct;
    p_mae += pm.mae;
  }
  const double n = static_cast<double>(report.per_battery.size());
  for (const auto& b : report.per_battery) {
    report.mape_mean += b.mape_pct;
    report.mae_mean += b.mae;
  }
  report.mape_mean /= n;
  report.mae_mean /= n;
  for (const auto& b : report.per_battery) {
    report.mape_sd += (b.mape_pct - report.mape_mean) * (b.mape_pct - report.mape_mean);
    report.mae_sd += (b.mae - report.mae_mean) * (b.mae - report.mae_mean);
  }
  report.mape_sd = n > 1 ? std::sqrt(report.mape_sd / (n - 1)) : 0.0;
  report.mae_sd = n > 1 ? std::sqrt(report.mae_sd / (n - 1)) : 0.0;
  report.persistence_mape_mean = p_mape / n;
  report.persistence_mae_mean = p_mae / n;
  return report;
}

AblationReport run_ablation(AblationVariant v, const ModelConfig& full_config,
                            const SplitSamples& split, const EmbeddingSource& embeddings,
                            std::uint64_t seed) {
  check_condition_exclusivity(split);
  const ModelConfig cfg = apply_variant(full_config, v);
  std::vector<AgingCondition> train_conditions;
  for (const auto& s : split.train)
    train_conditions.push_back(condition_from_key(s.input.condition_key));
  Forecaster model(cfg, EmbedVocab::build(train_conditions), seed);

  const FitResult fr = fit(model, split.train, split.val, embeddings, seed);

  AblationReport report;
  report.variant = v;
  report.param_checksum = model.params().checksum();
  report.param_scalars = model.params().scalar_count();
  report.param_tensors = model.params().count();
  report.test = evaluate_samples(model, split.test, embeddings);
  if (!fr.history.empty()) report.last_train_loss = fr.history.back().train;
  report.epochs_ran = static_cast<i64>(fr.history.size());
  return report;
}

}  // namespace bdtf
