// Command-line pipeline driver: synth -> preprocess -> train -> evaluate / ablate / inspect.
// Exit codes: 0 ok, 2 config error, 3 missing artifact, 4 split-integrity violation.
#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "bdtf/ablation.hpp"
#include "bdtf/case_study.hpp"
#include "bdtf/checkpoint.hpp"
#include "bdtf/error.hpp"
#include "bdtf/pipeline.hpp"
#include "bdtf/record_io.hpp"
#include "bdtf/synth.hpp"

using namespace bdtf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "bdtf 0.1.0";

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t config_hash, std::uint64_t seed,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_s) {
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash));
  json j{{"command", command}, {"config_hash", hash_hex},   {"seed", seed},
         {"inputs", inputs},   {"outputs", outputs},        {"wall_time_s", wall_s},
         {"version", kVersion}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw Error("IOError", "cannot write manifest under " + out_dir);
  out << j.dump(2) << "\n";
}

SplitPlan make_plan(const std::vector<ProcessedSample>& samples, const std::string& mode,
                    std::uint64_t seed) {
  std::vector<std::string> keys;
  for (const auto& s : samples) keys.push_back(s.input.condition_key);
  if (mode == "leave-one-out") return split_leave_one_out(keys, seed);
  return split_by_condition(keys, {6.0, 2.0, 2.0}, seed);
}

json report_to_json(const EvalReport& r) {
  json per = json::array();
  for (const auto& b : r.per_battery)
    per.push_back(json{{"battery_id", b.battery_id}, {"mape_pct", b.mape_pct}, {"mae", b.mae}});
  return json{{"per_battery", per},
              {"mape_mean", r.mape_mean},
              {"mape_sd", r.mape_sd},
              {"mae_mean", r.mae_mean},
              {"mae_sd", r.mae_sd},
              {"persistence_mape_mean", r.persistence_mape_mean},
              {"persistence_mae_mean", r.persistence_mae_mean}};
}

void write_metrics_csv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  out << "battery_id,mape_pct,mae\n";
  for (const auto& b : r.per_battery)
    out << b.battery_id << "," << b.mape_pct << "," << b.mae << "\n";
}

struct CommonArgs {
  std::string config_path;
  std::string embeddings_path;
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 1;
  std::string split_mode = "random";
  std::string out_dir;
};

ModelConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return ModelConfig{};
  return ModelConfig::load(path);
}

struct LoadedEmbeddings {
  std::unique_ptr<ExternalEmbeddings> store;
  EmbeddingSource source;
};

LoadedEmbeddings load_embeddings(const std::string& path) {
  LoadedEmbeddings le;
  if (!path.empty()) {
    le.store = std::make_unique<ExternalEmbeddings>(ExternalEmbeddings::load(path));
    le.source = EmbeddingSource(le.store.get());
  }
  return le;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  Stopwatch watch;
  const SynthSpec spec = SynthSpec::load(spec_path);
  const SynthSummary summary = generate_dataset(spec, out_dir);
  std::vector<std::string> outputs = summary.record_paths;
  outputs.push_back(summary.ground_truth_path);
  outputs.push_back(summary.embeddings_path);
  write_manifest(out_dir, "synth", fnv1a(spec_path), spec.seed, {spec_path}, outputs,
                 watch.seconds());
  std::cout << "wrote " << summary.record_paths.size() << " record files to " << out_dir << "\n";
  return 0;
}

int run_preprocess(const std::string& in_dir, const std::string& out_dir,
                   const std::string& config_path, const std::string& smoothing_path,
                   const std::string& split_mode, std::uint64_t split_seed, i64 s_cycles) {
  Stopwatch watch;
  PreprocessOptions opt;
  opt.config = load_config_or_default(config_path);
  if (!smoothing_path.empty()) opt.smoothing = load_smoothing_params(smoothing_path);
  opt.requested_S = s_cycles;

  const PreprocessReport report = preprocess_directory(in_dir, out_dir, opt, split_mode,
                                                       split_seed);
  json exclusions = json::object();
  for (const auto& [id, reason] : report.exclusions) exclusions[id] = reason;
  json j{{"processed", report.processed_ids},
         {"exclusions", exclusions},
         {"training_delta_count", report.training_delta_count},
         {"threshold_split_mode", report.threshold_plan.mode},
         {"threshold_split_seed", report.threshold_plan.seed}};
  std::ofstream rf(out_dir + "/preprocess_report.json");
  rf << j.dump(2) << "\n";

  std::vector<std::string> outputs = report.sample_paths;
  outputs.push_back(out_dir + "/preprocess_report.json");
  write_manifest(out_dir, "preprocess", opt.config.fingerprint(), split_seed, {in_dir}, outputs,
                 watch.seconds());
  std::cout << "processed " << report.processed_ids.size() << " batteries, excluded "
            << report.exclusions.size() << "\n";
  for (const auto& [id, reason] : report.exclusions)
    std::cout << "  excluded " << id << ": " << reason << "\n";
  if (report.processed_ids.empty()) {
    std::cerr << "every battery failed preprocessing\n";
    return 1;
  }
  return 0;
}

int run_train(const std::string& data_dir, const CommonArgs& args, double fraction) {
  Stopwatch watch;
  const ModelConfig cfg = load_config_or_default(args.config_path);
  auto samples = load_sample_dir(data_dir);
  if (samples.empty()) throw Error("IOError", "no sample files under " + data_dir);
  const SplitPlan plan = make_plan(samples, args.split_mode, args.split_seed);

  std::vector<std::string> kept;
  if (fraction < 1.0) kept = subsample_training(samples, plan, fraction, args.seed);
  const SplitSamples split = partition_samples(samples, plan, kept);
  check_condition_exclusivity(split);
  if (split.train.empty() || split.val.empty())
    throw Error("InvalidConfig", "split produced an empty train or val set");

  const LoadedEmbeddings emb = load_embeddings(args.embeddings_path);
  if (cfg.llm_embedder && !emb.store)
    throw Error("MissingEmbedding", "config.llm_embedder needs --embeddings");

  std::vector<AgingCondition> train_conditions;
  for (const auto& s : split.train)
    train_conditions.push_back(condition_from_key(s.input.condition_key));
  Forecaster model(cfg, EmbedVocab::build(train_conditions), args.seed);

  fs::create_directories(args.out_dir);
  std::ofstream log(args.out_dir + "/train_log.jsonl");
  const FitResult fr = fit(model, split.train, split.val, emb.source, args.seed,
                           [&](const EpochStats& e) {
                             log << json{{"epoch", e.epoch},
                                         {"pred", e.train.pred},
                                         {"align", e.train.align},
                                         {"recover", e.train.recover},
                                         {"total", e.train.total},
                                         {"val_mape", e.val_mape}}
                                        .dump()
                                 << "\n";
                             log.flush();
                           });

  const std::string ckpt_path = args.out_dir + "/checkpoint.json";
  save_checkpoint(Checkpoint::capture(model, fr, plan), ckpt_path);
  write_manifest(args.out_dir, "train", cfg.fingerprint(), args.seed, {data_dir},
                 {ckpt_path, args.out_dir + "/train_log.jsonl"}, watch.seconds());
  std::cout << "best epoch " << fr.best_epoch << ", val MAPE " << fr.best_val_mape << "%"
            << (fr.diverged ? " (diverged: " + fr.diagnostic + ")" : "") << "\n";
  return fr.diverged ? 1 : 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& data_dir,
                 const CommonArgs& args, const std::string& s_cycles_csv,
                 const std::string& records_dir) {
  Stopwatch watch;
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto model = restore_model(ckpt);
  const LoadedEmbeddings emb = load_embeddings(args.embeddings_path);

  auto samples = load_sample_dir(data_dir);
  const SplitSamples split = partition_samples(samples, ckpt.plan);
  check_condition_exclusivity(split);
  if (split.test.empty()) throw Error("NothingToScore", "plan assigns no test batteries");

  fs::create_directories(args.out_dir);
  const EvalReport report = evaluate_samples(*model, split.test, emb.source);
  json j{{"test", report_to_json(report)},
         {"checkpoint", ckpt_path},
         {"split_mode", ckpt.plan.mode},
         {"S", split.test.front().input.S},
         {"ablation_flags",
          {{"socview", ckpt.config.socview},
           {"mdpm", ckpt.config.mdpm},
           {"acdecoder", ckpt.config.acdecoder},
           {"acattention", ckpt.config.acattention},
           {"acquery", ckpt.config.acquery},
           {"llm_embedder", ckpt.config.llm_embedder}}}};

  std::vector<std::string> outputs = {args.out_dir + "/evaluation.json",
                                      args.out_dir + "/metrics.csv"};
  write_metrics_csv(report, args.out_dir + "/metrics.csv");

  if (!s_cycles_csv.empty()) {
    if (records_dir.empty())
      throw Error("InvalidConfig", "--s-cycles needs --records to rebuild inputs");
    json sweep = json::array();
    std::ofstream csv(args.out_dir + "/early_cycle_sweep.csv");
    csv << "S,mape_mean,mae_mean,persistence_mape_mean\n";
    std::stringstream ss(s_cycles_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const i64 S = std::stoll(tok);
      PreprocessOptions opt;
      opt.config = ckpt.config;
      opt.requested_S = S;
      const std::string tmp = args.out_dir + "/sweep_S" + std::to_string(S);
      const PreprocessReport rep =
          preprocess_directory(records_dir, tmp, opt, ckpt.plan.mode, ckpt.plan.seed);
      (void)rep;
      const SplitSamples sw = partition_samples(load_sample_dir(tmp), ckpt.plan);
      const EvalReport er = evaluate_samples(*model, sw.test, emb.source);
      sweep.push_back(json{{"S", S}, {"report", report_to_json(er)}});
      csv << S << "," << er.mape_mean << "," << er.mae_mean << ","
          << er.persistence_mape_mean << "\n";
    }
    j["early_cycle_sweep"] = sweep;
    outputs.push_back(args.out_dir + "/early_cycle_sweep.csv");
  }

  std::ofstream out(args.out_dir + "/evaluation.json");
  out << j.dump(2) << "\n";
  write_manifest(args.out_dir, "evaluate", ckpt.config.fingerprint(), args.seed,
                 {ckpt_path, data_dir}, outputs, watch.seconds());
  std::cout << "test MAPE " << report.mape_mean << "% (persistence "
            << report.persistence_mape_mean << "%)\n";
  return 0;
}

int run_ablate(const std::string& data_dir, const CommonArgs& args,
               const std::string& variants_csv, const std::string& split_seeds_csv) {
  Stopwatch watch;
  ModelConfig cfg = load_config_or_default(args.config_path);
  const LoadedEmbeddings emb = load_embeddings(args.embeddings_path);
  cfg.llm_embedder = emb.store != nullptr;  // the full model uses offline embeddings when given

  auto samples = load_sample_dir(data_dir);
  if (samples.empty()) throw Error("IOError", "no sample files under " + data_dir);

  // one split per requested seed; macro metrics are aggregated mean +- sd across splits
  std::vector<std::uint64_t> split_seeds;
  if (split_seeds_csv.empty()) {
    split_seeds.push_back(args.split_seed);
  } else {
    std::stringstream ss(split_seeds_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) split_seeds.push_back(std::stoull(tok));
  }
  std::vector<SplitSamples> splits;
  for (std::uint64_t s : split_seeds) {
    const SplitPlan plan = make_plan(samples, args.split_mode, s);
    splits.push_back(partition_samples(samples, plan));
    check_condition_exclusivity(splits.back());
  }

  std::vector<AblationVariant> variants;
  if (variants_csv == "all") {
    variants = all_variants();
  } else {
    std::stringstream ss(variants_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) variants.push_back(variant_from_name(tok));
  }

  fs::create_directories(args.out_dir);
  json out = json::array();
  std::ofstream csv(args.out_dir + "/ablation.csv");
  csv << "variant,splits,mape_mean,mape_sd,mae_mean,mae_sd,param_scalars,param_checksum\n";
  for (AblationVariant v : variants) {
    json per_split = json::array();
    std::vector<double> mapes, maes;
    AblationReport last;
    for (size_t si = 0; si < splits.size(); ++si) {
      const AblationReport rep =
          run_ablation(v, cfg, splits[si], emb.source, mix_seed(args.seed, split_seeds[si]));
      mapes.push_back(rep.test.mape_mean);
      maes.push_back(rep.test.mae_mean);
      per_split.push_back(json{{"split_seed", split_seeds[si]},
                               {"epochs_ran", rep.epochs_ran},
                               {"final_train_loss",
                                {{"pred", rep.last_train_loss.pred},
                                 {"align", rep.last_train_loss.align},
                                 {"recover", rep.last_train_loss.recover},
                                 {"total", rep.last_train_loss.total}}},
                               {"test", report_to_json(rep.test)}});
      last = rep;
    }
    auto mean_sd = [](const std::vector<double>& xs) {
      double m = 0.0;
      for (double x : xs) m += x;
      m /= static_cast<double>(xs.size());
      double s = 0.0;
      for (double x : xs) s += (x - m) * (x - m);
      return std::pair<double, double>(
          m, xs.size() > 1 ? std::sqrt(s / static_cast<double>(xs.size() - 1)) : 0.0);
    };
    const auto [mape_m, mape_s] = mean_sd(mapes);
    const auto [mae_m, mae_s] = mean_sd(maes);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(last.param_checksum));
    out.push_back(json{{"variant", variant_name(v)},
                       {"param_checksum", hex},
                       {"param_scalars", last.param_scalars},
                       {"param_tensors", last.param_tensors},
                       {"splits", per_split},
                       {"across_splits",
                        {{"mape_mean", mape_m},
                         {"mape_sd", mape_s},
                         {"mae_mean", mae_m},
                         {"mae_sd", mae_s}}}});
    csv << variant_name(v) << "," << splits.size() << "," << mape_m << "," << mape_s << ","
        << mae_m << "," << mae_s << "," << last.param_scalars << "," << hex << "\n";
    std::cout << variant_name(v) << ": MAPE " << mape_m << "%";
    if (splits.size() > 1) std::cout << " +- " << mape_s;
    std::cout << "\n";
  }
  std::ofstream jf(args.out_dir + "/ablation.json");
  jf << out.dump(2) << "\n";
  write_manifest(args.out_dir, "ablate", cfg.fingerprint(), args.seed, {data_dir},
                 {args.out_dir + "/ablation.json", args.out_dir + "/ablation.csv"},
                 watch.seconds());
  return 0;
}

int run_inspect(const std::string& ckpt_path, const std::string& data_dir,
                const std::string& battery_id, const CommonArgs& args) {
  Stopwatch watch;
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto model = restore_model(ckpt);
  const LoadedEmbeddings emb = load_embeddings(args.embeddings_path);

  const auto samples = load_sample_dir(data_dir);
  const ProcessedSample* sample = nullptr;
  for (const auto& s : samples)
    if (s.battery_id == battery_id) sample = &s;
  if (!sample) throw Error("IOError", "battery not found in data dir: " + battery_id);

  fs::create_directories(args.out_dir);
  const std::string path = args.out_dir + "/" + battery_id + ".case.json";
  std::ofstream out(path);
  out << export_case_study(*model, *sample, emb.source) << "\n";
  write_manifest(args.out_dir, "inspect", ckpt.config.fingerprint(), args.seed,
                 {ckpt_path, data_dir}, {path}, watch.seconds());
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_search(const std::string& data_dir, const CommonArgs& args, i64 budget) {
  Stopwatch watch;
  const ModelConfig base = load_config_or_default(args.config_path);
  const LoadedEmbeddings emb = load_embeddings(args.embeddings_path);
  auto samples = load_sample_dir(data_dir);
  const SplitPlan plan = make_plan(samples, args.split_mode, args.split_seed);
  const SplitSamples split = partition_samples(samples, plan);
  check_condition_exclusivity(split);

  std::vector<TrialResult> trials;
  const ModelConfig best =
      random_search(base, budget, args.seed, split.train, split.val, emb.source, &trials);

  fs::create_directories(args.out_dir);
  json jt = json::array();
  for (const auto& t : trials)
    jt.push_back(json{{"config", json::parse(t.config.to_json())}, {"val_mape", t.val_mape}});
  std::ofstream out(args.out_dir + "/search.json");
  out << json{{"trials", jt}, {"best", json::parse(best.to_json())}}.dump(2) << "\n";
  best.save(args.out_dir + "/best_config.json");
  write_manifest(args.out_dir, "search", base.fingerprint(), args.seed, {data_dir},
                 {args.out_dir + "/search.json", args.out_dir + "/best_config.json"},
                 watch.seconds());
  std::cout << "best val MAPE over " << budget << " trials written to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"battery degradation trajectory forecasting pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string spec_path, in_dir, data_dir, ckpt_path, battery_id, variants = "all";
  std::string smoothing_path, s_cycles, records_dir, split_seeds;
  double fraction = 1.0;
  i64 s_cycles_pre = -1, budget = 4;

  auto add_common = [&](CLI::App* sub, bool with_split = true) {
    sub->add_option("--config", args.config_path, "model config JSON");
    sub->add_option("--seed", args.seed, "run seed");
    sub->add_option("--out", args.out_dir, "output directory")->required();
    sub->add_option("--embeddings", args.embeddings_path, "offline condition embeddings JSON");
    if (with_split) {
      sub->add_option("--split", args.split_mode, "random | leave-one-out")
          ->check(CLI::IsMember({"random", "leave-one-out"}));
      sub->add_option("--split-seed", args.split_seed, "condition split seed");
    }
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic battery dataset");
  synth->add_option("--spec", spec_path, "synth spec JSON")->required();
  synth->add_option("--out", args.out_dir, "output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "clean records and build model inputs");
  pre->add_option("--in", in_dir, "record directory")->required();
  pre->add_option("--smoothing", smoothing_path, "smoothing params JSON");
  pre->add_option("--s-cycles", s_cycles_pre, "usable early cycles (default: min(S_max, n))");
  add_common(pre);

  auto* train_cmd = app.add_subcommand("train", "fit a model on preprocessed samples");
  train_cmd->add_option("--data", data_dir, "sample directory")->required();
  train_cmd->add_option("--fraction", fraction, "training-battery fraction kept");
  add_common(train_cmd);

  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on its test split");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  eval_cmd->add_option("--data", data_dir, "sample directory")->required();
  eval_cmd->add_option("--s-cycles", s_cycles, "comma list for the early-cycle sweep");
  eval_cmd->add_option("--records", records_dir, "record directory (sweep input rebuild)");
  add_common(eval_cmd, false);

  auto* ablate_cmd = app.add_subcommand("ablate", "train and score ablation variants");
  ablate_cmd->add_option("--data", data_dir, "sample directory")->required();
  ablate_cmd->add_option("--variant,--variants", variants, "comma list or 'all'");
  ablate_cmd->add_option("--split-seeds", split_seeds,
                         "comma list of split seeds for mean +- sd across splits");
  add_common(ablate_cmd);

  auto* inspect_cmd = app.add_subcommand("inspect", "interpretability export for one battery");
  inspect_cmd->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  inspect_cmd->add_option("--data", data_dir, "sample directory")->required();
  inspect_cmd->add_option("--battery", battery_id, "battery id")->required();
  add_common(inspect_cmd, false);

  auto* search_cmd = app.add_subcommand("search", "random hyperparameter search");
  search_cmd->add_option("--data", data_dir, "sample directory")->required();
  search_cmd->add_option("--budget", budget, "number of trials");
  add_common(search_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(spec_path, args.out_dir);
    if (pre->parsed())
      return run_preprocess(in_dir, args.out_dir, args.config_path, smoothing_path,
                            args.split_mode, args.split_seed, s_cycles_pre);
    if (train_cmd->parsed()) return run_train(data_dir, args, fraction);
    if (eval_cmd->parsed())
      return run_evaluate(ckpt_path, data_dir, args, s_cycles, records_dir);
    if (ablate_cmd->parsed()) return run_ablate(data_dir, args, variants, split_seeds);
    if (inspect_cmd->parsed()) return run_inspect(ckpt_path, data_dir, battery_id, args);
    if (search_cmd->parsed()) return run_search(data_dir, args, budget);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    if (e.code() == "InvalidConfig" || e.code() == "InvalidSpec") return 2;
    if (e.code() == "IOError" || e.code() == "MissingEmbedding") return 3;
    if (e.code() == "SplitIntegrity") return 4;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
