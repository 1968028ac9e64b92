#include "bdtf/train.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "bdtf/error.hpp"
#include "bdtf/eval.hpp"

namespace bdtf {

double masked_mse(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  double sse = 0.0, o = 0.0;
  for (i64 i = 0; i < target.size(); ++i) {
    const double d = target(i) - pred(i);
    sse += mask(i) * d * d;
    o += mask(i);
  }
  if (o == 0.0) throw Error("EmptyBatch", "mask selects no positions");
  return sse / o;
}

const std::vector<double>* EmbeddingSource::resolve(const Forecaster& model,
                                                    const ModelInput& input) const {
  if (!model.config().use_condition_prior() || !model.config().llm_embedder) return nullptr;
  if (!external_) throw Error("MissingEmbedding", "config needs an external embeddings file");
  if (external_->d_enc() != model.config().d_enc)
    throw Error("DimensionMismatch", "embeddings file d_enc disagrees with config");
  return &external_->vector_for(input.condition_key);
}

namespace {

constexpr double kNormFloor = 1e-12;

// Everything one sample contributes before batch-level weighting.
struct SampleGraph {
  std::unique_ptr<Graph> graph;
  int pred_sse = -1;     // scalar node: sum(mask*(y - y_hat)^2)
  int align = -1;        // scalar node: 1 - cos(h_mem, e_traj); -1 when skipped
  int recover_sse = -1;  // scalar node, -1 without memory
  double O = 0.0;
  bool align_skipped = false;
};

SampleGraph build_sample_graph(const Forecaster& model, const ProcessedSample& s,
                               const EmbeddingSource& embeddings, Rng* dropout_rng) {
  SampleGraph sg;
  sg.graph = std::make_unique<Graph>();
  Graph& g = *sg.graph;
  ForwardOptions opts;
  opts.dropout_rng = dropout_rng;

  const std::vector<double>* z = embeddings.resolve(model, s.input);
  const Forecaster::Output out = model.forward(g, s.input, z, opts);

  sg.pred_sse = g.masked_sse(out.y_hat, s.target.y_norm, s.target.mask);
  for (i64 j = 0; j < s.target.mask.size(); ++j) sg.O += s.target.mask(j);

  if (model.has_memory()) {
    Tensor y_masked = s.target.y_norm;
    for (i64 j = 0; j < y_masked.size(); ++j) y_masked(j) *= s.target.mask(j);
    const int e_traj = model.encode_trajectory(g, y_masked);
    const int y_bar = model.decode_trajectory(g, e_traj);
    sg.recover_sse = g.masked_sse(y_bar, s.target.y_norm, s.target.mask);

    auto norm = [&](int id) {
      double n2 = 0.0;
      const Tensor& v = g.val(id);
      for (i64 i = 0; i < v.size(); ++i) n2 += v(i) * v(i);
      return std::sqrt(n2);
    };
    if (norm(out.h_mem) > kNormFloor && norm(e_traj) > kNormFloor) {
      const int one = g.leaf(Tensor::scalar(1.0));
      sg.align = g.sub(one, g.cosine(out.h_mem, e_traj));
    } else {
      sg.align_skipped = true;
    }
  }
  return sg;
}

struct BatchTotals {
  LossBreakdown loss;
  i64 n_pred = 0;
  i64 n_align = 0;
};

BatchTotals summarize(const std::vector<SampleGraph>& graphs, double lambda1, double lambda2) {
  BatchTotals t;
  for (const auto& sg : graphs) {
    if (sg.O > 0.0) {
      ++t.n_pred;
      t.loss.pred += sg.graph->val(sg.pred_sse)(0) / sg.O;
      if (sg.recover_sse >= 0) t.loss.recover += sg.graph->val(sg.recover_sse)(0) / sg.O;
    } else {
      ++t.loss.skipped_samples;
    }
    if (sg.align >= 0)
      ++t.n_align;
    else if (sg.align_skipped)
      ++t.loss.skipped_samples;
  }
  if (t.n_pred == 0) throw Error("EmptyBatch", "every sample has an empty prediction mask");
  t.loss.pred /= static_cast<double>(t.n_pred);
  t.loss.recover /= static_cast<double>(t.n_pred);
  if (t.n_align > 0) {
    for (const auto& sg : graphs)
      if (sg.align >= 0) t.loss.align += sg.graph->val(sg.align)(0);
    t.loss.align /= static_cast<double>(t.n_align);
  }
  t.loss.total = t.loss.pred + lambda1 * t.loss.align + lambda2 * t.loss.recover;
  return t;
}

std::vector<SampleGraph> build_batch(const Forecaster& model,
                                     const std::vector<const ProcessedSample*>& batch,
                                     const EmbeddingSource& embeddings,
                                     std::uint64_t dropout_seed) {
  std::vector<SampleGraph> graphs(batch.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (i64 i = 0; i < static_cast<i64>(batch.size()); ++i) {
    try {
      std::unique_ptr<Rng> rng;
      if (dropout_seed != 0)
        rng = std::make_unique<Rng>(mix_seed(dropout_seed, static_cast<std::uint64_t>(i)));
      graphs[static_cast<size_t>(i)] =
          build_sample_graph(model, *batch[static_cast<size_t>(i)], embeddings, rng.get());
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return graphs;
}

}  // namespace

LossBreakdown batch_loss(const Forecaster& model,
                         const std::vector<const ProcessedSample*>& batch,
                         const EmbeddingSource& embeddings) {
  const auto graphs = build_batch(model, batch, embeddings, 0);
  return summarize(graphs, model.config().lambda1, model.config().lambda2).loss;
}

LossBreakdown batch_loss_and_grad(Forecaster& model,
                                  const std::vector<const ProcessedSample*>& batch,
                                  const EmbeddingSource& embeddings, std::uint64_t dropout_seed) {
  auto graphs = build_batch(model, batch, embeddings, dropout_seed);
  const double lambda1 = model.config().lambda1;
  const double lambda2 = model.config().lambda2;
  const BatchTotals totals = summarize(graphs, lambda1, lambda2);

  const double w_pred = 1.0 / static_cast<double>(totals.n_pred);
  const double w_align = totals.n_align > 0 ? lambda1 / static_cast<double>(totals.n_align) : 0.0;

  // Per-sample weighted total, backward, grads reduced in sample order afterwards.
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (i64 i = 0; i < static_cast<i64>(graphs.size()); ++i) {
    try {
      SampleGraph& sg = graphs[static_cast<size_t>(i)];
      Graph& g = *sg.graph;
      if (sg.O == 0.0) continue;
      int total = g.smul(sg.pred_sse, w_pred / sg.O);
      if (sg.recover_sse >= 0)
        total = g.add(total, g.smul(sg.recover_sse, lambda2 * w_pred / sg.O));
      if (sg.align >= 0 && w_align != 0.0) total = g.add(total, g.smul(sg.align, w_align));
      g.backward(total);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  ParamStore& store = model.params();
  for (const auto& sg : graphs) {
    for (const auto& [node, pidx] : sg.graph->param_links()) {
      const Tensor& gn = sg.graph->grad(node);
      if (gn.empty()) continue;
      Tensor& dst = store[pidx].grad;
      for (i64 k = 0; k < gn.size(); ++k) dst(k) += gn(k);
    }
  }
  return totals.loss;
}

void Adam::step(ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : params.items()) {
    for (i64 i = 0; i < p.value.size(); ++i) {
      double g = p.grad(i);
      if (wd_ != 0.0) g += wd_ * p.value(i);
      p.adam_m(i) = beta1_ * p.adam_m(i) + (1.0 - beta1_) * g;
      p.adam_v(i) = beta2_ * p.adam_v(i) + (1.0 - beta2_) * g * g;
      const double mhat = p.adam_m(i) / bc1;
      const double vhat = p.adam_v(i) / bc2;
      p.value(i) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double validation_mape(const Forecaster& model, const std::vector<ProcessedSample>& val_set,
                       const EmbeddingSource& embeddings) {
  if (val_set.empty()) throw Error("EmptyBatch", "empty validation set");
  std::vector<double> mapes(val_set.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (i64 i = 0; i < static_cast<i64>(val_set.size()); ++i) {
    try {
      const ProcessedSample& s = val_set[static_cast<size_t>(i)];
      Graph g;
      ForwardOptions opts;
      const std::vector<double>* z = embeddings.resolve(model, s.input);
      const Forecaster::Output out = model.forward(g, s.input, z, opts);
      Tensor y_hat({model.config().T_max});
      y_hat.data = g.val(out.y_hat).data;
      mapes[static_cast<size_t>(i)] = compute_metrics(y_hat, s.target).mape_pct;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  double acc = 0.0;
  for (double m : mapes) acc += m;
  return acc / static_cast<double>(mapes.size());
}

namespace {

std::vector<Tensor> snapshot_values(const ParamStore& store) {
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(store.count()));
  for (const auto& p : store.items()) out.push_back(p.value);
  return out;
}

void restore_values(ParamStore& store, const std::vector<Tensor>& snap) {
  for (int i = 0; i < store.count(); ++i) store[i].value = snap[static_cast<size_t>(i)];
}

}  // namespace

FitResult fit(Forecaster& model, const std::vector<ProcessedSample>& train_set,
              const std::vector<ProcessedSample>& val_set, const EmbeddingSource& embeddings,
              std::uint64_t seed, const std::function<void(const EpochStats&)>& on_epoch) {
  if (train_set.empty() || val_set.empty())
    throw Error("EmptyBatch", "fit needs nonempty train and validation sets");
  const ModelConfig& cfg = model.config();
  Adam opt(cfg.lr, cfg.weight_decay);
  const int omega = model.params().find("memory.slots");

  FitResult result;
  result.best_val_mape = std::numeric_limits<double>::infinity();
  std::vector<Tensor> last_finite = snapshot_values(model.params());
  i64 since_best = 0;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (i64 epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(seed, 0x11ULL), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    LossBreakdown epoch_loss;
    i64 seen = 0;
    bool finite = true;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      std::vector<const ProcessedSample*> batch;
      for (size_t k = start;
           k < std::min(order.size(), start + static_cast<size_t>(cfg.batch_size)); ++k)
        batch.push_back(&train_set[order[k]]);

      model.params().zero_grad();
      const std::uint64_t drop_seed =
          cfg.dropout > 0.0
              ? mix_seed(mix_seed(seed, static_cast<std::uint64_t>(epoch)),
                         static_cast<std::uint64_t>(start + 1))
              : 0;
      const LossBreakdown loss = batch_loss_and_grad(model, batch, embeddings, drop_seed);
      if (!std::isfinite(loss.total)) {
        finite = false;
        break;
      }
      opt.step(model.params());
      if (omega >= 0) PatternMemory::renorm_slots(model.params()[omega], seed, opt.steps_taken());

      const double w = static_cast<double>(batch.size());
      epoch_loss.pred += loss.pred * w;
      epoch_loss.align += loss.align * w;
      epoch_loss.recover += loss.recover * w;
      epoch_loss.skipped_samples += loss.skipped_samples;
      seen += static_cast<i64>(batch.size());
    }
    if (!finite) {
      restore_values(model.params(), last_finite);
      result.diverged = true;
      result.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) +
                          "; restored last finite parameters";
      break;
    }
    epoch_loss.pred /= static_cast<double>(seen);
    epoch_loss.align /= static_cast<double>(seen);
    epoch_loss.recover /= static_cast<double>(seen);
    epoch_loss.total =
        epoch_loss.pred + cfg.lambda1 * epoch_loss.align + cfg.lambda2 * epoch_loss.recover;
    last_finite = snapshot_values(model.params());

    EpochStats stats;
    stats.epoch = epoch;
    stats.train = epoch_loss;
    stats.val_mape = validation_mape(model, val_set, embeddings);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stats.val_mape < result.best_val_mape) {
      result.best_val_mape = stats.val_mape;
      result.best_epoch = epoch;
      result.best_params = snapshot_values(model.params());
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }

  if (!result.best_params.empty()) restore_values(model.params(), result.best_params);
  return result;
}

GradCheckReport gradient_check(Forecaster& model,
                               const std::vector<const ProcessedSample*>& batch,
                               const EmbeddingSource& embeddings, double tolerance, double step) {
  GradCheckReport report;

  model.params().zero_grad();
  batch_loss_and_grad(model, batch, embeddings, 0);
  std::vector<Tensor> analytic;
  analytic.reserve(static_cast<size_t>(model.params().count()));
  for (const auto& p : model.params().items()) analytic.push_back(p.grad);

  for (int pi = 0; pi < model.params().count(); ++pi) {
    Param& p = model.params()[pi];
    Tensor fd = Tensor::zeros(p.value.shape);
    for (i64 k = 0; k < p.value.size(); ++k) {
      const double keep = p.value(k);
      p.value(k) = keep + step;
      const double up = batch_loss(model, batch, embeddings).total;
      p.value(k) = keep - step;
      const double down = batch_loss(model, batch, embeddings).total;
      p.value(k) = keep;
      fd(k) = (up - down) / (2.0 * step);
      report.loss_evaluations += 2;
    }
    double n_fd = 0.0, n_an = 0.0, n_diff = 0.0;
    const Tensor& an = analytic[static_cast<size_t>(pi)];
    for (i64 k = 0; k < fd.size(); ++k) {
      n_fd += fd(k) * fd(k);
      n_an += an(k) * an(k);
      const double d = fd(k) - an(k);
      n_diff += d * d;
    }
    const double denom = std::max(std::sqrt(n_fd), std::sqrt(n_an));
    const double rel = denom > 0.0 ? std::sqrt(n_diff) / denom : 0.0;
    report.groups.push_back({p.name, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

ModelConfig sample_search_space(const ModelConfig& base, Rng& rng) {
  auto pick_i = [&](std::initializer_list<i64> vals) {
    std::vector<i64> v(vals);
    return v[static_cast<size_t>(rng.uniform_int(0, static_cast<i64>(v.size()) - 1))];
  };
  ModelConfig c = base;
  c.lr = rng.uniform(2e-5, 2e-4);
  c.batch_size = pick_i({64, 128});
  c.dropout = rng.uniform(0.05, 0.5);
  c.d = pick_i({64, 128, 256});
  c.d_ff = pick_i({32, 64, 128});
  c.d_ffs = pick_i({32, 64, 128, 256});
  c.L_intra = pick_i({2, 4});
  c.L_de = pick_i({2, 4, 6, 8});
  c.s_bar = pick_i({4, 8, 10, 12, 20, 50});
  c.N_mem = pick_i({64, 96});
  // kernel candidates are restricted to P <= L so every sampled config is valid
  std::vector<i64> kernels;
  for (i64 p : {10, 16, 20, 30})
    if (p <= base.L) kernels.push_back(p);
  c.P = kernels[static_cast<size_t>(rng.uniform_int(0, static_cast<i64>(kernels.size()) - 1))];
  c.validate();
  return c;
}

int select_best_trial(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw Error("InvalidConfig", "no trials to select from");
  int best = 0;
  for (int i = 1; i < static_cast<int>(trials.size()); ++i)
    if (trials[static_cast<size_t>(i)].val_mape < trials[static_cast<size_t>(best)].val_mape)
      best = i;  // strict: ties keep the earlier trial
  return best;
}

ModelConfig random_search(const ModelConfig& base, i64 budget, std::uint64_t seed,
                          const std::vector<ProcessedSample>& train_set,
                          const std::vector<ProcessedSample>& val_set,
                          const EmbeddingSource& embeddings, std::vector<TrialResult>* trials) {
  if (budget < 1) throw Error("InvalidConfig", "search budget must be >= 1");
  std::vector<AgingCondition> train_conditions;
  for (const auto& s : train_set)
    train_conditions.push_back(condition_from_key(s.input.condition_key));
  const EmbedVocab vocab = EmbedVocab::build(train_conditions);

  std::vector<TrialResult> local;
  std::vector<TrialResult>& all = trials ? *trials : local;
  for (i64 trial = 0; trial < budget; ++trial) {
    Rng rng(mix_seed(mix_seed(seed, 0xA11ULL), static_cast<std::uint64_t>(trial)));
    const ModelConfig cand = sample_search_space(base, rng);
    Forecaster model(cand, vocab, mix_seed(seed, static_cast<std::uint64_t>(trial)));
    const FitResult fr = fit(model, train_set, val_set, embeddings,
                             mix_seed(seed, static_cast<std::uint64_t>(trial * 2 + 1)));
    all.push_back({cand, fr.best_val_mape});
  }
  return all[static_cast<size_t>(select_best_trial(all))].config;
}

}  // namespace bdtf
