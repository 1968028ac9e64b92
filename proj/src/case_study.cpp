#include "bdtf/case_study.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "bdtf/error.hpp"
#include "bdtf/eval.hpp"

namespace bdtf {

using nlohmann::json;

std::string export_case_study(const Forecaster& model, const ProcessedSample& sample,
                              const EmbeddingSource& embeddings) {
  const ModelConfig& cfg = model.config();
  Graph g;
  ForwardOptions opts;
  opts.capture_attention = true;
  const std::vector<double>* z = embeddings.resolve(model, sample.input);
  const Forecaster::Output out = model.forward(g, sample.input, z, opts);

  const double tau = sample.target.tau;
  json j;
  j["battery_id"] = sample.battery_id;
  j["S"] = sample.input.S;
  j["t_eol"] = sample.t_eol;
  j["tau"] = tau;

  // forecast and truth on the original SOH scale
  const Tensor& yh = g.val(out.y_hat);
  std::vector<double> forecast(static_cast<size_t>(cfg.T_max));
  for (i64 k = 0; k < cfg.T_max; ++k)
    forecast[static_cast<size_t>(k)] = denormalize_soh(yh(k), tau);
  j["forecast_soh"] = forecast;
  {
    json truth = json::array();
    for (i64 k = 0; k < cfg.T_max; ++k) {
      if (sample.target.mask(k) == 0.0) continue;
      truth.push_back(
          json{{"cycle", k + 1}, {"soh", denormalize_soh(sample.target.y_norm(k), tau)}});
    }
    j["truth_soh"] = truth;
  }

  // retrieved prototypes, decoded to full-length curves ("length T_max before truncation")
  if (model.has_memory()) {
    json retr;
    retr["indices"] = out.retrieval.indices;
    retr["alpha"] = out.retrieval.alpha;
    retr["similarities"] = out.retrieval.similarities;
    json protos = json::array();
    for (int r = 0; r < 2; ++r) {
      const Tensor curve = model.decode_prototype(out.retrieval.indices[static_cast<size_t>(r)]);
      std::vector<double> soh(static_cast<size_t>(cfg.T_max));
      for (i64 k = 0; k < cfg.T_max; ++k)
        soh[static_cast<size_t>(k)] = denormalize_soh(curve(k), tau);
      protos.push_back(soh);
    }
    retr["prototype_soh"] = protos;
    j["retrieval"] = retr;
  }

  // final-layer cross-attention
  if (!out.cross_attention.empty()) {
    const Tensor& attn = out.cross_attention;  // [h x s_bar x n_k]
    const i64 heads = attn.dim(0), queries = attn.dim(1), n_k = attn.dim(2);
    json ja;
    ja["weights"] = json{{"shape", attn.shape}, {"data", attn.data}};

    std::vector<double> per_token(static_cast<size_t>(n_k), 0.0);
    for (i64 hI = 0; hI < heads; ++hI)
      for (i64 q = 0; q < queries; ++q)
        for (i64 k = 0; k < n_k; ++k)
          per_token[static_cast<size_t>(k)] += attn(hI, q, k);
    for (auto& w : per_token) w /= static_cast<double>(heads * queries);

    double temporal_mass = 0.0, soc_mass = 0.0;
    for (i64 k = 0; k < n_k; ++k)
      (k < cfg.S_max ? temporal_mass : soc_mass) += per_token[static_cast<size_t>(k)];
    std::vector<double> cumulative(per_token.size());
    double acc = 0.0;
    for (size_t k = 0; k < per_token.size(); ++k) {
      acc += per_token[k];
      cumulative[k] = acc;
    }
    ja["per_token"] = per_token;
    ja["cumulative"] = cumulative;
    ja["temporal_mass"] = temporal_mass;
    ja["soc_mass"] = soc_mass;
    ja["boundary"] = cfg.S_max;  // first SOC-view token index

    // top-25% SOC tokens by attention weight (ceil rule)
    if (cfg.socview) {
      const i64 M = cfg.soc_tokens();
      std::vector<i64> order(static_cast<size_t>(M));
      for (i64 m = 0; m < M; ++m) order[static_cast<size_t>(m)] = m;
      std::sort(order.begin(), order.end(), [&](i64 a, i64 b) {
        const double wa = per_token[static_cast<size_t>(cfg.S_max + a)];
        const double wb = per_token[static_cast<size_t>(cfg.S_max + b)];
        if (wa != wb) return wa > wb;
        return a < b;
      });
      const i64 keep = static_cast<i64>(std::ceil(0.25 * static_cast<double>(M)));
      json top = json::array();
      const i64 last = sample.input.S - 1;  // 0-based row of the last observed cycle
      for (i64 r = 0; r < keep; ++r) {
        const i64 m = order[static_cast<size_t>(r)];
        double lo = 1.0, hi = 0.0;
        for (i64 pp = m * cfg.P; pp < (m + 1) * cfg.P; ++pp) {
          const double s = sample.input.X(last, pp, kSoc);
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
        top.push_back(json{{"token", m},
                           {"weight", per_token[static_cast<size_t>(cfg.S_max + m)]},
                           {"soc_interval", {lo, hi}}});
      }
      ja["top_soc_tokens"] = top;
    }
    j["attention"] = ja;
  }

  // DVA over the charge half of the last observed cycle (resampled grid)
  {
    const i64 half = cfg.L / 2;
    const i64 last = sample.input.S - 1;
    std::vector<double> v(static_cast<size_t>(half)), q(static_cast<size_t>(half)),
        soc(static_cast<size_t>(half));
    for (i64 k = 0; k < half; ++k) {
      v[static_cast<size_t>(k)] = sample.input.X(last, k, kVoltage);
      q[static_cast<size_t>(k)] = sample.input.X(last, k, kCapacity);
      soc[static_cast<size_t>(k)] = sample.input.X(last, k, kSoc);
    }
    try {
      j["dva"] = json{{"soc", soc}, {"dvdq", compute_dva(v, q)}};
    } catch (const Error& e) {
      j["dva"] = json{{"error", e.what()}};
    }
  }

  return j.dump();
}

}  // namespace bdtf
