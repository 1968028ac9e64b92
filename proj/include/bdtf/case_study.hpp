#pragma once

#include <string>

#include "bdtf/model.hpp"
#include "bdtf/sample_io.hpp"
#include "bdtf/train.hpp"

namespace bdtf {

// Full interpretability export for one battery: forecast vs truth, retrieved prototypes with
// weights, final-layer cross-attention (raw tensor plus per-token aggregate with temporal/SOC
// masses and cumulative curve), top-25% SOC tokens, and a DVA curve from the last observed
// cycle's charge half. Returned as a JSON string.
std::string export_case_study(const Forecaster& model, const ProcessedSample& sample,
                              const EmbeddingSource& embeddings);

}  // namespace bdtf
