#pragma once

#include <span>
#include <string>

#include "matfun/datagen.hpp"
#include "matfun/metrics.hpp"
#include "matfun/models.hpp"

namespace matfun::cli {

// Shortest decimal that reads back to the same double.
std::string shortest(double x);

// Scores every sample: regression models directly, encoder-decoders by greedy decoding.
metrics::EvalErrors evaluate_model(nn::Model& model, std::span<const data::Sample> samples);

}  // namespace matfun::cli
