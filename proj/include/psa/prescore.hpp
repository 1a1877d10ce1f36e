#pragma once

#include "psa/clustering.hpp"
#include "psa/prescore_types.hpp"
#include "psa/sketch.hpp"

namespace psa {

// Ranks the rows of `keys` and returns the cfg.s retained ones.
//
// When cfg.sigma > 0 the keys are first perturbed with N(0, sigma^2) noise
// drawn from `rng`, and every later step sees the perturbed keys. Clustering
// methods cluster with cfg.seed and order keys per cfg.selection; leverage
// methods order by descending score (LEVERAGE sketches with `rng`). Ties
// always go to the lower index.
ScoredKeySet prescore(const Matrix& keys, const PreScoreConfig& cfg, Rng& rng,
                      Exec exec = Exec::kParallel);

void validate(const PreScoreConfig& cfg, std::size_t n, std::size_t d);

}  // namespace psa
