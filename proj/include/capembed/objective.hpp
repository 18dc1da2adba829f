#pragma once

#include "capembed/tensor.hpp"

namespace capembed::objective {

enum class Reduction { sum, mean_per_term };

struct LossConfig {
  double margin = 0.2;
  Reduction reduction = Reduction::sum;

  void validate() const {
    if (!(margin > 0.0)) throw ValidationError("loss config: margin must be > 0");
  }
};

// S[i][j] = cos(X_i, Y_j). Rows are normalized internally (epsilon floor),
// so inputs need not be unit vectors.
Var cosine_matrix(Graph& g, Var x, Var y);

// Bidirectional in-batch hinge loss over a B x B similarity matrix whose
// diagonal holds the matched pairs: every other row/column entry serves as
// a counterexample. Subgradient at exactly zero is zero.
Var hinge_loss(Graph& g, Var similarities, const LossConfig& config);

}  // namespace capembed::objective
