#include "capembed/objective.hpp"

namespace capembed::objective {

Var cosine_matrix(Graph& g, Var x, Var y) {
  const Tensor& xv = g.value(x);
  const Tensor& yv = g.value(y);
  if (xv.rank() != 2 || yv.rank() != 2 || xv.dim(1) != yv.dim(1)) {
    throw DimensionError("cosine_matrix: incompatible shapes " + shape_str(xv.shape()) +
                         " and " + shape_str(yv.shape()));
  }
  Var xn = g.l2_normalize_rows(x);
  Var yn = g.l2_normalize_rows(y);
  return g.matmul(xn, g.transpose(yn));
}

Var hinge_loss(Graph& g, Var similarities, const LossConfig& config) {
  config.validate();
  const Tensor& s = g.value(similarities);
  if (s.rank() != 2 || s.dim(0) != s.dim(1)) {
    throw DimensionError("hinge_loss: expected square similarity matrix, got " +
                         shape_str(s.shape()));
  }
  const std::size_t b = s.dim(0);
  const double alpha = config.margin;
  const std::size_t n_terms = 2 * b * (b - 1);
  const double term_scale =
      config.reduction == Reduction::sum || n_terms == 0 ? 1.0 : 1.0 / static_cast<double>(n_terms);

  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      const double row_term = s.at(i, j) - s.at(i, i) + alpha;
      const double col_term = s.at(j, i) - s.at(i, i) + alpha;
      if (row_term > 0.0) loss += row_term;
      if (col_term > 0.0) loss += col_term;
    }
  }
  loss *= term_scale;

  return g.push_node(
      "hinge_loss", Tensor::scalar(loss), {similarities},
      [similarities, b, alpha, term_scale](Graph& gg, const Tensor& go) {
        const Tensor& sv = gg.value(similarities);
        Tensor& ds = gg.grad_buffer(similarities);
        const double upstream = go[0] * term_scale;
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < b; ++j) {
            if (i == j) continue;
            if (sv.at(i, j) - sv.at(i, i) + alpha > 0.0) {
              ds.at(i, j) += upstream;
              ds.at(i, i) -= upstream;
            }
            if (sv.at(j, i) - sv.at(i, i) + alpha > 0.0) {
              ds.at(j, i) += upstream;
              ds.at(i, i) -= upstream;
            }
          }
        }
      });
}

}  // namespace capembed::objective
