#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "d2c/numcore/autodiff.hpp"

// Differentiable tensor ops. Each op computes its forward value eagerly and
// records an explicit backward rule on the tape.
namespace d2c::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
// a * s where s holds a single element.
Var scale_by(const Var& a, const Var& s);
// x (m×n) + b (n), broadcast over rows.
Var add_bias(const Var& x, const Var& b);

Var matmul(const Var& a, const Var& b);
// a (m×k) · bᵀ where b is (n×k).
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

Var tanh(const Var& a);
Var gelu(const Var& a);

// Row-wise layer normalization with affine gamma/beta of length n.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Row-wise softmax of x/tau. `allowed`, when non-empty, has one flag per
// entry; disallowed entries get probability 0. Every row needs at least one
// allowed entry.
Var softmax_rows(const Var& x, double tau = 1.0, std::span<const unsigned char> allowed = {});

// Softmax over a whole vector at temperature tau.
Var softmax_temp(const Var& logits, double tau);

Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

// Embedding lookup: rows of table (V×D) selected by ids.
Var gather_rows(const Var& table, std::span<const int> ids);

// Mean over rows of an r×D matrix, giving a length-D vector.
Var mean_rows(const Var& x);
// Repeat a length-D vector into an n×D matrix.
Var broadcast_rows(const Var& v, std::size_t n);

Var sum(const Var& x);
// sum(x ⊙ w) for a constant weight tensor of the same size.
Var weighted_sum(const Var& x, const Tensor& w);
// Pack single-element vars into one vector.
Var stack(const std::vector<Var>& scalars);

// Cosine similarity of two equal-length vectors. Throws
// DegenerateInputError when either norm is at most 1e-12.
Var cosine_sim(const Var& a, const Var& b);

// D_KL(p || q) with the 0·ln 0 = 0 convention.
Var kl_div(const Var& p, const Var& q);

// Mean over positions with mask[i] set of -ln softmax(logits[i])[targets[i]].
Var nll_loss(const Var& logits, std::span<const int> targets, std::span<const unsigned char> mask);

} // namespace d2c::ops
