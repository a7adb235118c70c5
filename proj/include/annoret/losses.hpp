#pragma once

// Candidate probability distribution and the contrastive losses over it.
//
// Given scores s, p_i = exp(s_i) / sum_j exp(s_j) (computed shift-stably).
// With positive set P:
//   SingleLH:  -log p_pos                 (exactly one positive)
//   JointLH:   -sum_{i in P} log p_i
//   SumMargLH: -log sum_{i in P} p_i
//   Rand1LH is SingleLH applied to a Pos-one-sampled instance; it is not a
//   separate kernel.
// The REPLUG objective is KL(U || R) between a utility distribution
// U = softmax(utilities) and the relevance distribution R = softmax(scores).
// All gradients are with respect to the raw scores.

#include <cstddef>
#include <string>
#include <vector>

namespace annoret {

enum class LossKind { SingleLH, Rand1LH, JointLH, SumMargLH, ReplugKL };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// Eq-1 softmax. Throws numeric_error naming the index of a non-finite score.
std::vector<double> candidate_distribution(const std::vector<double>& scores);

// log softmax (same stability policy), shared by the loss kernels.
std::vector<double> log_candidate_distribution(const std::vector<double>& scores);

// ---- values on probability vectors ----

double loss_single(const std::vector<double>& p, std::size_t pos);
double loss_joint(const std::vector<double>& p, const std::vector<std::size_t>& positives);
double loss_summarg(const std::vector<double>& p, const std::vector<std::size_t>& positives);

// ---- values + analytic gradients on score vectors ----

struct LossResult {
    double value = 0.0;
    std::vector<double> grad;  // d value / d scores
};

LossResult loss_grad_single(const std::vector<double>& scores, std::size_t pos);
LossResult loss_grad_joint(const std::vector<double>& scores,
                           const std::vector<std::size_t>& positives);
LossResult loss_grad_summarg(const std::vector<double>& scores,
                             const std::vector<std::size_t>& positives);

// KL(U||R) with the 0*log(0) := 0 convention; gradient w.r.t. scores is R-U.
LossResult loss_replug(const std::vector<double>& scores, const std::vector<double>& utilities);

// Dispatch for the likelihood losses (ReplugKL needs utilities, see above).
// SingleLH and Rand1LH both require exactly one positive.
LossResult loss_grad(LossKind kind, const std::vector<double>& scores,
                     const std::vector<std::size_t>& positives);

}  // namespace annoret
