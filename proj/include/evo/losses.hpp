#pragma once

#include <cstddef>
#include <vector>

#include "evo/scoring.hpp"

namespace evo::loss {

using scoring::TokenMatrix;

struct LossConfig {
    double tau = 0.02;   // temperature
    double alpha = 1.0;  // backward-path weight
    double beta = 1.0;   // augmented-view weight
    std::size_t k = 2;   // hard negatives per anchor

    /// Throws Usage when an invariant (tau > 0, alpha/beta >= 0, k >= 1) fails.
    void validate() const;
};

/// Unweighted loss terms plus the weighted total.
struct LossBreakdown {
    double forward_orig = 0.0;
    double forward_aug = 0.0;
    double backward_orig = 0.0;
    double backward_aug = 0.0;
    double total = 0.0;
};

/// log(1 + e^x), linear beyond x = 30.
double softplus(double x);
double sigmoid(double x);

/// Softplus margin loss: sum_k log(1 + exp((s_negs[k] - s_pos) / tau)).
double margin_loss(double s_pos, const std::vector<double>& s_negs, double tau);

struct MarginGrad {
    double d_pos = 0.0;
    std::vector<double> d_negs;
};

/// d_negs[k] = sigmoid((s_negs[k] - s_pos) / tau) / tau; d_pos = -sum(d_negs).
MarginGrad margin_loss_grad(double s_pos, const std::vector<double>& s_negs, double tau);

/// Query-anchored dual-view loss over document negatives. Returns the two
/// unweighted terms {original view, augmented view}.
struct ViewPair {
    double orig = 0.0;
    double aug = 0.0;
};

ViewPair forward_terms(const TokenMatrix& q, const TokenMatrix& d_ori, const TokenMatrix& d_aug,
                       const std::vector<TokenMatrix>& negs_ori, const std::vector<TokenMatrix>& negs_aug,
                       double tau);

/// orig + beta * aug of forward_terms.
double forward_loss(const TokenMatrix& q, const TokenMatrix& d_ori, const TokenMatrix& d_aug,
                    const std::vector<TokenMatrix>& negs_ori, const std::vector<TokenMatrix>& negs_aug,
                    const LossConfig& cfg);

/// Image-anchored loss over query negatives: the image is the outer-sum
/// side of maxsim in both views.
ViewPair backward_terms(const TokenMatrix& d_ori, const TokenMatrix& d_aug, const TokenMatrix& q_pos,
                        const std::vector<TokenMatrix>& q_negs, double tau);

double backward_loss(const TokenMatrix& d_ori, const TokenMatrix& d_aug, const TokenMatrix& q_pos,
                     const std::vector<TokenMatrix>& q_negs, const LossConfig& cfg);

/// Combines the four unweighted terms: (fo + beta*fa) + alpha*(bo + beta*ba).
/// Throws Numeric on non-finite input.
LossBreakdown total_loss(double forward_orig, double forward_aug, double backward_orig, double backward_aug,
                         const LossConfig& cfg);

/// Mean over rows of the in-batch InfoNCE loss; entry (i,i) is row i's positive.
double infonce_inbatch(const std::vector<std::vector<double>>& sim, double tau);

/// Gradient of infonce_inbatch with respect to every sim entry.
std::vector<std::vector<double>> infonce_inbatch_grad(const std::vector<std::vector<double>>& sim, double tau);

/// Every encoded matrix that takes part in one training pair.
struct PairViews {
    TokenMatrix query;
    TokenMatrix doc_ori;
    TokenMatrix doc_aug;
    std::vector<TokenMatrix> neg_docs_ori;
    std::vector<TokenMatrix> neg_docs_aug;
    std::vector<TokenMatrix> neg_queries;
};

/// Gradient of the total loss with respect to each matrix in PairViews.
struct PairGrad {
    LossBreakdown loss;
    PairViews grad;
};

LossBreakdown evaluate_pair(const PairViews& views, const LossConfig& cfg);
PairGrad evaluate_pair_with_grad(const PairViews& views, const LossConfig& cfg);

}  // namespace evo::loss
