#include "evo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evo/errors.hpp"

namespace evo::loss {

using scoring::maxsim;
using scoring::maxsim_backward;

void LossConfig::validate() const {
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::Usage, "tau must be positive");
    require(alpha >= 0.0, ErrorKind::Usage, "alpha must be non-negative");
    require(beta >= 0.0, ErrorKind::Usage, "beta must be non-negative");
    require(k >= 1, ErrorKind::Usage, "K must be at least 1");
}

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check_margin_args(const std::vector<double>& s_negs, double tau) {
    require(!s_negs.empty(), ErrorKind::Usage, "margin loss needs at least one negative");
    require(tau > 0.0, ErrorKind::Usage, "tau must be positive");
}

}  // namespace

double margin_loss(double s_pos, const std::vector<double>& s_negs, double tau) {
    check_margin_args(s_negs, tau);
    double total = 0.0;
    for (double s : s_negs) total += softplus((s - s_pos) / tau);
    return total;
}

MarginGrad margin_loss_grad(double s_pos, const std::vector<double>& s_negs, double tau) {
    check_margin_args(s_negs, tau);
    MarginGrad g;
    g.d_negs.reserve(s_negs.size());
    for (double s : s_negs) g.d_negs.push_back(sigmoid((s - s_pos) / tau) / tau);
    g.d_pos = -std::accumulate(g.d_negs.begin(), g.d_negs.end(), 0.0);
    return g;
}

namespace {

double anchored_loss(const TokenMatrix& anchor, const TokenMatrix& pos, const std::vector<TokenMatrix>& negs,
                     double tau) {
    std::vector<double> s_negs;
    s_negs.reserve(negs.size());
    for (const auto& n : negs) s_negs.push_back(maxsim(anchor, n));
    return margin_loss(maxsim(anchor, pos), s_negs, tau);
}

void accumulate(TokenMatrix& dst, const TokenMatrix& src) {
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

/// Backpropagates weight * anchored_loss into the anchor, positive and negatives.
void anchored_backward(const TokenMatrix& anchor, const TokenMatrix& pos, const std::vector<TokenMatrix>& negs,
                       double tau, double weight, TokenMatrix& g_anchor, TokenMatrix& g_pos,
                       std::vector<TokenMatrix>& g_negs) {
    if (weight == 0.0) return;
    std::vector<double> s_negs;
    s_negs.reserve(negs.size());
    for (const auto& n : negs) s_negs.push_back(maxsim(anchor, n));
    const auto mg = margin_loss_grad(maxsim(anchor, pos), s_negs, tau);

    auto gp = maxsim_backward(anchor, pos, weight * mg.d_pos);
    accumulate(g_anchor, gp.query);
    accumulate(g_pos, gp.doc);
    for (std::size_t k = 0; k < negs.size(); ++k) {
        auto gn = maxsim_backward(anchor, negs[k], weight * mg.d_negs[k]);
        accumulate(g_anchor, gn.query);
        accumulate(g_negs[k], gn.doc);
    }
}

TokenMatrix zeros_like(const TokenMatrix& m) { return TokenMatrix(m.rows(), m.dim()); }

std::vector<TokenMatrix> zeros_like(const std::vector<TokenMatrix>& ms) {
    std::vector<TokenMatrix> out;
    out.reserve(ms.size());
    for (const auto& m : ms) out.push_back(zeros_like(m));
    return out;
}

}  // namespace

ViewPair forward_terms(const TokenMatrix& q, const TokenMatrix& d_ori, const TokenMatrix& d_aug,
                       const std::vector<TokenMatrix>& negs_ori, const std::vector<TokenMatrix>& negs_aug,
                       double tau) {
    require(negs_ori.size() == negs_aug.size(), ErrorKind::Usage,
            "original and augmented negative sets differ in size");
    return {anchored_loss(q, d_ori, negs_ori, tau), anchored_loss(q, d_aug, negs_aug, tau)};
}

double forward_loss(const TokenMatrix& q, const TokenMatrix& d_ori, const TokenMatrix& d_aug,
                    const std::vector<TokenMatrix>& negs_ori, const std::vector<TokenMatrix>& negs_aug,
                    const LossConfig& cfg) {
    cfg.validate();
    const auto t = forward_terms(q, d_ori, d_aug, negs_ori, negs_aug, cfg.tau);
    return t.orig + cfg.beta * t.aug;
}

ViewPair backward_terms(const TokenMatrix& d_ori, const TokenMatrix& d_aug, const TokenMatrix& q_pos,
                        const std::vector<TokenMatrix>& q_negs, double tau) {
    require(!q_negs.empty(), ErrorKind::Usage, "backward loss needs at least one negative query");
    return {anchored_loss(d_ori, q_pos, q_negs, tau), anchored_loss(d_aug, q_pos, q_negs, tau)};
}

double backward_loss(const TokenMatrix& d_ori, const TokenMatrix& d_aug, const TokenMatrix& q_pos,
                     const std::vector<TokenMatrix>& q_negs, const LossConfig& cfg) {
    cfg.validate();
    const auto t = backward_terms(d_ori, d_aug, q_pos, q_negs, cfg.tau);
    return t.orig + cfg.beta * t.aug;
}

LossBreakdown total_loss(double forward_orig, double forward_aug, double backward_orig, double backward_aug,
                         const LossConfig& cfg) {
    for (double v : {forward_orig, forward_aug, backward_orig, backward_aug})
        require(std::isfinite(v), ErrorKind::Numeric, "non-finite loss component");
    LossBreakdown b{forward_orig, forward_aug, backward_orig, backward_aug, 0.0};
    b.total = (forward_orig + cfg.beta * forward_aug) + cfg.alpha * (backward_orig + cfg.beta * backward_aug);
    return b;
}

namespace {

void check_square(const std::vector<std::vector<double>>& sim, double tau) {
    require(!sim.empty(), ErrorKind::Usage, "empty similarity matrix");
    for (const auto& row : sim)
        require(row.size() == sim.size(), ErrorKind::Usage, "similarity matrix is not square");
    require(tau > 0.0, ErrorKind::Usage, "tau must be positive");
}

double log_sum_exp(const std::vector<double>& row, double tau) {
    const double peak = *std::max_element(row.begin(), row.end()) / tau;
    double acc = 0.0;
    for (double s : row) acc += std::exp(s / tau - peak);
    return peak + std::log(acc);
}

}  // namespace

double infonce_inbatch(const std::vector<std::vector<double>>& sim, double tau) {
    check_square(sim, tau);
    double total = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) total += log_sum_exp(sim[i], tau) - sim[i][i] / tau;
    return total / static_cast<double>(sim.size());
}

std::vector<std::vector<double>> infonce_inbatch_grad(const std::vector<std::vector<double>>& sim, double tau) {
    check_square(sim, tau);
    const double b = static_cast<double>(sim.size());
    std::vector<std::vector<double>> g(sim.size(), std::vector<double>(sim.size(), 0.0));
    for (std::size_t i = 0; i < sim.size(); ++i) {
        const double lse = log_sum_exp(sim[i], tau);
        for (std::size_t j = 0; j < sim.size(); ++j) {
            const double p = std::exp(sim[i][j] / tau - lse);
            g[i][j] = (p - (i == j ? 1.0 : 0.0)) / (tau * b);
        }
    }
    return g;
}

LossBreakdown evaluate_pair(const PairViews& v, const LossConfig& cfg) {
    cfg.validate();
    const auto f = forward_terms(v.query, v.doc_ori, v.doc_aug, v.neg_docs_ori, v.neg_docs_aug, cfg.tau);
    const auto b = backward_terms(v.doc_ori, v.doc_aug, v.query, v.neg_queries, cfg.tau);
    return total_loss(f.orig, f.aug, b.orig, b.aug, cfg);
}

PairGrad evaluate_pair_with_grad(const PairViews& v, const LossConfig& cfg) {
    PairGrad out;
    out.loss = evaluate_pair(v, cfg);
    PairViews& g = out.grad;
    g.query = zeros_like(v.query);
    g.doc_ori = zeros_like(v.doc_ori);
    g.doc_aug = zeros_like(v.doc_aug);
    g.neg_docs_ori = zeros_like(v.neg_docs_ori);
    g.neg_docs_aug = zeros_like(v.neg_docs_aug);
    g.neg_queries = zeros_like(v.neg_queries);

    anchored_backward(v.query, v.doc_ori, v.neg_docs_ori, cfg.tau, 1.0, g.query, g.doc_ori, g.neg_docs_ori);
    anchored_backward(v.query, v.doc_aug, v.neg_docs_aug, cfg.tau, cfg.beta, g.query, g.doc_aug, g.neg_docs_aug);
    anchored_backward(v.doc_ori, v.query, v.neg_queries, cfg.tau, cfg.alpha, g.doc_ori, g.query, g.neg_queries);
    anchored_backward(v.doc_aug, v.query, v.neg_queries, cfg.tau, cfg.alpha * cfg.beta, g.doc_aug, g.query,
                      g.neg_queries);
    return out;
}

}  // namespace evo::loss
