#include "evo/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "evo/errors.hpp"
#include "evo/rng.hpp"

namespace evo::sim {

using nlohmann::json;
using curriculum::ActionSpace;
using curriculum::ControllerState;
using curriculum::DecisionSource;

namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kAugStream = 0xA06;
constexpr std::uint64_t kQueryNegStream = 0x9E6;
constexpr std::uint64_t kInitStream = 0x1A17;

}  // namespace

std::string_view mode_name(ControllerMode m) {
    switch (m) {
        case ControllerMode::Oracle: return "oracle";
        case ControllerMode::Llm: return "llm";
        case ControllerMode::Mock: return "mock";
        case ControllerMode::FixedWindow: return "fixed-window";
        case ControllerMode::Linear: return "linear";
    }
    return "oracle";
}

std::optional<ControllerMode> mode_from_name(std::string_view name) {
    for (auto m : {ControllerMode::Oracle, ControllerMode::Llm, ControllerMode::Mock, ControllerMode::FixedWindow,
                   ControllerMode::Linear})
        if (mode_name(m) == name) return m;
    return std::nullopt;
}

void TrainConfig::validate() const {
    loss.validate();
    phases.validate();
    require(warmup_tau > 0.0, ErrorKind::Usage, "warmup_tau must be positive");
    require(lr >= 0.0 && warmup_lr >= 0.0, ErrorKind::Usage, "learning rates must be non-negative");
    require(batch_size >= 1, ErrorKind::Usage, "batch size must be at least 1");
    require(steps >= 0, ErrorKind::Usage, "steps must be non-negative");
    require(d_out >= 1, ErrorKind::Usage, "d_out must be positive");
    require(aug_noise >= 0.0, ErrorKind::Usage, "aug_noise must be non-negative");
    require(eval_every >= 0, ErrorKind::Usage, "eval_every must be non-negative");
    require(0.0 <= fixed_low && fixed_low < fixed_high && fixed_high <= 1.0, ErrorKind::Usage,
            "fixed window must satisfy 0 <= low < high <= 1");
    require(initial_action < action_space().size(), ErrorKind::Usage, "initial action outside the action space");
    if (mode == ControllerMode::Llm || mode == ControllerMode::Mock)
        require(endpoint.has_value() && endpoint->transport != nullptr, ErrorKind::Usage,
                fmt::format("controller mode '{}' needs an endpoint", mode_name(mode)));
}

curriculum::ActionSpace TrainConfig::action_space() const {
    return actions ? *actions : curriculum::default_action_space();
}

std::int64_t TrainConfig::total_steps() const {
    if (steps > 0) return steps;
    return phases.exploration_steps + phases.transition_steps + phases.lockin_review_every;
}

std::size_t TrainConfig::effective_pool_size(std::size_t corpus_size) const {
    const std::size_t cap = corpus_size > 0 ? corpus_size - 1 : 0;
    return pool_size > 0 ? std::min(pool_size, cap) : std::min(mining::kDefaultPoolSize, cap);
}

TokenMatrix augment(const TokenMatrix& raw, std::uint32_t seed, double noise) {
    Rng rng(seed);
    const std::size_t drop = raw.rows() > 1 ? rng.below(static_cast<std::uint32_t>(raw.rows())) : raw.rows();
    TokenMatrix out;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        if (r == drop) continue;
        auto src = raw.row(r);
        std::vector<double> tok(src.begin(), src.end());
        if (noise > 0.0)
            for (double& x : tok) x += noise * rng.normal();
        out.push_row(tok);
    }
    return out;
}

std::unordered_map<std::string, std::size_t> index_corpus(const SyntheticDataset& ds) {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < ds.corpus.size(); ++i)
        require(idx.emplace(ds.corpus[i].id, i).second, ErrorKind::Data, "duplicate document id " + ds.corpus[i].id);
    return idx;
}

namespace {

struct PairRaw {
    const TokenMatrix* query = nullptr;
    const TokenMatrix* doc = nullptr;
    TokenMatrix doc_aug;
    std::vector<const TokenMatrix*> negs;
    std::vector<TokenMatrix> negs_aug;
    std::vector<const TokenMatrix*> neg_queries;
};

PairRaw build_pair_raw(const SyntheticDataset& ds, const std::unordered_map<std::string, std::size_t>& doc_index,
                       const PairSpec& spec, double aug_noise) {
    require(spec.query < ds.queries.size(), ErrorKind::Data, "pair refers to an unknown query");
    const SyntheticQuery& q = ds.queries[spec.query];
    auto doc = [&](const std::string& id) -> const TokenMatrix& {
        auto it = doc_index.find(id);
        require(it != doc_index.end(), ErrorKind::Data, "unknown document id " + id);
        return ds.corpus[it->second].tokens;
    };
    PairRaw raw;
    raw.query = &q.raw;
    raw.doc = &doc(q.pos_doc_id);
    raw.doc_aug = augment(*raw.doc, derive_seed(spec.aug_seed, 0), aug_noise);
    for (std::size_t k = 0; k < spec.neg_doc_ids.size(); ++k) {
        raw.negs.push_back(&doc(spec.neg_doc_ids[k]));
        raw.negs_aug.push_back(augment(*raw.negs.back(), derive_seed(spec.aug_seed, k + 1), aug_noise));
    }
    for (std::size_t i : spec.neg_query_idx) {
        require(i < q.negative_variants.size(), ErrorKind::Data, "negative query index out of range");
        raw.neg_queries.push_back(&q.negative_variants[i]);
    }
    return raw;
}

loss::PairViews encode_views(const ToyEncoderParams& params, const PairRaw& raw) {
    loss::PairViews v;
    v.query = toy_encode(params, *raw.query);
    v.doc_ori = toy_encode(params, *raw.doc);
    v.doc_aug = toy_encode(params, raw.doc_aug);
    for (std::size_t k = 0; k < raw.negs.size(); ++k) {
        v.neg_docs_ori.push_back(toy_encode(params, *raw.negs[k]));
        v.neg_docs_aug.push_back(toy_encode(params, raw.negs_aug[k]));
    }
    for (const auto* nq : raw.neg_queries) v.neg_queries.push_back(toy_encode(params, *nq));
    return v;
}

void backprop_views(const ToyEncoderParams& params, const PairRaw& raw, const loss::PairViews& g,
                    std::vector<double>& grad) {
    toy_encode_backward(params, *raw.query, g.query, grad);
    toy_encode_backward(params, *raw.doc, g.doc_ori, grad);
    toy_encode_backward(params, raw.doc_aug, g.doc_aug, grad);
    for (std::size_t k = 0; k < raw.negs.size(); ++k) {
        toy_encode_backward(params, *raw.negs[k], g.neg_docs_ori[k], grad);
        toy_encode_backward(params, raw.negs_aug[k], g.neg_docs_aug[k], grad);
    }
    for (std::size_t k = 0; k < raw.neg_queries.size(); ++k)
        toy_encode_backward(params, *raw.neg_queries[k], g.neg_queries[k], grad);
}

LossBreakdown& accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
    acc.forward_orig += w * x.forward_orig;
    acc.forward_aug += w * x.forward_aug;
    acc.backward_orig += w * x.backward_orig;
    acc.backward_aug += w * x.backward_aug;
    acc.total += w * x.total;
    return acc;
}

}  // namespace

loss::PairViews build_pair_views(const ToyEncoderParams& params, const SyntheticDataset& ds,
                                 const std::unordered_map<std::string, std::size_t>& doc_index,
                                 const PairSpec& spec, double aug_noise) {
    return encode_views(params, build_pair_raw(ds, doc_index, spec, aug_noise));
}

StepOutcome compute_step(const ToyEncoderParams& params, const SyntheticDataset& ds,
                         const std::unordered_map<std::string, std::size_t>& doc_index,
                         const std::vector<PairSpec>& batch, const loss::LossConfig& cfg, double aug_noise) {
    require(!batch.empty(), ErrorKind::Usage, "empty batch");
    StepOutcome out;
    out.grad.assign(params.projection.size(), 0.0);
    const double w = 1.0 / static_cast<double>(batch.size());
    std::vector<double> pair_grad(params.projection.size());
    for (const auto& spec : batch) {
        const PairRaw raw = build_pair_raw(ds, doc_index, spec, aug_noise);
        const loss::PairGrad pg = loss::evaluate_pair_with_grad(encode_views(params, raw), cfg);
        accumulate(out.loss, pg.loss, w);
        std::fill(pair_grad.begin(), pair_grad.end(), 0.0);
        backprop_views(params, raw, pg.grad, pair_grad);
        for (std::size_t i = 0; i < pair_grad.size(); ++i) out.grad[i] += w * pair_grad[i];
    }
    return out;
}

LossBreakdown train_step(ToyEncoderParams& params, const SyntheticDataset& ds,
                         const std::unordered_map<std::string, std::size_t>& doc_index,
                         const std::vector<PairSpec>& batch, const loss::LossConfig& cfg, double aug_noise,
                         double lr) {
    StepOutcome o = compute_step(params, ds, doc_index, batch, cfg, aug_noise);
    if (lr != 0.0)
        for (std::size_t i = 0; i < params.projection.size(); ++i) params.projection[i] -= lr * o.grad[i];
    return o.loss;
}

double infonce_batch(const ToyEncoderParams& params, const SyntheticDataset& ds,
                     const std::unordered_map<std::string, std::size_t>& doc_index,
                     const std::vector<std::size_t>& queries, double tau, std::vector<double>* grad) {
    require(!queries.empty(), ErrorKind::Usage, "empty batch");
    const std::size_t b = queries.size();
    std::vector<TokenMatrix> qs, ds_enc;
    std::vector<const TokenMatrix*> doc_raw;
    for (std::size_t i : queries) {
        const auto& q = ds.queries.at(i);
        auto it = doc_index.find(q.pos_doc_id);
        require(it != doc_index.end(), ErrorKind::Data, "unknown document id " + q.pos_doc_id);
        doc_raw.push_back(&ds.corpus[it->second].tokens);
        qs.push_back(toy_encode(params, q.raw));
        ds_enc.push_back(toy_encode(params, *doc_raw.back()));
    }
    std::vector<std::vector<double>> sim(b, std::vector<double>(b));
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) sim[i][j] = scoring::maxsim(qs[i], ds_enc[j]);
    const double value = loss::infonce_inbatch(sim, tau);
    if (grad) {
        const auto g = loss::infonce_inbatch_grad(sim, tau);
        std::vector<TokenMatrix> gq, gd;
        for (std::size_t i = 0; i < b; ++i) {
            gq.emplace_back(qs[i].rows(), qs[i].dim());
            gd.emplace_back(ds_enc[i].rows(), ds_enc[i].dim());
        }
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j) {
                if (g[i][j] == 0.0) continue;
                const auto mg = scoring::maxsim_backward(qs[i], ds_enc[j], g[i][j]);
                for (std::size_t t = 0; t < mg.query.values().size(); ++t) gq[i].values()[t] += mg.query.values()[t];
                for (std::size_t t = 0; t < mg.doc.values().size(); ++t) gd[j].values()[t] += mg.doc.values()[t];
            }
        for (std::size_t i = 0; i < b; ++i) {
            toy_encode_backward(params, ds.queries[queries[i]].raw, gq[i], *grad);
            toy_encode_backward(params, *doc_raw[i], gd[i], *grad);
        }
    }
    return value;
}

namespace {

std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& items, std::uint32_t seed, std::size_t epoch) {
    std::vector<std::size_t> order = items;
    Rng rng(derive_seed(seed, kBatchStream, epoch));
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        std::swap(order[i], order[i + rng.below(static_cast<std::uint32_t>(order.size() - i))]);
    return order;
}

}  // namespace

std::vector<double> run_warmup(ToyEncoderParams& params, const SyntheticDataset& ds, const TrainConfig& cfg) {
    const auto doc_index = index_corpus(ds);
    const auto train = ds.split(false);
    require(!train.empty(), ErrorKind::Data, "training split is empty");
    std::vector<double> losses;
    std::vector<double> grad(params.projection.size());
    for (std::size_t epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
        const auto order = epoch_order(train, derive_seed(cfg.seed, 1), epoch);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(
                                                                     std::min(order.size(), start + cfg.batch_size)));
            if (batch.size() < 2) continue;  // a single pair has no in-batch negative
            std::fill(grad.begin(), grad.end(), 0.0);
            losses.push_back(infonce_batch(params, ds, doc_index, batch, cfg.warmup_tau, &grad));
            for (std::size_t i = 0; i < grad.size(); ++i) params.projection[i] -= cfg.warmup_lr * grad[i];
        }
    }
    return losses;
}

std::vector<mining::CandidatePool> mine_pools(const ToyEncoderParams& params, const SyntheticDataset& ds,
                                              std::size_t n, unsigned threads) {
    std::vector<scoring::TokenRecord> corpus;
    corpus.reserve(ds.corpus.size());
    for (const auto& rec : ds.corpus) corpus.push_back({rec.id, toy_encode(params, rec.tokens)});
    std::vector<mining::QueryInput> queries;
    for (std::size_t i : ds.split(false))
        queries.push_back({ds.queries[i].id, toy_encode(params, ds.queries[i].raw), ds.queries[i].pos_doc_id});
    return mining::build_candidate_pool(queries, corpus, n, threads);
}

double evaluate_ndcg(const ToyEncoderParams& params, const SyntheticDataset& ds, std::size_t k) {
    const auto heldout = ds.split(true);
    if (heldout.empty()) return 0.0;
    std::vector<TokenMatrix> docs;
    docs.reserve(ds.corpus.size());
    for (const auto& rec : ds.corpus) docs.push_back(toy_encode(params, rec.tokens));
    double sum = 0.0;
    for (std::size_t qi : heldout) {
        const auto q = toy_encode(params, ds.queries[qi].raw);
        std::vector<scoring::RankedItem> items;
        items.reserve(docs.size());
        for (std::size_t d = 0; d < docs.size(); ++d) items.push_back({ds.corpus[d].id, scoring::maxsim(q, docs[d])});
        sum += scoring::ndcg_at_k(scoring::RankedList::from_scores(std::move(items)), {ds.queries[qi].pos_doc_id}, k);
    }
    return sum / static_cast<double>(heldout.size());
}

namespace {

std::vector<std::size_t> argmax_signature(const loss::PairViews& v) {
    std::vector<std::size_t> sig;
    auto add = [&](const TokenMatrix& a, const TokenMatrix& b) {
        const auto am = scoring::maxsim_argmax(a, b);
        sig.insert(sig.end(), am.begin(), am.end());
    };
    add(v.query, v.doc_ori);
    add(v.query, v.doc_aug);
    for (std::size_t k = 0; k < v.neg_docs_ori.size(); ++k) {
        add(v.query, v.neg_docs_ori[k]);
        add(v.query, v.neg_docs_aug[k]);
    }
    add(v.doc_ori, v.query);
    add(v.doc_aug, v.query);
    for (const auto& nq : v.neg_queries) {
        add(v.doc_ori, nq);
        add(v.doc_aug, nq);
    }
    return sig;
}

}  // namespace

FdReport fd_gradient_check(const ToyEncoderParams& params, const SyntheticDataset& ds, const PairSpec& pair,
                           const loss::LossConfig& cfg, double aug_noise, double epsilon) {
    require(epsilon > 0.0, ErrorKind::Usage, "epsilon must be positive");
    const auto doc_index = index_corpus(ds);
    const PairRaw raw = build_pair_raw(ds, doc_index, pair, aug_noise);
    const loss::PairViews base = encode_views(params, raw);
    std::vector<double> analytic(params.projection.size(), 0.0);
    backprop_views(params, raw, loss::evaluate_pair_with_grad(base, cfg).grad, analytic);

    FdReport report;
    ToyEncoderParams probe = params;
    for (std::size_t i = 0; i < probe.projection.size(); ++i) {
        const double orig = probe.projection[i];
        probe.projection[i] = orig + epsilon;
        const auto plus = encode_views(probe, raw);
        probe.projection[i] = orig - epsilon;
        const auto minus = encode_views(probe, raw);
        probe.projection[i] = orig;
        if (argmax_signature(plus) != argmax_signature(minus)) {
            ++report.skipped;
            continue;
        }
        const double numeric =
            (loss::evaluate_pair(plus, cfg).total - loss::evaluate_pair(minus, cfg).total) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic[i] - numeric) / denom);
        ++report.checked;
    }
    return report;
}

bool StepRecord::operator==(const StepRecord& o) const {
    auto same = [](const LossBreakdown& a, const LossBreakdown& b) {
        return a.forward_orig == b.forward_orig && a.forward_aug == b.forward_aug &&
               a.backward_orig == b.backward_orig && a.backward_aug == b.backward_aug && a.total == b.total;
    };
    return step == o.step && phase == o.phase && action == o.action && low == o.low && high == o.high &&
           same(loss, o.loss) && pairs == o.pairs && fallback == o.fallback;
}

bool TrajectoryLog::calibration_failure() const {
    return std::any_of(decisions.begin(), decisions.end(), [](const auto& d) { return d.calibration_failure; });
}

namespace {

std::string letter(ActionId id) { return std::string(1, curriculum::action_letter(id)); }

ActionId parse_letter(const json& j) {
    const auto s = j.get<std::string>();
    if (s.size() != 1 || s[0] < 'A' || s[0] > 'Z') fail(ErrorKind::Parse, "bad action letter '" + s + "'");
    return static_cast<ActionId>(s[0] - 'A');
}

Phase parse_phase(const json& j) {
    const auto p = curriculum::phase_from_name(j.get<std::string>());
    if (!p) fail(ErrorKind::Parse, "unknown phase '" + j.get<std::string>() + "'");
    return *p;
}

json decision_json(const DecisionRecord& r) {
    json j;
    j["step"] = r.step;
    j["phase"] = curriculum::phase_name(r.phase);
    j["action"] = letter(r.action);
    j["avg_loss"] = r.avg_loss;
    j["l_start"] = r.l_start;
    j["l_end"] = r.l_end;
    j["source"] = r.source == DecisionSource::LLM ? "llm" : "oracle";
    j["calibration_failure"] = r.calibration_failure;
    j["rationale"] = r.rationale;
    if (r.current) j["current"] = letter(*r.current);
    if (r.recent) {
        j["recent"] = json::array();
        for (ActionId a : *r.recent) j["recent"].push_back(letter(a));
    }
    if (r.low_loss_streak) j["low_loss_streak"] = *r.low_loss_streak;
    return j;
}

DecisionRecord decision_from_json(const json& j) {
    DecisionRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.phase = parse_phase(j.at("phase"));
    r.action = parse_letter(j.at("action"));
    r.avg_loss = j.at("avg_loss").get<double>();
    r.l_start = j.at("l_start").get<double>();
    r.l_end = j.at("l_end").get<double>();
    const auto src = j.at("source").get<std::string>();
    if (src != "oracle" && src != "llm") fail(ErrorKind::Parse, "unknown source '" + src + "'");
    r.source = src == "llm" ? DecisionSource::LLM : DecisionSource::Oracle;
    r.calibration_failure = j.at("calibration_failure").get<bool>();
    r.rationale = j.at("rationale").get<std::string>();
    if (j.contains("current")) r.current = parse_letter(j.at("current"));
    if (j.contains("recent")) {
        std::vector<ActionId> recent;
        for (const auto& a : j.at("recent")) recent.push_back(parse_letter(a));
        r.recent = std::move(recent);
    }
    if (j.contains("low_loss_streak")) r.low_loss_streak = j.at("low_loss_streak").get<int>();
    return r;
}

json loss_json(const LossBreakdown& l) {
    return {{"forward_orig", l.forward_orig},
            {"forward_aug", l.forward_aug},
            {"backward_orig", l.backward_orig},
            {"backward_aug", l.backward_aug},
            {"total", l.total}};
}

LossBreakdown loss_from_json(const json& j) {
    return {j.at("forward_orig").get<double>(), j.at("forward_aug").get<double>(),
            j.at("backward_orig").get<double>(), j.at("backward_aug").get<double>(), j.at("total").get<double>()};
}

json step_json(const StepRecord& r) {
    json j;
    j["type"] = "step";
    j["step"] = r.step;
    j["phase"] = curriculum::phase_name(r.phase);
    j["action"] = letter(r.action);
    j["low"] = r.low;
    j["high"] = r.high;
    j["loss"] = loss_json(r.loss);
    j["pairs"] = json::array();
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
        const auto& p = r.pairs[i];
        j["pairs"].push_back({{"query", p.query},
                              {"neg_doc_ids", p.neg_doc_ids},
                              {"neg_query_idx", p.neg_query_idx},
                              {"aug_seed", p.aug_seed},
                              {"fallback", i < r.fallback.size() && r.fallback[i]}});
    }
    return j;
}

StepRecord step_from_json(const json& j) {
    StepRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.phase = parse_phase(j.at("phase"));
    r.action = parse_letter(j.at("action"));
    r.low = j.at("low").get<double>();
    r.high = j.at("high").get<double>();
    r.loss = loss_from_json(j.at("loss"));
    for (const auto& p : j.at("pairs")) {
        PairSpec s;
        s.query = p.at("query").get<std::size_t>();
        s.neg_doc_ids = p.at("neg_doc_ids").get<std::vector<std::string>>();
        s.neg_query_idx = p.at("neg_query_idx").get<std::vector<std::size_t>>();
        s.aug_seed = p.at("aug_seed").get<std::uint32_t>();
        r.pairs.push_back(std::move(s));
        r.fallback.push_back(p.at("fallback").get<bool>());
    }
    return r;
}

template <class F>
void for_each_json_line(std::string_view text, F&& f) {
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == text.size()) break;
            continue;
        }
        try {
            f(json::parse(line));
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, fmt::format("line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            fail(ErrorKind::Parse, fmt::format("line {}: {}", line_no, e.what()));
        }
        if (end == text.size()) break;
    }
}

}  // namespace

std::string decision_to_jsonl(const DecisionRecord& rec) { return decision_json(rec).dump(); }

DecisionRecord decision_from_json_text(std::string_view line) {
    try {
        return decision_from_json(json::parse(line));
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, e.what());
    }
}

std::vector<DecisionRecord> parse_decision_log(std::string_view text) {
    std::vector<DecisionRecord> out;
    for_each_json_line(text, [&](const json& j) {
        if (!j.is_object()) fail(ErrorKind::Parse, "record is not an object");
        if (j.contains("type") && j.at("type") != "decision") return;
        out.push_back(decision_from_json(j));
    });
    return out;
}

std::string TrajectoryLog::to_jsonl() const {
    std::string out;
    auto emit = [&](const json& j) {
        out += j.dump();
        out += '\n';
    };
    for (const auto& w : warmup) emit({{"type", "warmup"}, {"batch", w.batch}, {"loss", w.loss}});
    std::size_t di = 0, ei = 0;
    auto flush_until = [&](std::int64_t step) {
        for (; di < decisions.size() && decisions[di].step <= step; ++di) {
            json j = decision_json(decisions[di]);
            j["type"] = "decision";
            emit(j);
        }
        for (; ei < evals.size() && evals[ei].step <= step; ++ei)
            emit({{"type", "eval"}, {"step", evals[ei].step}, {"ndcg_at_5", evals[ei].ndcg_at_5}});
    };
    flush_until(0);
    for (const auto& s : steps) {
        emit(step_json(s));
        flush_until(s.step + 1);
    }
    flush_until(std::numeric_limits<std::int64_t>::max());
    return out;
}

TrajectoryLog TrajectoryLog::from_jsonl(std::string_view text) {
    TrajectoryLog log;
    for_each_json_line(text, [&](const json& j) {
        if (!j.is_object() || !j.contains("type")) fail(ErrorKind::Parse, "record without a type");
        const auto type = j.at("type").get<std::string>();
        if (type == "warmup") {
            log.warmup.push_back({j.at("batch").get<std::size_t>(), j.at("loss").get<double>()});
        } else if (type == "step") {
            auto rec = step_from_json(j);
            if (!log.steps.empty() && rec.step != log.steps.back().step + 1)
                fail(ErrorKind::Parse, fmt::format("step {} does not follow step {}", rec.step, log.steps.back().step));
            log.steps.push_back(std::move(rec));
        } else if (type == "decision") {
            log.decisions.push_back(decision_from_json(j));
        } else if (type == "eval") {
            log.evals.push_back({j.at("step").get<std::int64_t>(), j.at("ndcg_at_5").get<double>()});
        } else {
            fail(ErrorKind::Parse, "unknown record type '" + type + "'");
        }
    });
    return log;
}

ReplayReport replay_decisions(const std::vector<DecisionRecord>& log, const ActionSpace& space,
                              const curriculum::PhaseConfig& phases, ActionId initial_action) {
    ReplayReport report;
    report.entries = log.size();
    std::vector<curriculum::HistoryEntry> history;
    std::int64_t adopted_at = 0;
    ActionId reconstructed = initial_action;
    int streak = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const DecisionRecord& e = log[i];
        const ActionId current = e.current.value_or(reconstructed);

        ControllerState state;
        state.phase = e.phase;
        state.current_action = current;
        state.history = history;
        state.step = adopted_at;
        state.consecutive_low_loss_reviews = e.low_loss_streak.value_or(streak);
        state.phase_config = phases;

        curriculum::StateReport r;
        r.phase = e.phase;
        r.step = e.step;
        r.current_action = current;
        if (current < space.size()) {
            r.current_low = space.at(current).low;
            r.current_high = space.at(current).high;
        }
        r.hard_negative_loss_mean = e.avg_loss;
        r.l_start = e.l_start;
        r.l_end = e.l_end;
        if (e.recent) {
            for (ActionId a : *e.recent) r.recent.push_back({0, a});
        } else {
            r.recent.push_back({adopted_at, current});
            for (auto it = history.rbegin();
                 it != history.rend() && r.recent.size() < curriculum::ProtocolRules::kRecentWindow; ++it)
                r.recent.push_back({it->step, it->action});
        }
        r.consecutive_low_loss_reviews = state.consecutive_low_loss_reviews;
        r.history = history;

        const auto expected = curriculum::oracle_decide(state, r, space).next_action;
        if (expected != e.action) {
            ReplayDivergence d{i, e.step, e.action, expected, e.source == DecisionSource::LLM};
            (d.from_llm ? report.llm_flags : report.divergences).push_back(d);
        }

        history.push_back({adopted_at, current, e.avg_loss});
        streak = e.avg_loss < curriculum::ProtocolRules::kLowLoss ? state.consecutive_low_loss_reviews + 1 : 0;
        adopted_at = e.step;
        reconstructed = e.action;
    }
    return report;
}

TrainingResult run_curriculum(const SyntheticDataset& ds, ToyEncoderParams params,
                              const std::vector<mining::CandidatePool>& pools, const TrainConfig& cfg,
                              const StepObserver& observer) {
    cfg.validate();
    const ActionSpace space = cfg.action_space();
    const auto doc_index = index_corpus(ds);
    const auto train = ds.split(false);
    require(!train.empty(), ErrorKind::Data, "training split is empty");

    std::unordered_map<std::string, const mining::CandidatePool*> pool_of;
    for (const auto& p : pools) pool_of[p.query_id] = &p;
    for (std::size_t i : train)
        require(pool_of.count(ds.queries[i].id) == 1, ErrorKind::Data, "no candidate pool for " + ds.queries[i].id);

    const bool controlled = cfg.mode == ControllerMode::Oracle || cfg.mode == ControllerMode::Llm ||
                            cfg.mode == ControllerMode::Mock;
    const std::optional<control::LlmEndpoint> endpoint =
        cfg.mode == ControllerMode::Llm || cfg.mode == ControllerMode::Mock ? cfg.endpoint : std::nullopt;

    TrainingResult result;
    ControllerState& state = result.state;
    state.phase_config = cfg.phases;
    state.current_action = cfg.initial_action;
    state.phase = cfg.phases.phase_for_step(0);

    result.post_warmup_ndcg = evaluate_ndcg(params, ds);
    result.log.evals.push_back({0, result.post_warmup_ndcg});

    const std::int64_t total = cfg.total_steps();
    const std::size_t per_epoch = train.size();
    std::vector<std::size_t> order;
    std::size_t order_epoch = static_cast<std::size_t>(-1);
    std::vector<double> window;

    for (std::int64_t s = 0; s < total; ++s) {
        StepRecord rec;
        rec.step = s;
        rec.phase = cfg.phases.phase_for_step(s);
        curriculum::DifficultyInterval interval;
        switch (cfg.mode) {
            case ControllerMode::FixedWindow:
                interval = {0, cfg.fixed_low, cfg.fixed_high, curriculum::Zone::EffectiveLearning};
                break;
            case ControllerMode::Linear:
                interval = space.at(curriculum::linear_action(s, total, space.size()));
                break;
            default: interval = space.at(state.current_action); break;
        }
        rec.action = interval.action_id;
        rec.low = interval.low;
        rec.high = interval.high;

        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const std::size_t flat = static_cast<std::size_t>(s) * cfg.batch_size + b;
            const std::size_t epoch = flat / per_epoch;
            if (epoch != order_epoch) {
                order = epoch_order(train, cfg.seed, epoch);
                order_epoch = epoch;
            }
            PairSpec spec;
            spec.query = order[flat % per_epoch];
            const SyntheticQuery& q = ds.queries[spec.query];
            const auto sel = mining::select_negatives(*pool_of.at(q.id), interval, cfg.loss.k);
            spec.neg_doc_ids = sel.doc_ids;
            if (cfg.neg_queries > 0 && !q.negative_variants.empty())
                spec.neg_query_idx = mining::select_negative_queries(
                    q.negative_variants.size(), cfg.neg_queries,
                    derive_seed(cfg.seed, kQueryNegStream, flat));
            spec.aug_seed = derive_seed(cfg.seed, kAugStream, flat);
            rec.pairs.push_back(std::move(spec));
            rec.fallback.push_back(sel.fallback);
        }

        if (observer) {
            const ToyEncoderParams before = params;
            rec.loss = train_step(params, ds, doc_index, rec.pairs, cfg.loss, cfg.aug_noise, cfg.lr);
            observer(rec, before);
        } else {
            rec.loss = train_step(params, ds, doc_index, rec.pairs, cfg.loss, cfg.aug_noise, cfg.lr);
        }
        window.push_back(rec.loss.total);
        result.log.steps.push_back(std::move(rec));

        const std::int64_t done = s + 1;
        if (controlled && cfg.phases.is_review_step(done)) {
            state.phase = cfg.phases.phase_for_step(done);
            const auto report = control::summarize_state(state, window, space);
            const auto decision = control::decide_with_fallback(state, report, space, endpoint);
            DecisionRecord d;
            d.step = done;
            d.phase = state.phase;
            d.action = decision.next_action;
            d.avg_loss = report.hard_negative_loss_mean;
            d.l_start = report.l_start;
            d.l_end = report.l_end;
            d.source = decision.source;
            d.calibration_failure = decision.calibration_failure;
            d.rationale = decision.rationale;
            d.current = state.current_action;
            d.recent = report.recent_actions();
            d.low_loss_streak = state.consecutive_low_loss_reviews;
            if (d.calibration_failure) spdlog::warn("calibration failure at step {}", done);
            result.log.decisions.push_back(std::move(d));
            state = curriculum::advance(state, decision, report);
            window.clear();
        }
        if (cfg.eval_every > 0 && (done % cfg.eval_every == 0 || done == total)) {
            result.log.evals.push_back({done, evaluate_ndcg(params, ds)});
        }
    }
    if (result.log.evals.back().step != total) result.log.evals.push_back({total, evaluate_ndcg(params, ds)});
    result.final_ndcg = result.log.evals.back().ndcg_at_5;
    result.params = std::move(params);
    return result;
}

TrainingResult run_training(const SyntheticDataset& ds, const TrainConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    require(!ds.corpus.empty(), ErrorKind::Data, "empty corpus");
    ToyEncoderParams params = ToyEncoderParams::random(ds.d_in(), cfg.d_out, derive_seed(cfg.seed, kInitStream));
    const auto warm = run_warmup(params, ds, cfg);
    const auto pools = mine_pools(params, ds, cfg.effective_pool_size(ds.corpus.size()), cfg.threads);
    TrainingResult result = run_curriculum(ds, std::move(params), pools, cfg, observer);
    for (std::size_t i = 0; i < warm.size(); ++i) result.log.warmup.push_back({i, warm[i]});
    return result;
}

}  // namespace evo::sim
