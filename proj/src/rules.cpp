#include "dass/rules.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <set>

#include "dass/error.hpp"

namespace dass {

namespace {

double plogp(double count, double total) {
    if (count <= 0.0) return 0.0;
    const double p = count / total;
    return p * std::log2(p);
}

/// Packed patient set.
class Mask {
public:
    explicit Mask(std::size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}

    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    std::size_t count_and(const Mask& other) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
        return c;
    }
    Mask operator&(const Mask& other) const {
        Mask out(n_);
        for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] = words_[i] & other.words_[i];
        return out;
    }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    std::vector<std::uint64_t> words_;
};

RuleMetrics metrics_from_counts(std::size_t n, std::size_t positives, std::size_t predicted, std::size_t tp) {
    RuleMetrics m;
    m.predicted_positives = predicted;
    m.true_positives = tp;
    const std::size_t fp = predicted - tp;
    const std::size_t fn = positives - tp;
    const std::size_t tn = n - predicted - fn;
    m.info_gain = mutual_information(tn, fn, fp, tp);
    m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = positives > 0 ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

Mask split_mask(const RuleFeature& f, double threshold, Direction d) {
    Mask m(f.values.size());
    const Rule r{f.organ, f.key, threshold, d};
    for (std::size_t i = 0; i < f.values.size(); ++i)
        if (!std::isnan(f.values[i]) && r.satisfied(f.values[i])) m.set(i);
    return m;
}

Mask target_mask(std::span<const int> target) {
    Mask m(target.size());
    for (std::size_t i = 0; i < target.size(); ++i)
        if (target[i]) m.set(i);
    return m;
}

/// Total order used for every tie: organ, feature slot, threshold, direction.
bool split_less(const Rule& a, const Rule& b) {
    if (a.organ != b.organ) return a.organ < b.organ;
    if (a.key != b.key) return a.key < b.key;
    if (a.threshold != b.threshold) return a.threshold < b.threshold;
    return a.direction < b.direction;
}

void check_problem(const RuleProblem& problem) {
    const std::size_t n = problem.target.size();
    if (n == 0) throw ValidationError("target", "target is empty");
    for (int v : problem.target)
        if (v != 0 && v != 1) throw ValidationError("target", "target values must be 0 or 1");
    for (const auto& f : problem.features)
        if (f.values.size() != n)
            throw ValidationError("features", "feature " + f.organ + "__" + f.key.str() + " has " +
                                                  std::to_string(f.values.size()) + " values for " +
                                                  std::to_string(n) + " patients");
}

struct PoolSplit {
    ScoredSplit scored;
    Mask mask;
};

std::vector<PoolSplit> build_pool(const RuleProblem& problem, const MinerConfig& config) {
    const Mask y = target_mask(problem.target);
    const std::size_t n = problem.target.size();
    const std::size_t positives = y.count();
    std::vector<Direction> directions;
    if (config.direction != DirectionMode::lt) directions.push_back(Direction::geq);
    if (config.direction != DirectionMode::geq) directions.push_back(Direction::lt);

    std::vector<PoolSplit> pool;
    for (std::size_t fi = 0; fi < problem.features.size(); ++fi) {
        const auto& f = problem.features[fi];
        for (double t : candidate_thresholds(f.values, config)) {
            for (Direction d : directions) {
                Mask m = split_mask(f, t, d);
                const std::size_t support = m.count();
                if (support < static_cast<std::size_t>(config.min_support)) continue;
                const RuleMetrics rm = metrics_from_counts(n, positives, support, m.count_and(y));
                const double value = config.floor == RuleFloor::mutual_information ? rm.info_gain : rm.precision;
                if (value < config.min_rule_value) continue;
                pool.push_back({ScoredSplit{Rule{f.organ, f.key, t, d}, fi, rm.info_gain, rm.precision, support},
                                std::move(m)});
            }
        }
    }
    std::sort(pool.begin(), pool.end(),
              [](const PoolSplit& a, const PoolSplit& b) { return split_less(a.scored.rule, b.scored.rule); });
    return pool;
}

struct Node {
    std::vector<std::size_t> splits;  // ascending pool indices
    Mask mask;
    RuleMetrics metrics;
};

/// (info_gain desc, size asc, f1 desc, split indices lexicographic).
bool node_before(const Node& a, const Node& b) {
    if (a.metrics.info_gain != b.metrics.info_gain) return a.metrics.info_gain > b.metrics.info_gain;
    if (a.splits.size() != b.splits.size()) return a.splits.size() < b.splits.size();
    if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
    return a.splits < b.splits;
}

void keep_best(std::vector<Node>& nodes, std::size_t k) {
    std::sort(nodes.begin(), nodes.end(), node_before);
    nodes.erase(std::unique(nodes.begin(), nodes.end(),
                            [](const Node& a, const Node& b) { return a.splits == b.splits; }),
                nodes.end());
    if (nodes.size() > k) nodes.resize(k);
}

void beam_search(const std::vector<PoolSplit>& pool, Direction direction, const Mask& y, const MinerConfig& config,
                 Execution exec, std::vector<Node>& found) {
    const std::size_t n = y.size();
    const std::size_t positives = y.count();
    const auto k = static_cast<std::size_t>(config.k_beam);

    std::vector<Node> beam;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].scored.rule.direction == direction)
            beam.push_back({{i}, pool[i].mask, metrics_from_counts(n, positives, pool[i].scored.support,
                                                                    pool[i].mask.count_and(y))});
    keep_best(beam, k);
    found.insert(found.end(), beam.begin(), beam.end());

    for (int depth = 1; depth < config.max_rules && !beam.empty(); ++depth) {
        std::vector<std::vector<Node>> grown(beam.size());
        std::exception_ptr failure;
        const bool par = exec == Execution::parallel;
        const auto count = static_cast<long>(beam.size());
#pragma omp parallel for schedule(dynamic) if (par)
        for (long b = 0; b < count; ++b) {
            try {
                const Node& parent = beam[static_cast<std::size_t>(b)];
                auto& out = grown[static_cast<std::size_t>(b)];
                for (std::size_t s = 0; s < pool.size(); ++s) {
                    const Rule& r = pool[s].scored.rule;
                    if (r.direction != direction) continue;
                    const bool shares_organ = std::any_of(parent.splits.begin(), parent.splits.end(), [&](std::size_t p) {
                        return pool[p].scored.rule.organ == r.organ;
                    });
                    if (shares_organ) continue;
                    Mask conj = parent.mask & pool[s].mask;
                    const std::size_t support = conj.count();
                    if (support < static_cast<std::size_t>(config.min_support)) continue;
                    RuleMetrics m = metrics_from_counts(n, positives, support, conj.count_and(y));
                    if (!(m.info_gain > parent.metrics.info_gain)) continue;
                    std::vector<std::size_t> ids = parent.splits;
                    ids.insert(std::upper_bound(ids.begin(), ids.end(), s), s);
                    out.push_back({std::move(ids), std::move(conj), m});
                }
            } catch (...) {
#pragma omp critical(dass_rules_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);

        std::vector<Node> next;
        for (auto& g : grown) std::move(g.begin(), g.end(), std::back_inserter(next));
        if (next.empty()) break;
        keep_best(next, k);
        found.insert(found.end(), next.begin(), next.end());
        beam = std::move(next);
    }
}

}  // namespace

double mutual_information(std::size_t n00, std::size_t n01, std::size_t n10, std::size_t n11) {
    const auto n = static_cast<double>(n00 + n01 + n10 + n11);
    if (n == 0.0) return 0.0;
    const double s0 = static_cast<double>(n00 + n01), s1 = static_cast<double>(n10 + n11);
    const double y0 = static_cast<double>(n00 + n10), y1 = static_cast<double>(n01 + n11);
    // I = H(S) + H(Y) - H(S,Y)
    const double h_joint = -(plogp(static_cast<double>(n00), n) + plogp(static_cast<double>(n01), n) +
                             plogp(static_cast<double>(n10), n) + plogp(static_cast<double>(n11), n));
    const double h_s = -(plogp(s0, n) + plogp(s1, n));
    const double h_y = -(plogp(y0, n) + plogp(y1, n));
    return std::max(0.0, h_s + h_y - h_joint);
}

double mutual_information(std::span<const int> split, std::span<const int> target) {
    if (split.size() != target.size())
        throw ValidationError("split", "length " + std::to_string(split.size()) + " does not match target length " +
                                           std::to_string(target.size()));
    if (split.empty()) throw ValidationError("split", "vectors must not be empty");
    std::size_t c[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < split.size(); ++i) ++c[split[i] ? 1 : 0][target[i] ? 1 : 0];
    return mutual_information(c[0][0], c[0][1], c[1][0], c[1][1]);
}

std::string_view to_string(Direction d) { return d == Direction::geq ? ">=" : "<"; }

Direction parse_direction(std::string_view s) {
    if (s == ">=" || s == "geq") return Direction::geq;
    if (s == "<" || s == "lt") return Direction::lt;
    throw ValidationError("op", "rule operator must be '>=' or '<'");
}

std::string_view to_string(DirectionMode d) {
    switch (d) {
        case DirectionMode::geq: return "geq";
        case DirectionMode::lt: return "lt";
        case DirectionMode::both: return "both";
    }
    return "geq";
}

DirectionMode parse_direction_mode(std::string_view s) {
    if (s == "geq") return DirectionMode::geq;
    if (s == "lt") return DirectionMode::lt;
    if (s == "both" || s == "both-try") return DirectionMode::both;
    throw ValidationError("direction", "direction must be geq, lt or both");
}

std::string_view to_string(ThresholdGrid g) { return g == ThresholdGrid::quantile ? "quantile" : "midpoints"; }

ThresholdGrid parse_threshold_grid(std::string_view s) {
    if (s == "quantile") return ThresholdGrid::quantile;
    if (s == "midpoints") return ThresholdGrid::midpoints;
    throw ValidationError("grid", "grid must be quantile or midpoints");
}

std::string_view to_string(RuleFloor f) { return f == RuleFloor::mutual_information ? "mutual_information" : "precision"; }

RuleFloor parse_rule_floor(std::string_view s) {
    if (s == "mutual_information" || s == "mi") return RuleFloor::mutual_information;
    if (s == "precision") return RuleFloor::precision;
    throw ValidationError("floor", "floor must be mutual_information or precision");
}

void validate_miner_config(const MinerConfig& c) {
    std::vector<FieldError> errs;
    if (c.k_beam < 1) errs.push_back({"k_beam", "must be at least 1"});
    if (c.max_rules < 1) errs.push_back({"max_rules", "must be at least 1"});
    if (!(c.min_rule_value > 0.0) || !std::isfinite(c.min_rule_value))
        errs.push_back({"min_rule_value", "must be positive"});
    if (c.floor == RuleFloor::precision && c.min_rule_value > 1.0)
        errs.push_back({"min_rule_value", "a precision floor must not exceed 1"});
    if (c.thresholds_per_feature < 1) errs.push_back({"thresholds_per_feature", "must be at least 1"});
    if (c.min_support < 1) errs.push_back({"min_support", "must be at least 1"});
    if (c.max_rulesets_returned < 1) errs.push_back({"max_rulesets_returned", "must be at least 1"});
    if (!errs.empty()) throw ValidationError(std::move(errs));
}

std::vector<double> candidate_thresholds(std::span<const double> values, const MinerConfig& config) {
    std::vector<double> v;
    for (double x : values)
        if (!std::isnan(x)) v.push_back(x);
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    if (v.empty()) return out;
    if (config.grid == ThresholdGrid::midpoints) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] != v[i - 1]) out.push_back(0.5 * (v[i - 1] + v[i]));
        return out;
    }
    const std::size_t m = static_cast<std::size_t>(config.thresholds_per_feature);
    for (std::size_t i = 1; i <= m; ++i) out.push_back(v[i * v.size() / (m + 1)]);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<ScoredSplit> enumerate_splits(const RuleProblem& problem, const MinerConfig& config) {
    validate_miner_config(config);
    check_problem(problem);
    std::vector<ScoredSplit> out;
    for (auto& p : build_pool(problem, config)) out.push_back(p.scored);
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredSplit& a, const ScoredSplit& b) { return a.info_gain > b.info_gain; });
    return out;
}

MiningResult mine_rules(const RuleProblem& problem, const MinerConfig& config, Execution exec) {
    validate_miner_config(config);
    check_problem(problem);
    MiningResult result;
    const Mask y = target_mask(problem.target);
    const std::size_t positives = y.count();
    if (positives == 0 || positives == y.size()) {
        result.diagnostic = "target has a single class; nothing to separate";
        return result;
    }
    const auto pool = build_pool(problem, config);
    result.candidate_splits = pool.size();
    if (pool.empty()) {
        result.diagnostic = "no split passes the support and informativeness floors";
        return result;
    }

    std::vector<Node> found;
    if (config.direction != DirectionMode::lt) beam_search(pool, Direction::geq, y, config, exec, found);
    if (config.direction != DirectionMode::geq) beam_search(pool, Direction::lt, y, config, exec, found);
    keep_best(found, static_cast<std::size_t>(config.max_rulesets_returned));

    for (const Node& node : found) {
        std::vector<std::size_t> order = node.splits;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return pool[a].scored.info_gain > pool[b].scored.info_gain;
        });
        RuleSet rs;
        for (std::size_t id : order) {
            rs.rules.push_back(pool[id].scored.rule);
            rs.solo_info_gain.push_back(pool[id].scored.info_gain);
            rs.support.push_back(pool[id].scored.support);
        }
        rs.metrics = node.metrics;
        result.rulesets.push_back(std::move(rs));
    }
    return result;
}

RuleTarget cluster_target(const ClusterModel& model, int rank) {
    if (rank < 0 || rank >= model.k())
        throw ValidationError("target", "cluster rank must be in [0," + std::to_string(model.k()) + ")");
    RuleTarget t;
    t.name = "cluster:" + std::to_string(rank);
    t.patients = model.patient_rows;
    for (std::size_t row = 0; row < model.patient_rows.size(); ++row) t.values.push_back(model.ranked(row) == rank);
    return t;
}

RuleTarget outcome_target(const Cohort& cohort, const OutcomeSpec& outcome) {
    validate_outcome_spec(outcome, cohort);
    BinaryOutcome b = binarize_outcome(cohort, outcome);
    return {"outcome", std::move(b.patients), std::move(b.values)};
}

RuleProblem build_rule_problem(const Cohort& cohort, const RuleTarget& target, const std::optional<FeatureSpec>& scope) {
    std::vector<std::string> organs;
    std::vector<FeatureKey> keys;
    if (scope) {
        validate_feature_spec(*scope, &cohort);
        organs = scope->organs;
        keys = scope->keys();
    } else {
        for (const auto& o : cohort.organs) organs.push_back(o.name);
        const auto all = FeatureKey::all();
        keys.assign(all.begin(), all.end());
    }
    RuleProblem p;
    p.target = target.values;
    for (const auto& organ : organs) {
        const std::size_t oi = *cohort.organ_index(organ);
        for (FeatureKey key : keys) {
            RuleFeature f{organ, key, {}};
            f.values.reserve(target.patients.size());
            for (std::size_t pi : target.patients) {
                const OrganDvh& d = cohort.patients.at(pi).dvh[oi];
                f.values.push_back(d.missing ? std::numeric_limits<double>::quiet_NaN() : d[key]);
            }
            p.features.push_back(std::move(f));
        }
    }
    return p;
}

RuleEvaluation evaluate_ruleset(const std::vector<Rule>& rules, const RuleProblem& problem) {
    check_problem(problem);
    std::vector<const RuleFeature*> feats;
    for (std::size_t r = 0; r < rules.size(); ++r) {
        auto it = std::find_if(problem.features.begin(), problem.features.end(), [&](const RuleFeature& f) {
            return f.organ == rules[r].organ && f.key == rules[r].key;
        });
        if (it == problem.features.end())
            throw ValidationError("rules[" + std::to_string(r) + "]",
                                  "feature " + rules[r].organ + "__" + rules[r].key.str() + " is not available");
        feats.push_back(&*it);
    }
    const std::size_t n = problem.target.size();
    RuleEvaluation ev;
    ev.trace.assign(n, std::nullopt);
    ev.strata.resize(rules.size() + 1);
    for (std::size_t r = 0; r < rules.size(); ++r) ev.strata[r + 1].failed_rule = r;
    ev.remaining.assign(rules.size(), 0);
    std::size_t positives = 0, predicted = 0, tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool y = problem.target[i] != 0;
        positives += y;
        for (std::size_t r = 0; r < rules.size(); ++r) {
            const double v = feats[r]->values[i];
            if (std::isnan(v) || !rules[r].satisfied(v)) {
                ev.trace[i] = r;
                break;
            }
            ++ev.remaining[r];
        }
        Stratum& s = ev.strata[ev.trace[i] ? *ev.trace[i] + 1 : 0];
        (y ? s.in_class : s.out_class)++;
        if (!ev.trace[i]) {
            ++predicted;
            tp += y;
        }
    }
    ev.metrics = metrics_from_counts(n, positives, predicted, tp);
    return ev;
}

RuleEvaluation evaluate_ruleset(const std::vector<Rule>& rules, const Cohort& cohort, const RuleTarget& target) {
    std::vector<std::string> organs;
    for (std::size_t r = 0; r < rules.size(); ++r) {
        if (!cohort.organ_index(rules[r].organ))
            throw ValidationError("rules[" + std::to_string(r) + "].organ", "unknown organ '" + rules[r].organ + "'");
        if (std::find(organs.begin(), organs.end(), rules[r].organ) == organs.end()) organs.push_back(rules[r].organ);
    }
    RuleProblem p;
    p.target = target.values;
    for (const auto& organ : organs) {
        const std::size_t oi = *cohort.organ_index(organ);
        for (FeatureKey key : FeatureKey::all()) {
            RuleFeature f{organ, key, {}};
            for (std::size_t pi : target.patients) {
                const OrganDvh& d = cohort.patients.at(pi).dvh[oi];
                f.values.push_back(d.missing ? std::numeric_limits<double>::quiet_NaN() : d[key]);
            }
            p.features.push_back(std::move(f));
        }
    }
    return evaluate_ruleset(rules, p);
}

}  // namespace dass
