#include "emosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "emosim/error.hpp"
#include "emosim/text.hpp"

namespace emosim {

double strategy_accuracy(const StrategyChoice& model, const StrategyChoice& human, const StrategyPool& pool) {
    const auto a = multi_hot(model, pool);
    const auto b = multi_hot(human, pool);
    long dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0)
        fail(ErrorCode::UndefinedForEmpty, "strategy accuracy is undefined for an empty choice");
    return static_cast<double>(dot) / std::sqrt(static_cast<double>(na * nb));
}

double aggregate_accuracy(std::span<const double> per_case) {
    require(!per_case.empty(), "cannot aggregate an empty accuracy list");
    return std::accumulate(per_case.begin(), per_case.end(), 0.0) / static_cast<double>(per_case.size()) * 100.0;
}

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

// --- flow --------------------------------------------------------------------

std::size_t FlowMatrix::count(std::string_view label, std::string_view strategy_id) const {
    auto li = std::find(labels.begin(), labels.end(), label);
    auto si = std::find_if(strategies.begin(), strategies.end(), [&](const Strategy& s) { return s.id == strategy_id; });
    if (li == labels.end() || si == strategies.end())
        return 0;
    return counts[static_cast<std::size_t>(li - labels.begin())][static_cast<std::size_t>(si - strategies.begin())];
}

std::size_t FlowMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
        t += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return t;
}

FlowMatrix FlowMatrix::top_k(std::size_t k_labels, std::size_t k_strategies) const {
    auto top = [](std::vector<std::size_t> marginals, std::size_t k) {
        std::vector<std::size_t> idx(marginals.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return marginals[a] > marginals[b]; });
        idx.resize(std::min(k, idx.size()));
        std::sort(idx.begin(), idx.end());
        return idx;
    };
    std::vector<std::size_t> row_m(labels.size(), 0), col_m(strategies.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < strategies.size(); ++j) {
            row_m[i] += counts[i][j];
            col_m[j] += counts[i][j];
        }
    const auto rows = top(row_m, k_labels);
    const auto cols = top(col_m, k_strategies);

    FlowMatrix out;
    for (auto j : cols)
        out.strategies.push_back(strategies[j]);
    for (auto i : rows) {
        out.labels.push_back(labels[i]);
        std::vector<std::size_t> row;
        for (auto j : cols)
            row.push_back(counts[i][j]);
        out.counts.push_back(std::move(row));
    }
    return out;
}

std::string FlowMatrix::edge_list_csv() const {
    std::string out = "source,target,weight\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < strategies.size(); ++j)
            if (counts[i][j] > 0)
                out += fmt::format("{},\"{}\",{}\n", labels[i], strategies[j].display_name, counts[i][j]);
    return out;
}

FlowMatrix emotion_strategy_flow(std::span<const EmotionStrategy> results, const StrategyPool& pool) {
    FlowMatrix m;
    m.strategies = pool.entries();
    for (const auto& [se, choice] : results) {
        auto li = std::find(m.labels.begin(), m.labels.end(), se.label.label);
        std::size_t row;
        if (li == m.labels.end()) {
            m.labels.push_back(se.label.label);
            m.counts.emplace_back(pool.size(), 0);
            row = m.labels.size() - 1;
        } else {
            row = static_cast<std::size_t>(li - m.labels.begin());
        }
        const auto hot = multi_hot(choice, pool);
        for (std::size_t j = 0; j < hot.size(); ++j)
            m.counts[row][j] += static_cast<std::size_t>(hot[j]);
    }
    return m;
}

// --- decision changes --------------------------------------------------------

std::string_view to_string(DecisionChangeCategory c) {
    switch (c) {
    case DecisionChangeCategory::UndecidedChange: return "undecided";
    case DecisionChangeCategory::DecidedChange: return "decided";
    case DecisionChangeCategory::AuthorityChange: return "authority";
    case DecisionChangeCategory::MajorityChange: return "majority";
    case DecisionChangeCategory::DetailsChange: return "details";
    case DecisionChangeCategory::CompromiseChange: return "compromise";
    case DecisionChangeCategory::NoChange: return "no_change";
    }
    return "no_change";
}

std::string normalize_summary(std::string_view summary) { return text::normalize(summary); }

DecisionChangeCategory classify_decision_change(const Decision& before, const Decision& after) {
    if (before.step_index != after.step_index)
        fail(ErrorCode::StepMismatch, fmt::format("comparing step {} with step {}", before.step_index, after.step_index));
    using R = Resolution;
    using C = DecisionChangeCategory;
    const auto pair = std::make_pair(before.resolution, after.resolution);
    if (pair == std::make_pair(R::Agreement, R::Delegation))
        return C::UndecidedChange;
    if (pair == std::make_pair(R::Delegation, R::Agreement))
        return C::DecidedChange;
    if (pair == std::make_pair(R::Vote, R::SingleAgent))
        return C::AuthorityChange;
    if (pair == std::make_pair(R::SingleAgent, R::Vote))
        return C::MajorityChange;
    if (pair == std::make_pair(R::Agreement, R::CompromisedAgreement))
        return C::CompromiseChange;
    if (before.resolution == after.resolution && normalize_summary(before.summary) == normalize_summary(after.summary))
        return C::NoChange;
    return C::DetailsChange;
}

std::vector<DecisionPair> decision_pairs(const PairedRunSet& set) {
    std::vector<DecisionPair> out;
    for (const auto& run : set.runs)
        for (const auto& after : run.decisions)
            for (const auto& before : set.baseline.decisions)
                if (before.step_index == after.step_index)
                    out.push_back({set.topic.title, set.valence, before, after});
    return out;
}

double mean_rate(std::span<const double> rates) {
    require(!rates.empty(), "cannot average an empty rate list");
    return std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
}

ChangeRateReport decision_change_rate(std::span<const DecisionPair> pairs, std::optional<Valence> only) {
    require(!pairs.empty(), "decision_change_rate needs at least one pair");
    ChangeRateReport report;
    for (const auto& p : pairs) {
        if (only && p.valence != *only)
            continue;
        const auto cat = classify_decision_change(p.before, p.after);
        ++report.categories[cat];
        auto it = std::find_if(report.topics.begin(), report.topics.end(),
                               [&](const TopicRates& t) { return t.topic == p.topic; });
        if (it == report.topics.end()) {
            report.topics.emplace_back().topic = p.topic;
            it = std::prev(report.topics.end());
        }
        const bool changed = cat != DecisionChangeCategory::NoChange;
        if (p.valence == Valence::Positive) {
            ++it->total_positive;
            it->changed_positive += changed;
        } else if (p.valence == Valence::Negative) {
            ++it->total_negative;
            it->changed_negative += changed;
        }
    }

    std::vector<double> pos, neg, all;
    for (auto& t : report.topics) {
        if (t.total_positive > 0) {
            t.positive = 100.0 * static_cast<double>(t.changed_positive) / static_cast<double>(t.total_positive);
            pos.push_back(*t.positive);
        }
        if (t.total_negative > 0) {
            t.negative = 100.0 * static_cast<double>(t.changed_negative) / static_cast<double>(t.total_negative);
            neg.push_back(*t.negative);
        }
        const auto total = t.total_positive + t.total_negative;
        if (total > 0) {
            t.all = 100.0 * static_cast<double>(t.changed_positive + t.changed_negative) / static_cast<double>(total);
            all.push_back(*t.all);
        }
    }
    if (!pos.empty())
        report.positive = mean_rate(pos);
    if (!neg.empty())
        report.negative = mean_rate(neg);
    if (!all.empty())
        report.all = mean_rate(all);
    return report;
}

namespace {
std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }
} // namespace

std::string ChangeRateReport::to_text() const {
    std::size_t width = 5;
    for (const auto& t : topics)
        width = std::max(width, t.topic.size());
    std::string out = fmt::format("{:>{}}  {:>7}  {:>7}  {:>7}\n", "Topic", width, "Pos", "Neg", "All");
    for (const auto& t : topics)
        out += fmt::format("{:>{}}  {:>7}  {:>7}  {:>7}\n", t.topic, width, cell(t.positive), cell(t.negative), cell(t.all));
    out += fmt::format("{:>{}}  {:>7}  {:>7}  {:>7}\n", "avg.", width, cell(positive), cell(negative), cell(all));
    out += "\nCategory counts\n";
    for (const auto& [cat, n] : categories)
        out += fmt::format("  {:<12} {}\n", to_string(cat), n);
    return out;
}

std::string ChangeRateReport::to_csv() const {
    std::string out = "topic,pos,neg,all\n";
    for (const auto& t : topics)
        out += fmt::format("\"{}\",{},{},{}\n", t.topic, cell(t.positive), cell(t.negative), cell(t.all));
    out += fmt::format("avg.,{},{},{}\n", cell(positive), cell(negative), cell(all));
    return out;
}

// --- discussion length / activity -------------------------------------------

std::vector<StepStat> step_stats(const DiscussionRun& run, const std::optional<std::string>& target) {
    std::vector<StepStat> out(run.decisions.size());
    for (const auto& u : run.transcript.utterances) {
        if (!u.step_index || *u.step_index >= out.size())
            continue;
        auto& s = out[*u.step_index];
        ++s.utterances;
        if (target && u.speaker_id == *target)
            ++s.target_utterances;
    }
    return out;
}

DiscussionStats discussion_stats(std::span<const std::vector<StepStat>> runs) {
    DiscussionStats st;
    double length = 0.0, freq = 0.0;
    for (const auto& run : runs)
        for (const auto& s : run) {
            length += static_cast<double>(s.utterances);
            freq += static_cast<double>(s.target_utterances);
            ++st.steps;
        }
    require(st.steps > 0, "discussion_stats needs at least one step");
    st.avg_length = length / static_cast<double>(st.steps);
    st.target_frequency = freq / static_cast<double>(st.steps);
    return st;
}

} // namespace emosim
