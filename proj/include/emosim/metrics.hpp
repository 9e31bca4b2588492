#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emosim/domain.hpp"
#include "emosim/groupsim.hpp"

namespace emosim {

/// Cosine similarity of the multi-hot encodings. Throws UndefinedForEmpty
/// when either choice is empty.
double strategy_accuracy(const StrategyChoice& model, const StrategyChoice& human,
                         const StrategyPool& pool = StrategyPool::default_pool());

/// Mean of per-case accuracies, as a percentage. Throws InvalidArgument on
/// an empty list.
double aggregate_accuracy(std::span<const double> per_case);

double round_to(double value, int decimals);

struct FlowMatrix {
    std::vector<std::string> labels;
    std::vector<Strategy> strategies;
    std::vector<std::vector<std::size_t>> counts;  // [label][strategy]

    std::size_t count(std::string_view label, std::string_view strategy_id) const;
    std::size_t total() const;

    /// Keep the k most frequent labels and strategies by marginal count.
    FlowMatrix top_k(std::size_t k_labels, std::size_t k_strategies) const;

    /// source,target,weight rows (nonzero cells only).
    std::string edge_list_csv() const;
};

using EmotionStrategy = std::pair<SelfEmotion, StrategyChoice>;

FlowMatrix emotion_strategy_flow(std::span<const EmotionStrategy> results,
                                 const StrategyPool& pool = StrategyPool::default_pool());

enum class DecisionChangeCategory {
    UndecidedChange,
    DecidedChange,
    AuthorityChange,
    MajorityChange,
    DetailsChange,
    CompromiseChange,
    NoChange,
};

std::string_view to_string(DecisionChangeCategory c);

/// Summary normalization used for NoChange detection.
std::string normalize_summary(std::string_view summary);

/// Throws StepMismatch when the step indices differ.
DecisionChangeCategory classify_decision_change(const Decision& before, const Decision& after);

struct DecisionPair {
    std::string topic;
    Valence valence = Valence::Positive;
    Decision before;
    Decision after;
};

/// Baseline/self-emotion decision pairs of every successful run.
std::vector<DecisionPair> decision_pairs(const PairedRunSet& set);

struct TopicRates {
    std::string topic;
    std::optional<double> positive;
    std::optional<double> negative;
    std::optional<double> all;
    std::size_t changed_positive = 0, total_positive = 0;
    std::size_t changed_negative = 0, total_negative = 0;
};

struct ChangeRateReport {
    std::vector<TopicRates> topics;  // first-seen order
    std::optional<double> positive;  // mean of per-topic rates
    std::optional<double> negative;
    std::optional<double> all;
    std::map<DecisionChangeCategory, std::size_t> categories;

    std::string to_text() const;
    std::string to_csv() const;
};

/// Percent of step decisions whose category is not NoChange, per topic and
/// valence. The "all" column pools positive and negative counts per topic.
ChangeRateReport decision_change_rate(std::span<const DecisionPair> pairs,
                                      std::optional<Valence> only = std::nullopt);

/// Plain mean of per-topic rates (the avg row of a rate table).
double mean_rate(std::span<const double> rates);

struct StepStat {
    std::size_t utterances = 0;
    std::size_t target_utterances = 0;
};

struct DiscussionStats {
    double avg_length = 0.0;
    double target_frequency = 0.0;
    std::size_t steps = 0;
};

/// Per-step counts from a run's transcript; target_utterances counts the
/// given member's utterances.
std::vector<StepStat> step_stats(const DiscussionRun& run, const std::optional<std::string>& target);

/// Means over every step of every run.
DiscussionStats discussion_stats(std::span<const std::vector<StepStat>> runs);

} // namespace emosim
