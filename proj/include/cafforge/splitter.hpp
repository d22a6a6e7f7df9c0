#pragma once

#include "cafforge/error.hpp"
#include "cafforge/format.hpp"
#include "cafforge/random.hpp"
#include "cafforge/record.hpp"
#include "cafforge/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cafforge {

enum class Split { indomain_train, indomain_val, indomain_test, zeroshot_test };
enum class Difficulty { hard, easy };

inline constexpr double kHardThreshold = 1.5;

constexpr std::string_view split_name(Split s) noexcept {
    switch (s) {
        case Split::indomain_train: return "indomain-train";
        case Split::indomain_val: return "indomain-val";
        case Split::indomain_test: return "indomain-test";
        case Split::zeroshot_test: return "zeroshot-test";
    }
    return "?";
}

inline std::optional<Split> parse_split(std::string_view text) {
    for (auto s : {Split::indomain_train, Split::indomain_val, Split::indomain_test, Split::zeroshot_test}) {
        if (split_name(s) == text) return s;
    }
    return std::nullopt;
}

constexpr std::string_view difficulty_name(Difficulty d) noexcept { return d == Difficulty::hard ? "HARD" : "EASY"; }

inline std::optional<Difficulty> parse_difficulty(std::string_view text) {
    if (text == "HARD") return Difficulty::hard;
    if (text == "EASY") return Difficulty::easy;
    return std::nullopt;
}

struct Cutoffs {
    std::int64_t c90 = 0;
    std::int64_t c95 = 0;
    friend bool operator==(const Cutoffs&, const Cutoffs&) = default;
};

/// Per-dataset temporal cutoffs, computed once and reused.
using CutoffTable = std::map<std::string, Cutoffs, std::less<>>;

/// Nearest-rank percentiles: the ceil(p*n)-th smallest value, p in {0.90, 0.95}.
inline Cutoffs percentile_cutoffs(std::span<const std::int64_t> start_indices) {
    require(!start_indices.empty(), "percentile_cutoffs: empty start_idx list");
    std::vector<std::int64_t> sorted(start_indices.begin(), start_indices.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<std::int64_t>(sorted.size());
    // integer ceil(p*n) with p = k/100
    const auto rank = [n](std::int64_t k) { return std::max<std::int64_t>(1, (k * n + 99) / 100); };
    return {sorted[static_cast<std::size_t>(rank(90) - 1)], sorted[static_cast<std::size_t>(rank(95) - 1)]};
}

inline CutoffTable compute_cutoff_table(std::span<const ForecastWindow> windows) {
    std::map<std::string, std::vector<std::int64_t>, std::less<>> starts;
    for (const auto& w : windows) starts[w.dataset_id].push_back(w.start_idx);
    CutoffTable table;
    for (const auto& [dataset, values] : starts) table.emplace(dataset, percentile_cutoffs(values));
    return table;
}

/// train: start <= c90; val: c90 < start <= c95; test: start > c95.
inline Split assign_indomain(const ForecastWindow& window, const CutoffTable& cutoffs) {
    const auto it = cutoffs.find(window.dataset_id);
    if (it == cutoffs.end()) {
        fail(ErrorKind::data, "no cutoffs for dataset '" + window.dataset_id + "'");
    }
    if (window.start_idx <= it->second.c90) return Split::indomain_train;
    if (window.start_idx <= it->second.c95) return Split::indomain_val;
    return Split::indomain_test;
}

/// HARD iff the baseline MASE exceeds the threshold (+inf included).
inline Difficulty stratify_difficulty(const ForecastWindow& window, double threshold = kHardThreshold) {
    if (!window.baseline_mase) {
        fail(ErrorKind::data, "window " + window.key() + " has no baseline_mase");
    }
    return *window.baseline_mase > threshold ? Difficulty::hard : Difficulty::easy;
}

/// Canonical sort, seeded Fisher-Yates, then the first `count` items.
template <typename T, typename Less>
std::vector<T> seeded_prefix(std::vector<T> items, std::size_t count, std::uint64_t seed, Less canonical) {
    std::sort(items.begin(), items.end(), canonical);
    Rng rng{seed};
    shuffle_in_place(items, rng);
    items.resize(std::min(count, items.size()));
    return items;
}

template <typename T, typename Less>
std::vector<T> sample_budget(std::vector<T> pool, std::size_t budget, std::uint64_t seed, Less canonical) {
    return seeded_prefix(std::move(pool), budget, seed, canonical);
}

inline std::vector<ForecastWindow> sample_budget(std::vector<ForecastWindow> pool, std::size_t budget,
                                                 std::uint64_t seed = kDefaultSeed) {
    return sample_budget(std::move(pool), budget, seed, [](const auto& a, const auto& b) { return canonical_less(a, b); });
}

/// floor(fraction * n) items of one seeded shuffle; with a fixed seed a
/// smaller fraction always yields a prefix of a larger one.
inline std::size_t subsample_count(std::size_t n, double fraction) {
    require(fraction > 0.0 && fraction <= 1.0, "subsample: fraction must lie in (0, 1]");
    // The nudge keeps products like 0.29 * 100 from flooring to 28.
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    return std::min(count, n);
}

template <typename T, typename Less>
std::vector<T> subsample_training(std::vector<T> windows, double fraction, std::uint64_t seed, Less canonical) {
    const auto count = subsample_count(windows.size(), fraction);
    return seeded_prefix(std::move(windows), count, seed, canonical);
}

inline std::vector<ForecastWindow> subsample_training(std::vector<ForecastWindow> windows, double fraction,
                                                      std::uint64_t seed = kDefaultSeed) {
    return subsample_training(std::move(windows), fraction, seed, [](const auto& a, const auto& b) { return canonical_less(a, b); });
}

struct SplitAssignment {
    std::string window_key;
    std::string dataset_id;
    std::string item_id;
    std::int64_t start_idx = 0;
    Split split = Split::indomain_train;
    Difficulty difficulty = Difficulty::easy;
    double baseline_mase = 0.0;
    bool in_budget = true;  // selected by budget sampling (always true when no budget applies)

    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

struct SplitPlan {
    std::set<std::string, std::less<>> indomain_datasets;
    std::set<std::string, std::less<>> zeroshot_datasets;
    double mase_threshold = kHardThreshold;
    std::uint64_t seed = kDefaultSeed;
    /// Per-difficulty budget for an evaluation split; splits absent here keep every window.
    std::map<Split, std::size_t> budgets;
    std::vector<double> subsample_fractions;
    /// Evaluation windows must carry accepted == true to enter a pool.
    bool require_accepted_for_eval = false;
};

struct Subsample {
    double fraction = 0.0;
    std::vector<std::string> keys;  // shuffled order; smaller fractions are prefixes
};

struct SplitResult {
    CutoffTable cutoffs;
    std::vector<SplitAssignment> assignments;  // canonical order
    std::vector<Subsample> subsamples;
    std::vector<std::string> warnings;
};

/// Cutoffs, split assignment, difficulty labels, budget sampling and
/// training subsamples for a whole corpus.
inline SplitResult build_splits(const std::vector<WindowRecord>& records, const SplitPlan& plan) {
    for (const auto& name : plan.indomain_datasets) {
        if (plan.zeroshot_datasets.count(name) != 0) {
            fail(ErrorKind::config, "dataset '" + name + "' is listed as both in-domain and zero-shot");
        }
    }
    std::vector<std::string> missing;
    for (const auto& r : records) {
        if (!r.window.baseline_mase) missing.push_back(r.key());
    }
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " window(s) lack a baseline proxy:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        if (missing.size() > 20) msg += " ...";
        fail(ErrorKind::data, msg);
    }

    SplitResult result;
    std::vector<ForecastWindow> indomain;
    std::set<std::string> ignored;
    for (const auto& r : records) {
        if (plan.indomain_datasets.count(r.window.dataset_id) != 0) {
            indomain.push_back(r.window);
        } else if (plan.zeroshot_datasets.count(r.window.dataset_id) == 0) {
            ignored.insert(r.window.dataset_id);
        }
    }
    for (const auto& name : ignored) {
        result.warnings.push_back("dataset '" + name + "' is in neither dataset list; its windows were skipped");
    }
    result.cutoffs = compute_cutoff_table(indomain);

    std::vector<WindowRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });

    std::map<std::pair<Split, Difficulty>, std::vector<std::size_t>> pools;
    std::vector<std::size_t> train;
    for (const auto& r : sorted) {
        const auto& w = r.window;
        const bool in_domain = plan.indomain_datasets.count(w.dataset_id) != 0;
        if (!in_domain && plan.zeroshot_datasets.count(w.dataset_id) == 0) continue;

        SplitAssignment a;
        a.window_key = w.key();
        a.dataset_id = w.dataset_id;
        a.item_id = w.item_id;
        a.start_idx = w.start_idx;
        a.split = in_domain ? assign_indomain(w, result.cutoffs) : Split::zeroshot_test;
        a.difficulty = stratify_difficulty(w, plan.mase_threshold);
        a.baseline_mase = *w.baseline_mase;

        const auto index = result.assignments.size();
        if (a.split == Split::indomain_train) {
            train.push_back(index);
        } else if (plan.budgets.count(a.split) != 0) {
            a.in_budget = false;
            if (!plan.require_accepted_for_eval || r.accepted.value_or(false)) {
                pools[{a.split, a.difficulty}].push_back(index);
            }
        } else if (plan.require_accepted_for_eval) {
            a.in_budget = r.accepted.value_or(false);
        }
        result.assignments.push_back(std::move(a));
    }

    for (const auto& [split, budget] : plan.budgets) {
        for (auto difficulty : {Difficulty::hard, Difficulty::easy}) {
            const auto it = pools.find({split, difficulty});
            if (it == pools.end() || it->second.empty()) {
                if (budget > 0) {
                    result.warnings.push_back(std::string(difficulty_name(difficulty)) + " pool for " +
                                              std::string(split_name(split)) + " is empty");
                }
                continue;
            }
            // Indices are already in canonical order.
            const auto chosen = sample_budget(it->second, budget, plan.seed, std::less<>{});
            for (auto idx : chosen) result.assignments[idx].in_budget = true;
        }
    }

    for (double fraction : plan.subsample_fractions) {
        Subsample sub;
        sub.fraction = fraction;
        for (auto idx : subsample_training(train, fraction, plan.seed, std::less<>{})) {
            sub.keys.push_back(result.assignments[idx].window_key);
        }
        result.subsamples.push_back(std::move(sub));
    }
    return result;
}

struct AuditReport {
    std::size_t leakage_violations = 0;
    std::size_t duplicate_assignments = 0;
    std::size_t stratification_errors = 0;
    std::size_t nesting_violations = 0;
    std::size_t zeroshot_violations = 0;
    std::vector<std::string> messages;

    [[nodiscard]] bool clean() const noexcept {
        return leakage_violations == 0 && duplicate_assignments == 0 && stratification_errors == 0 &&
               nesting_violations == 0 && zeroshot_violations == 0;
    }
};

/// Re-derives cutoffs from the assignments and checks every split invariant.
inline AuditReport audit_splits(const std::vector<SplitAssignment>& assignments, const std::vector<Subsample>& subsamples,
                                const std::set<std::string, std::less<>>& zeroshot_datasets,
                                double threshold = kHardThreshold) {
    AuditReport report;
    auto note = [&](std::size_t& counter, std::string msg) {
        ++counter;
        if (report.messages.size() < 50) report.messages.push_back(std::move(msg));
    };

    std::set<std::string> seen;
    std::map<std::string, std::vector<std::int64_t>> starts;
    for (const auto& a : assignments) {
        if (!seen.insert(a.window_key).second) note(report.duplicate_assignments, "duplicate assignment: " + a.window_key);
        if (a.split != Split::zeroshot_test) starts[a.dataset_id].push_back(a.start_idx);

        const bool zeroshot_listed = zeroshot_datasets.count(a.dataset_id) != 0;
        if ((a.split == Split::zeroshot_test) != zeroshot_listed) {
            note(report.zeroshot_violations, "split of " + a.window_key + " disagrees with the zero-shot dataset list");
        }
        const bool hard = a.baseline_mase > threshold;
        const bool labelled_hard = a.difficulty == Difficulty::hard;
        if (hard != labelled_hard || (!labelled_hard && !std::isfinite(a.baseline_mase))) {
            note(report.stratification_errors, "difficulty of " + a.window_key + " disagrees with its proxy");
        }
    }

    std::map<std::string, Cutoffs> cutoffs;
    for (const auto& [dataset, values] : starts) cutoffs.emplace(dataset, percentile_cutoffs(values));
    for (const auto& a : assignments) {
        if (a.split == Split::zeroshot_test) continue;
        const auto& c = cutoffs.at(a.dataset_id);
        const bool ok = (a.split == Split::indomain_train && a.start_idx <= c.c90) ||
                        (a.split == Split::indomain_val && a.start_idx > c.c90 && a.start_idx <= c.c95) ||
                        (a.split == Split::indomain_test && a.start_idx > c.c95);
        if (!ok) note(report.leakage_violations, "temporal leakage: " + a.window_key + " in " + std::string(split_name(a.split)));
    }

    std::map<std::string, Split> split_of;
    for (const auto& a : assignments) split_of.emplace(a.window_key, a.split);
    std::vector<const Subsample*> ordered;
    for (const auto& s : subsamples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->fraction < b->fraction; });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        for (const auto& key : ordered[i]->keys) {
            const auto it = split_of.find(key);
            if (it == split_of.end() || it->second != Split::indomain_train) {
                note(report.nesting_violations, "subsample key " + key + " is not an indomain-train window");
            }
        }
        if (i == 0) continue;
        const auto& small = ordered[i - 1]->keys;
        const auto& large = ordered[i]->keys;
        if (small.size() > large.size() || !std::equal(small.begin(), small.end(), large.begin())) {
            note(report.nesting_violations, "subsample " + format_number(ordered[i - 1]->fraction) +
                                                " is not a prefix of " + format_number(ordered[i]->fraction));
        }
    }
    return report;
}

}  // namespace cafforge
