#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "rsteal/nn/models.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

inline constexpr int64_t kUnlimitedBudget = -1;

// Counts every oracle query against an optional hard budget. charge() is a
// single compare-and-swap loop: a batch that would cross the budget throws
// BudgetExhausted and leaves the count untouched, so concurrent callers
// never overdraw or double-count.
class QueryLedger {
public:
    explicit QueryLedger(int64_t budget = kUnlimitedBudget) : budget_(budget) {}
    // std::atomic is not movable; carry the count across by value.
    QueryLedger(QueryLedger&& other) noexcept
        : used_(other.used_.load(std::memory_order_relaxed)), budget_(other.budget_) {}

    int64_t queries_used() const { return used_.load(std::memory_order_relaxed); }
    int64_t budget() const { return budget_; }
    bool unlimited() const { return budget_ == kUnlimitedBudget; }
    // Remaining queries, or kUnlimitedBudget when no budget is set.
    int64_t remaining() const;

    void charge(int64_t n);

    std::string to_json() const;
    static QueryLedger from_json(const std::string& text);

private:
    std::atomic<int64_t> used_{0};
    int64_t budget_;
};

// Black-box face of the victim: callers hand in image batches and get back
// top-1 class indices, nothing else. The wrapped model stays private — no
// logits, gradients, or parameters cross this interface. Measurement-side
// tooling that needs white-box access to the victim holds its own handle.
class HardLabelOracle {
public:
    HardLabelOracle(nn::ModelPtr target, int64_t budget = kUnlimitedBudget);

    // Labels the batch (argmax, ties to the lowest index) and charges the
    // ledger by exactly one query per row. Inputs must be finite and within
    // [0,1]; a batch that would cross the budget throws BudgetExhausted
    // before any model evaluation.
    HardLabelBatch query_hard_labels(const Tensor& x);

    int num_classes() const { return num_classes_; }
    QueryLedger& ledger() { return ledger_; }
    const QueryLedger& ledger() const { return ledger_; }
    int64_t remaining_budget() const { return ledger_.remaining(); }

private:
    nn::ModelPtr target_;
    int num_classes_;
    QueryLedger ledger_;
};

} // namespace rsteal
