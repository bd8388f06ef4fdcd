#include "rsteal/oracle.hpp"

#include <json.hpp>

#include "rsteal/errors.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

using json = nlohmann::json;

int64_t QueryLedger::remaining() const {
    if (unlimited()) return kUnlimitedBudget;
    return budget_ - queries_used();
}

void QueryLedger::charge(int64_t n) {
    if (n < 0) throw ConfigInvalid("ledger charge must be non-negative");
    int64_t cur = used_.load(std::memory_order_relaxed);
    for (;;) {
        const int64_t next = cur + n;
        if (!unlimited() && next > budget_)
            throw BudgetExhausted("query budget exceeded: " + std::to_string(cur) + "+" +
                                  std::to_string(n) + " > " + std::to_string(budget_));
        if (used_.compare_exchange_weak(cur, next, std::memory_order_relaxed)) return;
    }
}

std::string QueryLedger::to_json() const {
    json j;
    j["queries_used"] = queries_used();
    if (unlimited())
        j["budget"] = "unlimited";
    else
        j["budget"] = budget_;
    return j.dump(2) + "\n";
}

QueryLedger QueryLedger::from_json(const std::string& text) {
    json j = json::parse(text);
    int64_t budget = kUnlimitedBudget;
    if (j.at("budget").is_number_integer()) budget = j["budget"].get<int64_t>();
    QueryLedger ledger(budget);
    ledger.charge(j.at("queries_used").get<int64_t>());
    return ledger;
}

HardLabelOracle::HardLabelOracle(nn::ModelPtr target, int64_t budget)
    : target_(std::move(target)), num_classes_(target_->num_classes()), ledger_(budget) {}

HardLabelBatch HardLabelOracle::query_hard_labels(const Tensor& x) {
    if (x.ndim() < 2 || x.shape()[0] <= 0)
        throw ShapeMismatch("oracle expects a non-empty batch, got " + x.shape_str());
    if (!all_finite(x)) throw ShapeMismatch("oracle input contains non-finite values");
    for (int64_t i = 0; i < x.numel(); ++i)
        if (x.data()[i] < 0.0f || x.data()[i] > 1.0f)
            throw ShapeMismatch("oracle input outside [0,1]");
    const int64_t n = x.shape()[0];
    ledger_.charge(n); // throws before the victim sees the batch
    Tensor logits = target_->forward(x, /*train=*/false);
    if (logits.shape()[1] != num_classes_)
        throw ShapeMismatch("oracle output width changed");
    return argmax_rows(logits);
}

} // namespace rsteal
