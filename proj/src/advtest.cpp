#include "rsteal/advtest.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "rsteal/errors.hpp"
#include "rsteal/nn/loss.hpp"
#include "rsteal/samplecraft.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

using json = nlohmann::json;

AttackSpec AttackSpec::fgsm(float eps) {
    AttackSpec s;
    s.kind = AttackKind::kFgsm;
    s.eps = eps;
    s.eta = eps;
    s.steps = 1;
    s.random_start = false;
    return s;
}

AttackSpec AttackSpec::pgd(int steps, float eps, float eta, bool random_start) {
    AttackSpec s;
    s.kind = AttackKind::kPgd;
    s.eps = eps;
    s.eta = eta;
    s.steps = steps;
    s.random_start = random_start;
    return s;
}

AttackSpec AttackSpec::cw_pgd(int steps, float eps, float eta, bool random_start) {
    AttackSpec s = pgd(steps, eps, eta, random_start);
    s.kind = AttackKind::kCwPgd;
    return s;
}

std::string AttackSpec::name() const {
    switch (kind) {
        case AttackKind::kFgsm: return "fgsm";
        case AttackKind::kPgd: return "pgd" + std::to_string(steps);
        case AttackKind::kCwPgd: return "cw" + std::to_string(steps);
    }
    return "unknown";
}

double EvalReport::robust(const std::string& name) const {
    for (const auto& [k, v] : robust_acc)
        if (k == name) return v;
    return std::numeric_limits<double>::quiet_NaN();
}

double EvalReport::aa_surrogate() const {
    const double p = robust("pgd100"), c = robust("cw100");
    if (std::isnan(p) || std::isnan(c)) return std::numeric_limits<double>::quiet_NaN();
    return std::min(p, c);
}

namespace {
std::string fmt_pct(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << v;
    return os.str();
}
} // namespace

std::string EvalReport::to_json() const {
    json j;
    j["clean_acc"] = clean_acc;
    j["n_samples"] = n_samples;
    json r = json::object();
    for (const auto& [k, v] : robust_acc) r[k] = v;
    const double aa = aa_surrogate();
    if (!std::isnan(aa)) r["aa_surrogate"] = aa;
    j["robust_acc"] = r;
    return j.dump(2) + "\n";
}

std::string EvalReport::csv_header() {
    return "clean_acc,fgsm,pgd20,pgd100,cw100,aa_surrogate";
}

std::string EvalReport::csv_row() const {
    std::ostringstream os;
    os << fmt_pct(clean_acc) << ',' << fmt_pct(robust("fgsm")) << ',' << fmt_pct(robust("pgd20"))
       << ',' << fmt_pct(robust("pgd100")) << ',' << fmt_pct(robust("cw100")) << ','
       << fmt_pct(aa_surrogate());
    return os.str();
}

Tensor attack_batch(nn::Model& model, const Tensor& x, const std::vector<int>& y,
                    const AttackSpec& spec, Rng* rng) {
    if (static_cast<int64_t>(y.size()) != x.shape()[0])
        throw ShapeMismatch("attack labels do not match batch");
    ProbeConfig cfg;
    cfg.constrained = true;
    cfg.eps = spec.eps;
    cfg.alpha = spec.eta;
    cfg.steps = spec.steps;
    cfg.random_start = spec.random_start;
    cfg.clip01 = spec.clip01;
    std::function<nn::LossOut(const Tensor&)> objective;
    if (spec.kind == AttackKind::kCwPgd)
        objective = [&y](const Tensor& logits) { return nn::cw_attack_objective(logits, y, 0.0f); };
    else
        objective = [&y](const Tensor& logits) { return nn::softmax_xent_hard(logits, y); };
    return signed_gradient_ascent(model, x, objective, cfg, rng).final_batch;
}

std::vector<AttackSpec> standard_eval_suite(float eps) {
    const float eta = eps / 4.0f;
    return {AttackSpec::fgsm(eps), AttackSpec::pgd(20, eps, eta), AttackSpec::pgd(100, eps, eta),
            AttackSpec::cw_pgd(100, eps, eta)};
}

namespace {

int64_t count_correct(nn::Model& model, const Tensor& x, const std::vector<int>& y) {
    const HardLabelBatch pred = argmax_rows(model.forward(x, /*train=*/false));
    int64_t correct = 0;
    for (size_t i = 0; i < y.size(); ++i)
        if (pred[i] == y[i]) ++correct;
    return correct;
}

} // namespace

EvalReport evaluate(nn::Model& model, const Dataset& data, const std::vector<AttackSpec>& specs,
                    int batch_size, Rng& rng) {
    if (data.size() == 0) throw EmptyDataset("evaluate needs samples");
    EvalReport rep;
    rep.n_samples = data.size();
    int64_t clean_correct = 0;
    std::vector<int64_t> robust_correct(specs.size(), 0);
    for (int64_t off = 0; off < data.size(); off += batch_size) {
        const int64_t n = std::min<int64_t>(batch_size, data.size() - off);
        std::vector<int64_t> idx(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = off + i;
        const Tensor x = data.gather(idx);
        std::vector<int> y(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) y[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(off + i)];
        clean_correct += count_correct(model, x, y);
        for (size_t s = 0; s < specs.size(); ++s) {
            const Tensor adv = attack_batch(model, x, y, specs[s], &rng);
            robust_correct[s] += count_correct(model, adv, y);
        }
    }
    rep.clean_acc = 100.0 * static_cast<double>(clean_correct) / static_cast<double>(data.size());
    for (size_t s = 0; s < specs.size(); ++s)
        rep.robust_acc.emplace_back(
            specs[s].name(),
            100.0 * static_cast<double>(robust_correct[s]) / static_cast<double>(data.size()));
    return rep;
}

double transfer_asr(nn::Model& surrogate, nn::Model& target, const Dataset& data,
                    const AttackSpec& spec, int batch_size, Rng& rng) {
    if (data.size() == 0) throw EmptyDataset("transfer_asr needs samples");
    int64_t eligible = 0, flipped = 0;
    for (int64_t off = 0; off < data.size(); off += batch_size) {
        const int64_t n = std::min<int64_t>(batch_size, data.size() - off);
        std::vector<int64_t> idx(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = off + i;
        const Tensor x = data.gather(idx);
        std::vector<int> y(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) y[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(off + i)];

        // Restrict to samples the target currently gets right, then craft on
        // the surrogate and re-query the target on the transferred batch.
        const HardLabelBatch before = argmax_rows(target.forward(x, /*train=*/false));
        std::vector<int64_t> keep;
        for (int64_t i = 0; i < n; ++i)
            if (before[static_cast<size_t>(i)] == y[static_cast<size_t>(i)]) keep.push_back(i);
        if (keep.empty()) continue;
        std::vector<int> keep_shape = x.shape();
        keep_shape[0] = static_cast<int>(keep.size());
        Tensor xk(keep_shape);
        std::vector<int> yk(keep.size());
        const int64_t row = x.numel() / n;
        for (size_t i = 0; i < keep.size(); ++i) {
            std::copy(x.data() + keep[i] * row, x.data() + (keep[i] + 1) * row,
                      xk.data() + static_cast<int64_t>(i) * row);
            yk[i] = y[static_cast<size_t>(keep[i])];
        }
        const Tensor adv = attack_batch(surrogate, xk, yk, spec, &rng);
        const HardLabelBatch after = argmax_rows(target.forward(adv, /*train=*/false));
        eligible += static_cast<int64_t>(keep.size());
        for (size_t i = 0; i < keep.size(); ++i)
            if (after[i] != yk[i]) ++flipped;
    }
    if (eligible == 0) throw EmptyDataset("target classifies nothing correctly");
    return 100.0 * static_cast<double>(flipped) / static_cast<double>(eligible);
}

double noise_asr(nn::Model& target, const Dataset& data, float eps, int batch_size, Rng& rng,
                 bool clip01) {
    if (data.size() == 0) throw EmptyDataset("noise_asr needs samples");
    int64_t eligible = 0, flipped = 0;
    for (int64_t off = 0; off < data.size(); off += batch_size) {
        const int64_t n = std::min<int64_t>(batch_size, data.size() - off);
        std::vector<int64_t> idx(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = off + i;
        Tensor x = data.gather(idx);
        std::vector<int> y(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) y[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(off + i)];
        const HardLabelBatch before = argmax_rows(target.forward(x, /*train=*/false));
        for (int64_t i = 0; i < x.numel(); ++i)
            x.data()[i] += rng.uniform() < 0.5 ? -eps : eps;
        if (clip01) clamp01_(x);
        const HardLabelBatch after = argmax_rows(target.forward(x, /*train=*/false));
        for (int64_t i = 0; i < n; ++i) {
            if (before[static_cast<size_t>(i)] != y[static_cast<size_t>(i)]) continue;
            ++eligible;
            if (after[static_cast<size_t>(i)] != y[static_cast<size_t>(i)]) ++flipped;
        }
    }
    if (eligible == 0) throw EmptyDataset("target classifies nothing correctly");
    return 100.0 * static_cast<double>(flipped) / static_cast<double>(eligible);
}

} // namespace rsteal
