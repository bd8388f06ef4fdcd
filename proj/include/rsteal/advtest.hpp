#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rsteal/dataset.hpp"
#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

enum class AttackKind { kFgsm, kPgd, kCwPgd };

// Measurement-side attack description. Evaluation attacks run white-box on
// whichever model they are given and never touch a query ledger.
struct AttackSpec {
    AttackKind kind = AttackKind::kPgd;
    float eps = 8.0f / 255.0f;
    float eta = 2.0f / 255.0f; // per-step size (FGSM uses eps in one step)
    int steps = 20;
    bool random_start = true;
    bool clip01 = true; // image-domain box; the raw 2D plane turns it off

    static AttackSpec fgsm(float eps = 8.0f / 255.0f);
    static AttackSpec pgd(int steps, float eps = 8.0f / 255.0f, float eta = 2.0f / 255.0f,
                          bool random_start = true);
    static AttackSpec cw_pgd(int steps, float eps = 8.0f / 255.0f, float eta = 2.0f / 255.0f,
                             bool random_start = true);

    std::string name() const; // "fgsm", "pgd20", "cw100", ...
};

struct EvalReport {
    double clean_acc = 0.0;                                  // percent
    std::vector<std::pair<std::string, double>> robust_acc;  // percent, per attack name
    int64_t n_samples = 0;

    double robust(const std::string& name) const; // NaN when absent
    // Worst case over the pgd100/cw100 entries; NaN until both are present.
    double aa_surrogate() const;
    std::string to_json() const;
    static std::string csv_header(); // clean_acc,fgsm,pgd20,pgd100,cw100,aa_surrogate
    std::string csv_row() const;
};

// Crafts adversarial examples for the batch under the spec's threat model.
// FGSM is PGD with steps=1, eta=eps, no random start — same code path, so
// the equivalence is exact. CW_PGD runs the margin objective (kappa=0)
// inside the same projected loop.
Tensor attack_batch(nn::Model& model, const Tensor& x, const std::vector<int>& y,
                    const AttackSpec& spec, Rng* rng = nullptr);

// The four-attack battery behind the standard report columns.
std::vector<AttackSpec> standard_eval_suite(float eps = 8.0f / 255.0f);

// Clean + per-attack robust accuracy over the dataset, batched.
EvalReport evaluate(nn::Model& model, const Dataset& data,
                    const std::vector<AttackSpec>& specs, int batch_size, Rng& rng);

// Crafts white-box on `surrogate` from samples `target` currently classifies
// correctly; returns the fraction of those that transfer (target flips to a
// wrong label), in percent.
double transfer_asr(nn::Model& surrogate, nn::Model& target, const Dataset& data,
                    const AttackSpec& spec, int batch_size, Rng& rng);

// Matched random baseline for transfer_asr: same eligible samples, but the
// perturbation is eps * sign(uniform noise) instead of a crafted one.
double noise_asr(nn::Model& target, const Dataset& data, float eps, int batch_size, Rng& rng,
                 bool clip01 = true);

} // namespace rsteal
