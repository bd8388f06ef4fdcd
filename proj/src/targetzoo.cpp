#include "rsteal/targetzoo.hpp"

#include <json.hpp>

#include <cmath>

#include "rsteal/augment.hpp"
#include "rsteal/errors.hpp"
#include "rsteal/kern/kernels.hpp"
#include "rsteal/nn/loss.hpp"
#include "rsteal/nn/optim.hpp"
#include "rsteal/serialize.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

using json = nlohmann::json;

TrainScheme scheme_from_string(const std::string& name) {
    if (name == "standard") return TrainScheme::kStandard;
    if (name == "pgd_at") return TrainScheme::kPgdAt;
    if (name == "trades") return TrainScheme::kTrades;
    throw ConfigInvalid("unknown training scheme: " + name);
}

std::string scheme_to_string(TrainScheme scheme) {
    switch (scheme) {
        case TrainScheme::kStandard: return "standard";
        case TrainScheme::kPgdAt: return "pgd_at";
        case TrainScheme::kTrades: return "trades";
    }
    return "unknown";
}

namespace {

// KL-ascent inner loop of the trades scheme: gaussian jitter start, then
// sign steps on KL(adv || clean-reference), projected onto the eps-ball of
// the clean batch. The clean reference distribution stays frozen.
Tensor trades_inner(nn::Model& model, const Tensor& x, const TargetRecipe& r, Rng& rng) {
    const Tensor clean_ref = model.forward(x, /*train=*/false);
    Tensor adv = x;
    for (int64_t i = 0; i < adv.numel(); ++i)
        adv.data()[i] += 0.001f * static_cast<float>(rng.gaussian());
    clamp01_(adv);
    for (int t = 0; t < r.attack_steps; ++t) {
        Tensor logits = model.forward(adv, /*train=*/false);
        nn::KlOut kl = nn::softmax_kl(logits, clean_ref);
        Tensor grad = model.backward_input(kl.dlogits_a);
        if (!all_finite(grad)) throw DivergedTraining("non-finite inner-attack gradient");
        kern::K().sign_step(r.eta, grad.data(), adv.data(), static_cast<size_t>(adv.numel()));
        kern::K().project_linf(x.data(), r.eps, adv.data(), static_cast<size_t>(adv.numel()));
        clamp01_(adv);
    }
    return adv;
}

} // namespace

TrainedTarget train_target(const TargetRecipe& recipe, const Dataset& train, const Dataset& test,
                           const std::function<void(int, double)>& on_epoch) {
    if (train.size() == 0) throw EmptyDataset("target training needs samples");
    if (recipe.epochs <= 0 || recipe.batch <= 0) throw ConfigInvalid("epochs and batch must be positive");

    Rng root(recipe.seed);
    Rng rng_init = root.fork("init");
    Rng rng_data = root.fork("data");
    Rng rng_aug = root.fork("aug");
    Rng rng_attack = root.fork("attack"); // untouched by the standard scheme
    Rng rng_eval = root.fork("eval");

    nn::ModelPtr model = nn::make_classifier(recipe.arch, train.num_classes, rng_init);
    nn::Sgd sgd(model->params(), recipe.lr0, recipe.momentum, recipe.weight_decay);
    const bool adversarial = recipe.scheme == TrainScheme::kPgdAt ||
                             (recipe.scheme == TrainScheme::kTrades && recipe.trades_beta > 0.0f);

    constexpr double kPi = 3.14159265358979323846;
    for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
        const double lr = recipe.lr0 * (1.0 + std::cos(kPi * epoch / recipe.epochs)) / 2.0;
        sgd.set_lr(static_cast<float>(lr));
        const std::vector<int64_t> order = epoch_order(train.size(), rng_data);
        double epoch_loss = 0.0;
        int64_t steps = 0;

        for (int64_t off = 0; off < train.size(); off += recipe.batch) {
            const int64_t n = std::min<int64_t>(recipe.batch, train.size() - off);
            std::vector<int64_t> idx(order.begin() + off, order.begin() + off + n);
            Tensor x = train.gather(idx);
            std::vector<int> y(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i)
                y[static_cast<size_t>(i)] = train.labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
            StandardAugment aug;
            x = aug.apply(x, rng_aug);

            const auto scheme_step = [&]() -> double {
                if (recipe.scheme == TrainScheme::kPgdAt) {
                    const Tensor adv = attack_batch(
                        *model, x, y,
                        AttackSpec::pgd(recipe.attack_steps, recipe.eps, recipe.eta, true),
                        &rng_attack);
                    Tensor logits = model->forward(adv, /*train=*/true);
                    nn::LossOut ce = nn::softmax_xent_hard(logits, y);
                    model->zero_grads();
                    model->backward(ce.dlogits);
                    return ce.value;
                }
                if (adversarial) { // trades with beta > 0
                    const Tensor adv = trades_inner(*model, x, recipe, rng_attack);
                    Tensor logits_adv = model->forward(adv, /*train=*/true);
                    Tensor logits_clean = model->forward(x, /*train=*/true);
                    nn::LossOut ce = nn::softmax_xent_hard(logits_clean, y);
                    nn::KlOut kl = nn::softmax_kl(logits_adv, logits_clean);
                    model->zero_grads();
                    // Layer caches hold the clean pass: drain its gradient
                    // first, then re-forward the adv branch (stats frozen —
                    // both branches already updated the running estimates
                    // once).
                    Tensor dclean = ce.dlogits;
                    axpy_(static_cast<float>(recipe.trades_beta), kl.dlogits_b, dclean);
                    model->backward(dclean);
                    model->set_stats_frozen(true);
                    (void)model->forward(adv, /*train=*/true);
                    model->set_stats_frozen(false);
                    Tensor dadv = kl.dlogits_a;
                    scale_(static_cast<float>(recipe.trades_beta), dadv);
                    model->backward(dadv);
                    return ce.value + recipe.trades_beta * kl.value;
                }
                // standard, and trades with beta = 0 (inert inner loop)
                Tensor logits = model->forward(x, /*train=*/true);
                nn::LossOut ce = nn::softmax_xent_hard(logits, y);
                model->zero_grads();
                model->backward(ce.dlogits);
                return ce.value;
            };
            double loss;
            try {
                loss = scheme_step();
            } catch (const NonFiniteLoss& e) {
                // The loss layer refuses non-finite values; at training time
                // that is a diverged run, not a bad input.
                throw DivergedTraining(e.what());
            } catch (const NonFiniteGradient& e) {
                throw DivergedTraining(e.what());
            }
            if (!std::isfinite(loss)) throw DivergedTraining("target loss is non-finite");
            sgd.step();
            epoch_loss += loss;
            ++steps;
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(std::max<int64_t>(steps, 1)));
    }

    Dataset eval_set = test;
    if (recipe.eval_samples > 0 && test.size() > recipe.eval_samples)
        eval_set = subset(test, recipe.eval_samples, rng_eval);
    EvalReport report =
        evaluate(*model, eval_set, standard_eval_suite(recipe.eps), recipe.eval_batch, rng_eval);
    return {model, report};
}

void save_target(const std::string& path, nn::Model& model, const TargetRecipe& recipe,
                 const EvalReport& report) {
    save_model(path, model);
    json j;
    j["architecture"] = model.arch();
    j["num_classes"] = model.num_classes();
    json r;
    r["dataset"] = recipe.dataset;
    r["scheme"] = scheme_to_string(recipe.scheme);
    r["trades_beta"] = recipe.trades_beta;
    r["eps"] = recipe.eps;
    r["eta"] = recipe.eta;
    r["attack_steps"] = recipe.attack_steps;
    r["epochs"] = recipe.epochs;
    r["batch"] = recipe.batch;
    r["lr0"] = recipe.lr0;
    r["momentum"] = recipe.momentum;
    r["weight_decay"] = recipe.weight_decay;
    r["seed"] = recipe.seed;
    j["recipe"] = r;
    j["eval"] = json::parse(report.to_json());
    write_text_atomic(path + ".json", j.dump(2) + "\n");
}

nn::ModelPtr load_target(const std::string& path) {
    const json j = json::parse(read_text(path + ".json"));
    Rng scratch(0); // weights are overwritten immediately
    nn::ModelPtr model = nn::make_classifier(j.at("architecture").get<std::string>(),
                                             j.at("num_classes").get<int>(), scratch);
    load_model(path, *model);
    return model;
}

} // namespace rsteal
