#include "rsteal/clonetrain.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsteal/augment.hpp"
#include "rsteal/errors.hpp"
#include "rsteal/nn/loss.hpp"
#include "rsteal/serialize.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

using json = nlohmann::json;

Strategy strategy_from_string(const std::string& name) {
    if (name == "HEE") return Strategy::kHee;
    if (name == "UE") return Strategy::kUe;
    if (name == "AE") return Strategy::kAe;
    if (name == "AT") return Strategy::kAt;
    throw ConfigInvalid("unknown strategy: " + name);
}

std::string strategy_to_string(Strategy s) {
    switch (s) {
        case Strategy::kHee: return "HEE";
        case Strategy::kUe: return "UE";
        case Strategy::kAe: return "AE";
        case Strategy::kAt: return "AT";
    }
    return "unknown";
}

double cosine_lr(int epoch, int total_epochs, double lr0) {
    if (total_epochs <= 0) throw ConfigInvalid("total_epochs must be positive");
    constexpr double kPi = 3.14159265358979323846;
    return lr0 * (1.0 + std::cos(kPi * static_cast<double>(epoch) / total_epochs)) / 2.0;
}

std::string TrainConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["batch"] = batch;
    j["steps_per_epoch"] = steps_per_epoch;
    j["lr0"] = lr0;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["strategy"] = strategy_to_string(strategy);
    j["mode"] = mode == AttackMode::kDataFree ? "data_free" : "proxy";
    j["clone_arch"] = clone_arch;
    json p;
    p["objective"] = probe.objective == ProbeObjective::kEntropyMax ? "entropy_max"
                     : probe.objective == ProbeObjective::kKlUniformMin ? "kl_uniform_min"
                                                                        : "ce_max";
    p["constrained"] = probe.constrained;
    p["eps"] = probe.eps;
    p["alpha"] = probe.alpha;
    p["steps"] = probe.steps;
    p["random_start"] = probe.random_start;
    j["probe"] = p;
    json s;
    s["batch"] = synthesis.batch;
    s["classes"] = synthesis.classes;
    s["latent_dim"] = synthesis.latent_dim;
    s["gen_iters"] = synthesis.gen_iters;
    s["lr_gen"] = synthesis.lr_gen;
    s["lr_z"] = synthesis.lr_z;
    s["lambda_div"] = synthesis.lambda_div;
    s["smooth"] = synthesis.smooth;
    s["base_channels"] = synthesis.base_channels;
    s["full_reinit"] = synthesis.full_reinit;
    j["synthesis"] = s;
    j["eps"] = eps;
    j["eta"] = eta;
    j["at_steps"] = at_steps;
    j["eval_every"] = eval_every;
    j["eval_samples"] = eval_samples;
    j["eval_batch"] = eval_batch;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch = j.at("batch").get<int>();
    c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
    c.lr0 = j.at("lr0").get<float>();
    c.momentum = j.at("momentum").get<float>();
    c.weight_decay = j.at("weight_decay").get<float>();
    c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    c.mode = j.at("mode").get<std::string>() == "proxy" ? AttackMode::kProxy : AttackMode::kDataFree;
    c.clone_arch = j.at("clone_arch").get<std::string>();
    const json& p = j.at("probe");
    const std::string obj = p.at("objective").get<std::string>();
    c.probe.objective = obj == "entropy_max" ? ProbeObjective::kEntropyMax
                        : obj == "kl_uniform_min" ? ProbeObjective::kKlUniformMin
                                                  : ProbeObjective::kCeMax;
    c.probe.constrained = p.at("constrained").get<bool>();
    c.probe.eps = p.at("eps").get<float>();
    c.probe.alpha = p.at("alpha").get<float>();
    c.probe.steps = p.at("steps").get<int>();
    c.probe.random_start = p.at("random_start").get<bool>();
    const json& s = j.at("synthesis");
    c.synthesis.batch = s.at("batch").get<int>();
    c.synthesis.classes = s.at("classes").get<int>();
    c.synthesis.latent_dim = s.at("latent_dim").get<int>();
    c.synthesis.gen_iters = s.at("gen_iters").get<int>();
    c.synthesis.lr_gen = s.at("lr_gen").get<float>();
    c.synthesis.lr_z = s.at("lr_z").get<float>();
    c.synthesis.lambda_div = s.at("lambda_div").get<float>();
    c.synthesis.smooth = s.at("smooth").get<float>();
    c.synthesis.base_channels = s.at("base_channels").get<int>();
    c.synthesis.full_reinit = s.at("full_reinit").get<bool>();
    c.eps = j.at("eps").get<float>();
    c.eta = j.at("eta").get<float>();
    c.at_steps = j.at("at_steps").get<int>();
    c.eval_every = j.at("eval_every").get<int>();
    c.eval_samples = j.at("eval_samples").get<int>();
    c.eval_batch = j.at("eval_batch").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

double clone_step(nn::Model& clone, const MemoryBank& bank, HardLabelOracle& oracle,
                  const TrainConfig& cfg, nn::Sgd& opt, Rng& rng, StepTrace* trace) {
    const Tensor sampled = bank.sample(cfg.batch, rng);
    const Tensor views = strong_augment(sampled, rng);

    Tensor fitted{std::vector<int>{0}};
    Tensor queried{std::vector<int>{0}};
    HardLabelBatch labels;
    switch (cfg.strategy) {
        case Strategy::kHee:
        case Strategy::kUe: {
            fitted = construct_probe(clone, views, cfg.probe, nullptr, &rng).final_batch;
            queried = fitted;
            labels = oracle.query_hard_labels(queried);
            break;
        }
        case Strategy::kAe: {
            const HardLabelBatch pseudo = oracle.query_hard_labels(views);
            fitted = attack_batch(clone, views, pseudo,
                                  AttackSpec::pgd(cfg.at_steps, cfg.eps, cfg.eta, true), &rng);
            queried = fitted;
            labels = oracle.query_hard_labels(queried); // second charge
            break;
        }
        case Strategy::kAt: {
            queried = views;
            labels = oracle.query_hard_labels(queried);
            fitted = attack_batch(clone, views, labels,
                                  AttackSpec::pgd(cfg.at_steps, cfg.eps, cfg.eta, true), &rng);
            break;
        }
    }

    Tensor logits = clone.forward(fitted, /*train=*/true);
    nn::LossOut ce = nn::softmax_xent_hard(logits, labels);
    if (!std::isfinite(ce.value)) throw NonFiniteLoss("clone step loss is non-finite");
    clone.zero_grads();
    clone.backward(ce.dlogits);
    opt.step();

    if (trace) {
        trace->sampled = sampled;
        trace->augmented = views;
        trace->queried = queried;
        trace->fitted = fitted;
        trace->labels = labels;
    }
    return ce.value;
}

namespace {

std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << *v;
    return os.str();
}

void append_metrics(const std::string& path, const EpochMetrics& m, bool header) {
    std::ofstream f(path, header ? std::ios::trunc : std::ios::app);
    if (!f) throw IOFailure("cannot open for write: " + path);
    if (header) f << "epoch,lr,train_ce,clean_acc,pgd20_acc,queries_used\n";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(6);
    os << m.epoch << ',' << m.lr << ',' << m.train_ce << ',' << fmt_metric(m.clean_acc) << ','
       << fmt_metric(m.pgd20_acc) << ',' << m.queries_used << '\n';
    f << os.str();
}

} // namespace

AttackResult run_attack(HardLabelOracle& oracle, const TrainConfig& cfg,
                        const std::string& run_dir, const Dataset* heldout,
                        const Dataset* proxy, Rng& rng,
                        const std::function<void(const EpochMetrics&)>& on_epoch) {
    namespace fs = std::filesystem;
    if (cfg.epochs <= 0 || cfg.batch <= 0 || cfg.steps_per_epoch <= 0)
        throw ConfigInvalid("epochs, batch and steps_per_epoch must be positive");
    fs::create_directories(run_dir);
    write_text_atomic(run_dir + "/config.json", cfg.to_json());

    Rng rng_init = rng.fork("clone_init");
    Rng rng_gen = rng.fork("datagen");
    Rng rng_step = rng.fork("steps");
    Rng rng_eval = rng.fork("eval");

    AttackResult result;
    result.clone = nn::make_classifier(cfg.clone_arch, oracle.num_classes(), rng_init);
    nn::Sgd opt(result.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);

    MemoryBank bank;
    GeneratorState gen;
    if (cfg.mode == AttackMode::kDataFree) {
        gen = init_generator_state(cfg.synthesis, rng_gen);
    } else {
        if (proxy == nullptr || proxy->size() == 0)
            throw EmptyDataset("proxy mode needs a proxy dataset");
        bank.append(proxy->images);
    }

    Dataset eval_set;
    if (heldout != nullptr && heldout->size() > 0) {
        eval_set = *heldout;
        if (cfg.eval_samples > 0 && eval_set.size() > cfg.eval_samples)
            eval_set = subset(eval_set, cfg.eval_samples, rng_eval);
    }
    const std::vector<AttackSpec> heldout_suite{AttackSpec::pgd(20, cfg.eps, cfg.eps / 4.0f)};

    auto checkpoint = [&](const std::string& name) {
        save_model(run_dir + "/" + name, *result.clone);
        bank.persist(run_dir + "/bank");
        write_text_atomic(run_dir + "/ledger.json", oracle.ledger().to_json());
    };

    bool first_row = true;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr0);
        opt.set_lr(static_cast<float>(lr));

        double ce_sum = 0.0;
        int steps_done = 0;
        try {
            if (cfg.mode == AttackMode::kDataFree)
                bank.append(generate_substitute_batch(gen, *result.clone, cfg.synthesis, rng_gen));
            for (int s = 0; s < cfg.steps_per_epoch; ++s) {
                ce_sum += clone_step(*result.clone, bank, oracle, cfg, opt, rng_step);
                ++steps_done;
            }
        } catch (const BudgetExhausted&) {
            result.budget_exhausted = true;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.train_ce = steps_done > 0 ? ce_sum / steps_done : 0.0;
        m.queries_used = oracle.ledger().queries_used();

        const bool last = result.budget_exhausted || epoch + 1 == cfg.epochs;
        if (eval_set.size() > 0 && (epoch % cfg.eval_every == cfg.eval_every - 1 || last)) {
            const EvalReport r =
                evaluate(*result.clone, eval_set, heldout_suite, cfg.eval_batch, rng_eval);
            m.clean_acc = r.clean_acc;
            m.pgd20_acc = r.robust("pgd20");
            if (r.clean_acc >= result.best_clean_acc) {
                result.best_clean_acc = r.clean_acc;
                checkpoint("ckpt_best.bin");
            }
        }
        if (epoch % cfg.eval_every == cfg.eval_every - 1 || last)
            checkpoint("ckpt_" + std::to_string(epoch) + ".bin");

        append_metrics(run_dir + "/metrics.csv", m, first_row);
        first_row = false;
        result.history.push_back(m);
        result.epochs_completed = epoch + 1;
        if (on_epoch) on_epoch(m);
        if (result.budget_exhausted) break;
    }

    result.queries_used = oracle.ledger().queries_used();
    if (eval_set.size() > 0) {
        result.final_report =
            evaluate(*result.clone, eval_set, standard_eval_suite(cfg.eps), cfg.eval_batch, rng_eval);
        write_text_atomic(run_dir + "/report.json", result.final_report.to_json());
    }
    write_text_atomic(run_dir + "/ledger.json", oracle.ledger().to_json());
    return result;
}

} // namespace rsteal
