#include "rsteal/harness/config.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>

#include "rsteal/errors.hpp"
#include "rsteal/serialize.hpp"

namespace rsteal::harness {

using json = nlohmann::json;

namespace {

bool cifar100_scale(const std::string& dataset) {
    return dataset == "cifar100" || dataset == "synth100";
}

int dataset_classes(const std::string& dataset) {
    return cifar100_scale(dataset) ? 100 : 10;
}

void check(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigInvalid(key + ": " + msg);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

} // namespace

std::string ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["dataset"] = dataset;
    j["data_dir"] = data_dir;
    j["run_dir"] = run_dir;
    j["run_name"] = run_name;
    j["train_subset"] = train_subset;
    j["synth_train"] = synth_train;
    j["synth_test"] = synth_test;
    json t;
    t["arch"] = target.arch;
    t["scheme"] = scheme_to_string(target.scheme);
    t["trades_beta"] = target.trades_beta;
    t["eps"] = target.eps;
    t["eta"] = target.eta;
    t["attack_steps"] = target.attack_steps;
    t["epochs"] = target.epochs;
    t["batch"] = target.batch;
    t["lr0"] = target.lr0;
    t["momentum"] = target.momentum;
    t["weight_decay"] = target.weight_decay;
    t["eval_samples"] = target.eval_samples;
    t["eval_batch"] = target.eval_batch;
    t["path"] = target_path;
    j["target"] = t;
    j["attack"] = json::parse(attack.to_json());
    return j.dump(2) + "\n";
}

ExperimentConfig resolve_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.dataset = get_or<std::string>(j, "dataset", "cifar10");
    check(cfg.dataset == "cifar10" || cfg.dataset == "cifar100" || cfg.dataset == "synth10" ||
              cfg.dataset == "synth100",
          "dataset", "unknown dataset id: " + cfg.dataset);
    const bool big = cifar100_scale(cfg.dataset);
    const int classes = dataset_classes(cfg.dataset);

    cfg.seed = get_or<uint64_t>(j, "seed", 0);
    cfg.data_dir = get_or<std::string>(j, "data_dir", "data");
    cfg.run_dir = get_or<std::string>(j, "run_dir", "runs");
    cfg.run_name = get_or<std::string>(j, "run_name", "run");
    cfg.train_subset = get_or<int64_t>(j, "train_subset", 0);
    cfg.synth_train = get_or<int64_t>(j, "synth_train", 10000);
    cfg.synth_test = get_or<int64_t>(j, "synth_test", 2000);
    if (const char* env = std::getenv("DATA_DIR")) cfg.data_dir = env;
    if (const char* env = std::getenv("RUN_DIR")) cfg.run_dir = env;

    const json t = j.contains("target") ? j.at("target") : json::object();
    cfg.target.arch = get_or<std::string>(t, "arch", "resnet18");
    cfg.target.dataset = cfg.dataset;
    cfg.target.scheme = scheme_from_string(get_or<std::string>(t, "scheme", "pgd_at"));
    cfg.target.trades_beta = get_or<float>(t, "trades_beta", 6.0f);
    cfg.target.eps = get_or<float>(t, "eps", 8.0f / 255.0f);
    cfg.target.eta = get_or<float>(t, "eta", 2.0f / 255.0f);
    cfg.target.attack_steps = get_or<int>(t, "attack_steps", 10);
    cfg.target.epochs = get_or<int>(t, "epochs", 100);
    cfg.target.batch = get_or<int>(t, "batch", 128);
    cfg.target.lr0 = get_or<float>(t, "lr0", 0.1f);
    cfg.target.momentum = get_or<float>(t, "momentum", 0.9f);
    cfg.target.weight_decay = get_or<float>(t, "weight_decay", 1e-4f);
    cfg.target.eval_samples = get_or<int>(t, "eval_samples", 1000);
    cfg.target.eval_batch = get_or<int>(t, "eval_batch", 128);
    cfg.target.seed = cfg.seed;
    cfg.target_path = get_or<std::string>(t, "path", "");

    const json a = j.contains("attack") ? j.at("attack") : json::object();
    TrainConfig& atk = cfg.attack;
    atk.epochs = get_or<int>(a, "epochs", 300);
    atk.batch = get_or<int>(a, "batch", big ? 512 : 256);
    atk.steps_per_epoch = get_or<int>(a, "steps_per_epoch", 500);
    atk.lr0 = get_or<float>(a, "lr0", 0.1f);
    atk.momentum = get_or<float>(a, "momentum", 0.9f);
    atk.weight_decay = get_or<float>(a, "weight_decay", 1e-4f);
    atk.strategy = strategy_from_string(get_or<std::string>(a, "strategy", "HEE"));
    atk.mode = get_or<std::string>(a, "mode", "data_free") == "proxy" ? AttackMode::kProxy
                                                                      : AttackMode::kDataFree;
    atk.clone_arch = get_or<std::string>(a, "clone_arch", "resnet18");
    atk.eps = get_or<float>(a, "eps", 8.0f / 255.0f);
    atk.eta = get_or<float>(a, "eta", 2.0f / 255.0f);
    atk.at_steps = get_or<int>(a, "at_steps", 7);
    atk.eval_every = get_or<int>(a, "eval_every", 10);
    atk.eval_samples = get_or<int>(a, "eval_samples", 1000);
    atk.eval_batch = get_or<int>(a, "eval_batch", 128);
    atk.seed = cfg.seed;

    const json p = a.contains("probe") ? a.at("probe") : json::object();
    ProbeConfig preset = probe_preset(strategy_to_string(atk.strategy) == "UE" ? "UE" : "HEE");
    const std::string objective = get_or<std::string>(
        p, "objective",
        preset.objective == ProbeObjective::kEntropyMax ? "entropy_max" : "kl_uniform_min");
    check(objective == "entropy_max" || objective == "kl_uniform_min" || objective == "ce_max",
          "attack.probe.objective", "unknown objective: " + objective);
    atk.probe.objective = objective == "entropy_max" ? ProbeObjective::kEntropyMax
                          : objective == "kl_uniform_min" ? ProbeObjective::kKlUniformMin
                                                          : ProbeObjective::kCeMax;
    atk.probe.constrained = get_or<bool>(p, "constrained", preset.constrained);
    atk.probe.eps = get_or<float>(p, "eps", preset.eps);
    atk.probe.alpha = get_or<float>(p, "alpha", preset.alpha);
    atk.probe.steps = get_or<int>(p, "steps", preset.steps);
    atk.probe.random_start = get_or<bool>(p, "random_start", preset.random_start);

    const json s = a.contains("synthesis") ? a.at("synthesis") : json::object();
    SynthesisConfig& syn = atk.synthesis;
    syn.batch = atk.batch;
    syn.classes = classes;
    syn.latent_dim = get_or<int>(s, "latent_dim", 256);
    syn.gen_iters = get_or<int>(s, "gen_iters", big ? 15 : 10);
    syn.lr_gen = get_or<float>(s, "lr_gen", big ? 0.005f : 0.002f);
    syn.lr_z = get_or<float>(s, "lr_z", big ? 0.015f : 0.01f);
    syn.lambda_div = get_or<float>(s, "lambda_div", 3.0f);
    syn.smooth = get_or<float>(s, "smooth", big ? 0.02f : 0.2f);
    syn.base_channels = get_or<int>(s, "base_channels", 128);
    syn.full_reinit = get_or<bool>(s, "full_reinit", false);

    check(nn::is_known_arch(cfg.target.arch), "target.arch", "unknown architecture: " + cfg.target.arch);
    check(nn::is_known_arch(atk.clone_arch), "attack.clone_arch",
          "unknown architecture: " + atk.clone_arch);
    check(cfg.target.epochs > 0, "target.epochs", "must be positive");
    check(cfg.target.batch > 0, "target.batch", "must be positive");
    check(cfg.target.attack_steps >= 0, "target.attack_steps", "must be >= 0");
    check(cfg.target.eps >= 0.0f, "target.eps", "must be >= 0");
    check(cfg.target.lr0 > 0.0f, "target.lr0", "must be positive");
    check(cfg.target.trades_beta >= 0.0f, "target.trades_beta", "must be >= 0");
    check(atk.epochs > 0, "attack.epochs", "must be positive");
    check(atk.batch > 0, "attack.batch", "must be positive");
    check(atk.steps_per_epoch > 0, "attack.steps_per_epoch", "must be positive");
    check(atk.lr0 > 0.0f, "attack.lr0", "must be positive");
    check(atk.eval_every > 0, "attack.eval_every", "must be positive");
    check(atk.eps >= 0.0f, "attack.eps", "must be >= 0");
    check(atk.eta >= 0.0f, "attack.eta", "must be >= 0");
    check(atk.at_steps >= 0, "attack.at_steps", "must be >= 0");
    check(atk.probe.alpha > 0.0f, "attack.probe.alpha", "must be positive");
    check(atk.probe.steps >= 0, "attack.probe.steps", "must be >= 0");
    check(atk.probe.eps >= 0.0f, "attack.probe.eps", "must be >= 0");
    check(syn.latent_dim > 0, "attack.synthesis.latent_dim", "must be positive");
    check(syn.gen_iters >= 0, "attack.synthesis.gen_iters", "must be >= 0");
    check(syn.lr_gen > 0.0f, "attack.synthesis.lr_gen", "must be positive");
    check(syn.lr_z > 0.0f, "attack.synthesis.lr_z", "must be positive");
    check(syn.lambda_div >= 0.0f, "attack.synthesis.lambda_div", "diversity weight must be >= 0");
    check(syn.smooth >= 0.0f && syn.smooth < 1.0f, "attack.synthesis.smooth",
          "smoothing factor must lie in [0,1)");
    check(syn.base_channels >= 8, "attack.synthesis.base_channels", "must be >= 8");
    check(cfg.train_subset >= 0, "train_subset", "must be >= 0");
    check(cfg.synth_train > 0, "synth_train", "must be positive");
    check(cfg.synth_test > 0, "synth_test", "must be positive");
    return cfg;
}

ExperimentConfig resolve_config_file(const std::string& path) {
    return resolve_config(read_text(path));
}

int64_t query_budget(const TrainConfig& cfg) {
    return static_cast<int64_t>(cfg.epochs) * cfg.batch * cfg.steps_per_epoch;
}

std::string config_hash(const std::string& resolved_json) {
    uint64_t h = 1469598103934665603ull;
    for (const char c : resolved_json) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string git_commit() {
    std::array<char, 64> buf{};
    FILE* pipe = popen("git rev-parse HEAD 2>/dev/null", "r");
    if (!pipe) return "unknown";
    std::string out;
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

} // namespace

void write_provenance(const std::string& dir, const std::string& resolved_json, uint64_t seed) {
    std::filesystem::create_directories(dir);
    json j;
    j["git_commit"] = git_commit();
    j["config_hash"] = config_hash(resolved_json);
    j["seed"] = seed;
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    j["started_at"] = stamp;
    write_text_atomic(dir + "/provenance.json", j.dump(2) + "\n");
}

} // namespace rsteal::harness
