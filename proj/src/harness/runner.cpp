#include "rsteal/harness/runner.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "rsteal/errors.hpp"
#include "rsteal/serialize.hpp"
#include "rsteal/toyboundary.hpp"

namespace rsteal::harness {

using json = nlohmann::json;

namespace {

Dataset load_split(const ExperimentConfig& cfg, bool train) {
    return load_dataset(cfg.dataset, cfg.data_dir, train,
                        train ? cfg.synth_train : cfg.synth_test);
}

} // namespace

int cmd_train_target(const ExperimentConfig& cfg) {
    Dataset train = load_split(cfg, true);
    Dataset test = load_split(cfg, false);
    if (cfg.train_subset > 0) {
        Rng sub_rng(cfg.seed ^ 0x5ab5e7ull);
        train = subset(train, cfg.train_subset, sub_rng);
    }
    std::printf("training %s on %s (%lld samples, scheme %s)\n", cfg.target.arch.c_str(),
                cfg.dataset.c_str(), static_cast<long long>(train.size()),
                scheme_to_string(cfg.target.scheme).c_str());
    TrainedTarget out = train_target(cfg.target, train, test, [](int epoch, double loss) {
        std::printf("  epoch %d  loss %.4f\n", epoch, loss);
        std::fflush(stdout);
    });
    const std::string dir = cfg.run_dir + "/" + cfg.run_name;
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/target.bin";
    save_target(path, *out.model, cfg.target, out.report);
    write_provenance(dir, cfg.to_json(), cfg.seed);
    std::printf("%s\n%s\nsaved %s\n", EvalReport::csv_header().c_str(),
                out.report.csv_row().c_str(), path.c_str());
    return 0;
}

int cmd_attack(const ExperimentConfig& cfg, bool dry_run) {
    const int64_t budget = query_budget(cfg.attack);
    json resolved = json::parse(cfg.to_json());
    resolved["query_budget"] = budget;
    std::printf("%s\n", resolved.dump(2).c_str());
    if (dry_run) return 0;

    if (cfg.target_path.empty())
        throw ConfigInvalid("target.path: victim checkpoint required for attack");
    nn::ModelPtr victim = load_target(cfg.target_path);
    HardLabelOracle oracle(victim, budget);

    Dataset heldout = load_split(cfg, false);
    Dataset proxy;
    const Dataset* proxy_ptr = nullptr;
    if (cfg.attack.mode == AttackMode::kProxy) {
        proxy = load_split(cfg, true);
        if (cfg.train_subset > 0) {
            Rng sub_rng(cfg.seed ^ 0x5ab5e7ull);
            proxy = subset(proxy, cfg.train_subset, sub_rng);
        }
        proxy_ptr = &proxy;
    }

    const std::string dir = cfg.run_dir + "/" + cfg.run_name;
    Rng rng(cfg.seed);
    write_provenance(dir, cfg.to_json(), cfg.seed);
    AttackResult result =
        run_attack(oracle, cfg.attack, dir, &heldout, proxy_ptr, rng, [](const EpochMetrics& m) {
            if (m.clean_acc)
                std::printf("epoch %d  lr %.5f  ce %.4f  clean %.2f  pgd20 %.2f  queries %lld\n",
                            m.epoch, m.lr, m.train_ce, *m.clean_acc, *m.pgd20_acc,
                            static_cast<long long>(m.queries_used));
            else
                std::printf("epoch %d  lr %.5f  ce %.4f  queries %lld\n", m.epoch, m.lr, m.train_ce,
                            static_cast<long long>(m.queries_used));
            std::fflush(stdout);
        });
    std::printf("epochs %d  queries %lld%s\n", result.epochs_completed,
                static_cast<long long>(result.queries_used),
                result.budget_exhausted ? "  (budget exhausted)" : "");
    std::printf("%s\n%s\n", EvalReport::csv_header().c_str(), result.final_report.csv_row().c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset,
             const std::string& data_dir, int64_t samples, uint64_t seed) {
    nn::ModelPtr model = load_target(model_path);
    Dataset test = load_dataset(dataset, data_dir, false, std::max<int64_t>(samples, 1));
    Rng rng(seed);
    if (samples > 0 && test.size() > samples) test = subset(test, samples, rng);
    const EvalReport report = evaluate(*model, test, standard_eval_suite(), 128, rng);
    std::printf("%s\n%s\n", EvalReport::csv_header().c_str(), report.csv_row().c_str());
    return 0;
}

int cmd_transfer(const std::string& surrogate_path, const std::string& target_path,
                 const std::string& dataset, const std::string& data_dir, int64_t samples,
                 const std::vector<double>& eps_grid, uint64_t seed) {
    nn::ModelPtr surrogate = load_target(surrogate_path);
    nn::ModelPtr target = load_target(target_path);
    Dataset test = load_dataset(dataset, data_dir, false, std::max<int64_t>(samples, 1));
    Rng rng(seed);
    if (samples > 0 && test.size() > samples) test = subset(test, samples, rng);
    std::printf("eps,transfer_asr,noise_asr\n");
    for (const double eps : eps_grid) {
        const auto spec =
            AttackSpec::pgd(20, static_cast<float>(eps), static_cast<float>(eps) / 4.0f);
        Rng craft_rng = rng.fork("craft");
        Rng noise_rng = rng.fork("noise");
        const double asr = transfer_asr(*surrogate, *target, test, spec, 128, craft_rng);
        const double base = noise_asr(*target, test, static_cast<float>(eps), 128, noise_rng);
        std::printf("%.6f,%.2f,%.2f\n", eps, asr, base);
    }
    return 0;
}

int cmd_toy_boundary(const std::string& method, int steps, uint64_t seed,
                     const std::string& out_dir, bool render, int points_per_class) {
    Rng root(seed);
    Rng rng_data = root.fork("data");
    Rng rng_train = root.fork("train");
    const ToyDataset data = make_toy_dataset(points_per_class, rng_data);
    nn::ModelPtr model = train_toy_mlp(data, rng_train);

    std::vector<std::string> methods;
    if (method == "both")
        methods = {"hee", "ue"};
    else if (method == "hee" || method == "ue")
        methods = {method};
    else
        throw ConfigInvalid("--method must be one of hee, ue, both");

    for (const std::string& m : methods) {
        const std::vector<ProbeTrace> sweep = boundary_probe_sweep(*model, data, m, steps);
        emit_figure_data(*model, data, sweep, 200, out_dir + "/" + m, render);
        const CoverageStats stats = coverage_stats(*model, sweep_batches(data.points, sweep));
        std::printf("%s: final mean entropy %.4f, confusion pairs %d, spread %.4f\n", m.c_str(),
                    stats.mean_entropy.back(), stats.confusion_pairs.back(),
                    stats.nn_spread.back());
    }
    std::printf("wrote %s\n", out_dir.c_str());
    return 0;
}

int cmd_table(const std::string& which, const std::string& scale, const std::string& runs_dir,
              const std::string& out_csv) {
    if (which != "query-comparison")
        throw ConfigInvalid("--which: unknown table: " + which);
    std::ostringstream os;
    os << "scale,strategy,clean_acc,robust_acc\n";
    for (const std::string strategy : {"AT", "UE", "AE", "HEE"}) {
        const std::string path = runs_dir + "/" + strategy + "/report.json";
        const json j = json::parse(read_text(path));
        const double clean = j.at("clean_acc").get<double>();
        const double robust = j.at("robust_acc").at("pgd20").get<double>();
        os.setf(std::ios::fixed);
        os.precision(2);
        os << scale << ',' << strategy << ',' << clean << ',' << robust << '\n';
    }
    if (!out_csv.empty()) {
        write_text_atomic(out_csv, os.str());
        std::printf("wrote %s\n", out_csv.c_str());
    }
    std::printf("%s", os.str().c_str());
    return 0;
}

} // namespace rsteal::harness
