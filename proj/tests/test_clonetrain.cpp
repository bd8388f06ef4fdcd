#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "rsteal/clonetrain.hpp"
#include "rsteal/dataset.hpp"
#include "rsteal/errors.hpp"
#include "rsteal/serialize.hpp"

using namespace rsteal;

namespace {

std::string tmp_dir(const char* leaf) {
    const auto d = std::filesystem::temp_directory_path() / "rsteal_test_clonetrain" / leaf;
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d.string();
}

bool same_tensor(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(float) * a.numel()) == 0;
}

// Desk-scale step setup: tiny nets, tiny batches, short probes. The point
// here is wiring (who gets queried, who gets fitted, what gets charged),
// not learning curves.
TrainConfig step_cfg(Strategy s) {
    TrainConfig cfg;
    cfg.batch = 8;
    cfg.strategy = s;
    cfg.clone_arch = "smallcnn";
    cfg.probe = probe_preset(s == Strategy::kUe ? "UE" : "HEE");
    cfg.probe.steps = 2;
    cfg.at_steps = 2;
    return cfg;
}

struct StepRig {
    nn::ModelPtr clone;
    nn::ModelPtr victim;
    MemoryBank bank;

    explicit StepRig(uint64_t seed) {
        Rng r(seed);
        Rng rc = r.fork("clone");
        Rng rv = r.fork("victim");
        clone = nn::make_classifier("smallcnn", 10, rc);
        victim = nn::make_classifier("smallcnn", 10, rv);
        bank.append(make_synthetic(32, 10, 19).images);
    }
};

// Small but real data-free configuration for run_attack: two epochs, two
// steps each, a narrow generator.
TrainConfig run_cfg() {
    TrainConfig cfg = step_cfg(Strategy::kHee);
    cfg.epochs = 2;
    cfg.steps_per_epoch = 2;
    cfg.synthesis.batch = 16;
    cfg.synthesis.classes = 10;
    cfg.synthesis.latent_dim = 16;
    cfg.synthesis.gen_iters = 1;
    cfg.synthesis.base_channels = 8;
    cfg.eval_every = 1;
    cfg.eval_samples = 16;
    cfg.eval_batch = 8;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("cosine schedule hits its anchor points") {
    CHECK(cosine_lr(0, 300, 0.1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(cosine_lr(75, 300, 0.1) == doctest::Approx(0.08535533905932738).epsilon(1e-12));
    CHECK(cosine_lr(150, 300, 0.1) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(cosine_lr(299, 300, 0.1) == doctest::Approx(2.741531724392843e-06).epsilon(1e-9));
    CHECK_THROWS_AS(cosine_lr(0, 0, 0.1), ConfigInvalid);
    CHECK_THROWS_AS(cosine_lr(0, -3, 0.1), ConfigInvalid);
}

TEST_CASE("strategy names round-trip and unknowns are refused") {
    for (Strategy s : {Strategy::kHee, Strategy::kUe, Strategy::kAe, Strategy::kAt})
        CHECK(strategy_from_string(strategy_to_string(s)) == s);
    CHECK(strategy_to_string(Strategy::kAe) == "AE");
    CHECK_THROWS_AS(strategy_from_string("JBDA"), ConfigInvalid);
}

TEST_CASE("config serialization reaches a fixed point") {
    TrainConfig cfg;
    cfg.epochs = 17;
    cfg.batch = 96;
    cfg.steps_per_epoch = 12;
    cfg.lr0 = 0.25f;
    cfg.strategy = Strategy::kAe;
    cfg.mode = AttackMode::kProxy;
    cfg.clone_arch = "mobilenetv2";
    cfg.probe = probe_preset("UE");
    cfg.synthesis.batch = 512;
    cfg.synthesis.smooth = 0.02f;
    cfg.synthesis.full_reinit = true;
    cfg.at_steps = 3;
    cfg.seed = 99;

    const std::string once = cfg.to_json();
    const TrainConfig back = TrainConfig::from_json(once);
    CHECK(back.to_json() == once);
    CHECK(back.epochs == 17);
    CHECK(back.strategy == Strategy::kAe);
    CHECK(back.mode == AttackMode::kProxy);
    CHECK(back.probe.objective == ProbeObjective::kKlUniformMin);
    CHECK(back.synthesis.full_reinit == true);
    CHECK(back.seed == 99);
}

TEST_CASE("each strategy charges the ledger its own rate") {
    // HEE, UE and AT send one batch to the oracle per step; AE pays twice
    // (pseudo-labels on the clean views, then labels for the crafted set).
    const struct {
        Strategy s;
        int64_t per_step;
    } rates[] = {
        {Strategy::kHee, 8},
        {Strategy::kUe, 8},
        {Strategy::kAt, 8},
        {Strategy::kAe, 16},
    };
    for (const auto& rate : rates) {
        CAPTURE(strategy_to_string(rate.s));
        StepRig rig(100);
        HardLabelOracle oracle(rig.victim);
        TrainConfig cfg = step_cfg(rate.s);
        nn::Sgd opt(rig.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
        Rng rng(7);
        clone_step(*rig.clone, rig.bank, oracle, cfg, opt, rng);
        CHECK(oracle.ledger().queries_used() == rate.per_step);
        clone_step(*rig.clone, rig.bank, oracle, cfg, opt, rng);
        CHECK(oracle.ledger().queries_used() == 2 * rate.per_step);
    }
}

TEST_CASE("probe strategies query what they fit; AT fits what it never queried") {
    StepRig rig(101);
    Rng rng(11);

    SUBCASE("HEE sends the probe batch to the oracle unchanged") {
        HardLabelOracle oracle(rig.victim);
        TrainConfig cfg = step_cfg(Strategy::kHee);
        nn::Sgd opt(rig.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
        StepTrace tr;
        clone_step(*rig.clone, rig.bank, oracle, cfg, opt, rng, &tr);
        CHECK(same_tensor(tr.queried, tr.fitted));
        CHECK_FALSE(same_tensor(tr.queried, tr.augmented)); // the probe moved
        CHECK(tr.labels.size() == 8);
    }

    SUBCASE("AT queries the clean views and fits their adversarial versions") {
        HardLabelOracle oracle(rig.victim);
        TrainConfig cfg = step_cfg(Strategy::kAt);
        nn::Sgd opt(rig.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
        StepTrace tr;
        clone_step(*rig.clone, rig.bank, oracle, cfg, opt, rng, &tr);
        CHECK(same_tensor(tr.queried, tr.augmented));
        CHECK_FALSE(same_tensor(tr.fitted, tr.queried));
        // The crafted set stays inside the AT ball around the clean views.
        const float* f = tr.fitted.data();
        const float* q = tr.queried.data();
        float max_delta = 0.0f;
        for (int64_t i = 0; i < tr.fitted.numel(); ++i)
            max_delta = std::max(max_delta, std::abs(f[i] - q[i]));
        CHECK(max_delta <= cfg.eps + 1e-6f);
        CHECK(max_delta > 0.0f);
    }

    SUBCASE("AE re-queries its crafted batch") {
        HardLabelOracle oracle(rig.victim);
        TrainConfig cfg = step_cfg(Strategy::kAe);
        nn::Sgd opt(rig.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
        StepTrace tr;
        clone_step(*rig.clone, rig.bank, oracle, cfg, opt, rng, &tr);
        CHECK(same_tensor(tr.queried, tr.fitted));
        CHECK_FALSE(same_tensor(tr.queried, tr.augmented));
        CHECK(oracle.ledger().queries_used() == 16);
    }
}

TEST_CASE("a step is a deterministic function of the draw state") {
    StepRig a(102);
    StepRig b(102);
    HardLabelOracle oa(a.victim);
    HardLabelOracle ob(b.victim);
    const TrainConfig cfg = step_cfg(Strategy::kUe);
    nn::Sgd opt_a(a.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
    nn::Sgd opt_b(b.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
    Rng ra(13);
    Rng rb(13);

    StepTrace ta;
    StepTrace tb;
    const double ca = clone_step(*a.clone, a.bank, oa, cfg, opt_a, ra, &ta);
    const double cb = clone_step(*b.clone, b.bank, ob, cfg, opt_b, rb, &tb);
    CHECK(ca == cb);
    CHECK(same_tensor(ta.sampled, tb.sampled));
    CHECK(same_tensor(ta.fitted, tb.fitted));
    CHECK(ta.labels == tb.labels);
}

TEST_CASE("a step refuses an empty bank") {
    StepRig rig(103);
    MemoryBank empty;
    HardLabelOracle oracle(rig.victim);
    TrainConfig cfg = step_cfg(Strategy::kHee);
    nn::Sgd opt(rig.clone->params(), cfg.lr0, cfg.momentum, cfg.weight_decay);
    Rng rng(17);
    CHECK_THROWS_AS(clone_step(*rig.clone, empty, oracle, cfg, opt, rng), EmptyBank);
    CHECK(oracle.ledger().queries_used() == 0);
}

TEST_CASE("data-free run writes the full directory contract") {
    const std::string dir = tmp_dir("datafree");
    const TrainConfig cfg = run_cfg();
    StepRig rig(104);
    HardLabelOracle oracle(rig.victim);
    const Dataset heldout = make_synthetic(32, 10, 91);
    Rng rng(cfg.seed);

    const AttackResult res = run_attack(oracle, cfg, dir, &heldout, nullptr, rng);

    CHECK(res.epochs_completed == 2);
    CHECK_FALSE(res.budget_exhausted);
    // HEE pays one query per fitted sample: E * N_C * B.
    CHECK(res.queries_used == 2 * 2 * 8);
    CHECK(oracle.ledger().queries_used() == res.queries_used);

    REQUIRE(res.history.size() == 2);
    for (int e = 0; e < 2; ++e) {
        CHECK(res.history[e].epoch == e);
        CHECK(res.history[e].lr == doctest::Approx(cosine_lr(e, cfg.epochs, cfg.lr0)));
        CHECK(res.history[e].clean_acc.has_value()); // eval_every = 1
        CHECK(res.history[e].pgd20_acc.has_value());
        CHECK(std::isfinite(res.history[e].train_ce));
    }
    CHECK(res.history[0].queries_used == 16);
    CHECK(res.history[1].queries_used == 32);

    // On-disk contract.
    CHECK(TrainConfig::from_json(read_text(dir + "/config.json")).to_json() == cfg.to_json());
    const QueryLedger ledger = QueryLedger::from_json(read_text(dir + "/ledger.json"));
    CHECK(ledger.queries_used() == res.queries_used);
    CHECK(std::filesystem::exists(dir + "/metrics.csv"));
    CHECK(std::filesystem::exists(dir + "/report.json"));
    CHECK(std::filesystem::exists(dir + "/ckpt_0.bin"));
    CHECK(std::filesystem::exists(dir + "/ckpt_1.bin"));
    CHECK(std::filesystem::exists(dir + "/ckpt_best.bin"));

    const std::string csv = read_text(dir + "/metrics.csv");
    CHECK(csv.rfind("epoch,lr,train_ce,clean_acc,pgd20_acc,queries_used\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3); // header + one row per epoch

    // The bank holds one synthesized batch per epoch.
    const MemoryBank bank = MemoryBank::load(dir + "/bank");
    CHECK(bank.epochs_recorded() == 2);
    CHECK(bank.size() == 2 * cfg.synthesis.batch);
    CHECK(bank.image_shape() == std::vector<int>{3, 32, 32});

    CHECK(res.final_report.n_samples == 16);
    CHECK(res.final_report.robust_acc.size() == 4);
}

TEST_CASE("proxy mode seeds the bank once and never synthesizes") {
    const std::string dir = tmp_dir("proxy");
    TrainConfig cfg = run_cfg();
    cfg.mode = AttackMode::kProxy;
    StepRig rig(105);
    HardLabelOracle oracle(rig.victim);
    const Dataset proxy = make_synthetic(24, 10, 77);
    Rng rng(cfg.seed);

    const AttackResult res = run_attack(oracle, cfg, dir, nullptr, &proxy, rng);
    CHECK(res.epochs_completed == 2);
    // No heldout set: metrics carry no accuracy columns and no report exists.
    CHECK_FALSE(res.history[0].clean_acc.has_value());
    CHECK(res.final_report.n_samples == 0);
    CHECK_FALSE(std::filesystem::exists(dir + "/report.json"));

    const MemoryBank bank = MemoryBank::load(dir + "/bank");
    CHECK(bank.epochs_recorded() == 1);
    CHECK(bank.size() == 24);
}

TEST_CASE("an exhausted budget checkpoints and stops instead of crashing") {
    const std::string dir = tmp_dir("budget");
    TrainConfig cfg = run_cfg();
    cfg.epochs = 5;
    cfg.steps_per_epoch = 4;
    // Epoch 0 costs 32 queries; the budget dies one step into epoch 1.
    StepRig rig(106);
    HardLabelOracle oracle(rig.victim, 40);
    const Dataset heldout = make_synthetic(32, 10, 92);
    Rng rng(cfg.seed);

    const AttackResult res = run_attack(oracle, cfg, dir, &heldout, nullptr, rng);
    CHECK(res.budget_exhausted);
    CHECK(res.epochs_completed == 2);
    CHECK(res.queries_used == 40);
    CHECK(res.history.size() == 2);
    CHECK(res.history[1].queries_used == 40);

    // The truncated epoch still checkpoints and the ledger on disk is exact.
    CHECK(std::filesystem::exists(dir + "/ckpt_1.bin"));
    const QueryLedger ledger = QueryLedger::from_json(read_text(dir + "/ledger.json"));
    CHECK(ledger.queries_used() == 40);
    CHECK(ledger.budget() == 40);
    CHECK(ledger.remaining() == 0);
}

TEST_CASE("run_attack validates its inputs") {
    StepRig rig(107);
    HardLabelOracle oracle(rig.victim);
    Rng rng(1);
    TrainConfig bad = run_cfg();
    bad.epochs = 0;
    CHECK_THROWS_AS(run_attack(oracle, bad, tmp_dir("bad1"), nullptr, nullptr, rng), ConfigInvalid);

    TrainConfig noproxy = run_cfg();
    noproxy.mode = AttackMode::kProxy;
    CHECK_THROWS_AS(run_attack(oracle, noproxy, tmp_dir("bad2"), nullptr, nullptr, rng),
                    EmptyDataset);
}
