#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "rsteal/advtest.hpp"
#include "rsteal/errors.hpp"
#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor_ops.hpp"
#include "rsteal/toyboundary.hpp"

using namespace rsteal;

namespace {

// Shared trained 2D fixture; tests here exercise attack semantics, not
// image-scale models.
struct Fixture {
    ToyDataset data;
    nn::ModelPtr model;
    Dataset as_dataset; // toy points rebadged as a Dataset for evaluate()
};

const Fixture& fx() {
    static Fixture f = [] {
        Rng rng(302);
        Fixture out;
        out.data = make_toy_dataset(60, rng);
        out.model = train_toy_mlp(out.data, rng);
        out.as_dataset.images = out.data.points;
        out.as_dataset.labels = out.data.labels;
        out.as_dataset.num_classes = ToyDataset::kClasses;
        out.as_dataset.id = "toy";
        return out;
    }();
    return f;
}

// Toy points live on the raw plane; scale the threat model up with them and
// drop the image-domain box clip.
constexpr float kEps = 0.5f;

AttackSpec plane(AttackSpec s) {
    s.clip01 = false;
    return s;
}

} // namespace

TEST_CASE("spec factories pin the documented shapes") {
    AttackSpec f = AttackSpec::fgsm(0.1f);
    CHECK(f.kind == AttackKind::kFgsm);
    CHECK(f.eps == doctest::Approx(0.1f));
    CHECK(f.eta == doctest::Approx(0.1f));
    CHECK(f.steps == 1);
    CHECK_FALSE(f.random_start);
    CHECK(f.name() == "fgsm");

    AttackSpec p = AttackSpec::pgd(20, 8.0f / 255.0f, 2.0f / 255.0f);
    CHECK(p.steps == 20);
    CHECK(p.random_start);
    CHECK(p.name() == "pgd20");
    CHECK(AttackSpec::pgd(100).name() == "pgd100");
    CHECK(AttackSpec::cw_pgd(100).name() == "cw100");
}

TEST_CASE("fgsm is exactly pgd with one eps-sized step") {
    const Fixture& f = fx();
    Tensor x = f.data.points;
    const auto& y = f.data.labels;

    Tensor a = attack_batch(*f.model, x, y, plane(AttackSpec::fgsm(kEps)));
    AttackSpec one_step = plane(AttackSpec::pgd(1, kEps, kEps, /*random_start=*/false));
    Tensor b = attack_batch(*f.model, x, y, one_step);
    REQUIRE(a.numel() == b.numel());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.numel()) == 0);
}

TEST_CASE("attacks respect the eps ball") {
    const Fixture& f = fx();
    Rng rng(5);
    for (const AttackSpec& spec :
         {plane(AttackSpec::fgsm(kEps)), plane(AttackSpec::pgd(20, kEps, kEps / 4)),
          plane(AttackSpec::cw_pgd(20, kEps, kEps / 4))}) {
        Tensor adv = attack_batch(*f.model, f.data.points, f.data.labels, spec, &rng);
        for (int64_t i = 0; i < adv.numel(); ++i)
            CHECK(std::abs(adv[i] - f.data.points[i]) <= spec.eps + 1e-5f);
    }
}

TEST_CASE("pgd with a real budget drops accuracy below clean") {
    const Fixture& f = fx();
    Rng rng(7);
    const HardLabelBatch clean_pred = argmax_rows(f.model->forward(f.data.points, false));
    Tensor adv = attack_batch(*f.model, f.data.points, f.data.labels,
                              plane(AttackSpec::pgd(20, 2.0f, 0.5f)), &rng);
    const HardLabelBatch adv_pred = argmax_rows(f.model->forward(adv, false));
    int clean_ok = 0, adv_ok = 0;
    for (size_t i = 0; i < f.data.labels.size(); ++i) {
        clean_ok += clean_pred[i] == f.data.labels[i];
        adv_ok += adv_pred[i] == f.data.labels[i];
    }
    CHECK(adv_ok < clean_ok);
}

TEST_CASE("report accessors: robust lookup, aa surrogate, csv layout") {
    EvalReport r;
    r.clean_acc = 91.25;
    r.robust_acc = {{"fgsm", 60.0}, {"pgd20", 52.5}, {"pgd100", 50.0}, {"cw100", 48.75}};
    r.n_samples = 80;
    CHECK(r.robust("pgd20") == doctest::Approx(52.5));
    CHECK(std::isnan(r.robust("apgd")));
    CHECK(r.aa_surrogate() == doctest::Approx(48.75)); // min(pgd100, cw100)

    CHECK(EvalReport::csv_header() == "clean_acc,fgsm,pgd20,pgd100,cw100,aa_surrogate");
    const std::string row = r.csv_row();
    CHECK(row == "91.25,60.00,52.50,50.00,48.75,48.75");

    EvalReport partial;
    partial.robust_acc = {{"pgd100", 40.0}};
    CHECK(std::isnan(partial.aa_surrogate())); // needs both long attacks
}

TEST_CASE("standard suite carries the four battery attacks at the given eps") {
    const auto suite = standard_eval_suite(0.25f);
    REQUIRE(suite.size() == 4);
    CHECK(suite[0].name() == "fgsm");
    CHECK(suite[1].name() == "pgd20");
    CHECK(suite[2].name() == "pgd100");
    CHECK(suite[3].name() == "cw100");
    for (const auto& s : suite) {
        CHECK(s.eps == doctest::Approx(0.25f));
        if (s.kind != AttackKind::kFgsm) CHECK(s.eta == doctest::Approx(0.25f / 4));
    }
}

TEST_CASE("evaluate fills every requested column and orders robustness sanely") {
    const Fixture& f = fx();
    Rng rng(11);
    const auto suite = std::vector<AttackSpec>{plane(AttackSpec::fgsm(kEps)),
                                               plane(AttackSpec::pgd(20, kEps, kEps / 4))};
    EvalReport r = evaluate(*f.model, f.as_dataset, suite, /*batch_size=*/64, rng);
    CHECK(r.n_samples == f.as_dataset.size());
    CHECK(r.clean_acc > 90.0);
    CHECK(r.robust("fgsm") <= r.clean_acc);
    CHECK(r.robust("pgd20") <= r.robust("fgsm") + 5.0); // iterated >= one-shot, roughly
    CHECK(r.robust("pgd20") >= 0.0);
}

TEST_CASE("cw attack with kappa 0 also finds flips") {
    const Fixture& f = fx();
    Rng rng(13);
    Tensor adv = attack_batch(*f.model, f.data.points, f.data.labels,
                              plane(AttackSpec::cw_pgd(20, 2.0f, 0.5f)), &rng);
    const HardLabelBatch adv_pred = argmax_rows(f.model->forward(adv, false));
    int adv_ok = 0;
    for (size_t i = 0; i < f.data.labels.size(); ++i)
        adv_ok += adv_pred[i] == f.data.labels[i];
    CHECK(adv_ok < static_cast<int>(f.data.labels.size()));
}

TEST_CASE("transfer asr counts only target-correct samples and needs some") {
    const Fixture& f = fx();
    // Self-transfer: crafting on the target itself with a generous ball
    // should flip a decent share of the correctly classified points.
    Rng rng(17);
    const double self_asr =
        transfer_asr(*f.model, *f.model, f.as_dataset, plane(AttackSpec::pgd(20, 2.0f, 0.5f)), 64, rng);
    CHECK(self_asr > 10.0);
    CHECK(self_asr <= 100.0);

    // eps = 0: the crafted batch equals the clean one, nothing can flip.
    Rng rng2(18);
    const double zero_asr = transfer_asr(
        *f.model, *f.model, f.as_dataset,
        plane(AttackSpec::pgd(5, 0.0f, 0.0f, /*random_start=*/false)), 64, rng2);
    CHECK(zero_asr == doctest::Approx(0.0));
}

TEST_CASE("transfer asr with an empty eligible set is refused") {
    const Fixture& f = fx();
    // An untrained-but-certain wrong model: flip all labels so the target is
    // never correct on any sample.
    Dataset wrong = f.as_dataset;
    for (auto& y : wrong.labels) y = (y + 1) % 4;
    // The trained model gets ~every label "wrong" now, leaving no eligible rows.
    Rng rng(19);
    CHECK_THROWS_AS(
        transfer_asr(*fx().model, *fx().model, wrong, plane(AttackSpec::pgd(5, kEps, kEps / 4)), 64,
                     rng),
        EmptyDataset);
}

TEST_CASE("noise baseline flips less than a crafted attack of the same size") {
    const Fixture& f = fx();
    Rng rng(23);
    const double crafted =
        transfer_asr(*f.model, *f.model, f.as_dataset, plane(AttackSpec::pgd(20, 2.0f, 0.5f)), 64, rng);
    Rng rng2(23);
    const double noise = noise_asr(*f.model, f.as_dataset, 2.0f, 64, rng2, /*clip01=*/false);
    CHECK(noise < crafted);
    CHECK(noise >= 0.0);
    CHECK(noise <= 100.0);
}
