#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "rsteal/nn/layers.hpp"
#include "rsteal/nn/models.hpp"
#include "rsteal/nn/optim.hpp"
#include "rsteal/rng.hpp"

using namespace rsteal;
using namespace rsteal::nn;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

double project(const Tensor& y, const Tensor& w) {
    double s = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) s += static_cast<double>(y[i]) * w[i];
    return s;
}

// central-difference directional derivative of x -> <w, layer(x)> along d
double numeric_dir_input(Layer& layer, const Tensor& x, const Tensor& w, const Tensor& d,
                         double h, bool train) {
    Tensor xp = x, xm = x;
    for (int64_t i = 0; i < x.numel(); ++i) {
        xp[i] = static_cast<float>(x[i] + h * d[i]);
        xm[i] = static_cast<float>(x[i] - h * d[i]);
    }
    const double fp = project(layer.forward(xp, train), w);
    const double fm = project(layer.forward(xm, train), w);
    return (fp - fm) / (2.0 * h);
}

double numeric_dir_param(Layer& layer, const Tensor& x, const Tensor& w, Param& p,
                         const Tensor& d, double h, bool train) {
    Tensor saved = p.value;
    for (int64_t i = 0; i < d.numel(); ++i) p.value[i] = static_cast<float>(saved[i] + h * d[i]);
    const double fp = project(layer.forward(x, train), w);
    for (int64_t i = 0; i < d.numel(); ++i) p.value[i] = static_cast<float>(saved[i] - h * d[i]);
    const double fm = project(layer.forward(x, train), w);
    p.value = saved;
    return (fp - fm) / (2.0 * h);
}

void check_close(double analytic, double numeric, double rel_tol, double abs_floor) {
    const double err = std::abs(analytic - numeric);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
    if (err >= rel_tol * scale + abs_floor) {
        CAPTURE(analytic);
        CAPTURE(numeric);
        REQUIRE(err < rel_tol * scale + abs_floor);
    }
}

// full gradient check of one layer: input direction + one direction per parameter
void gradcheck(Layer& layer, const Tensor& x, Rng& rng, bool train = true, double h = 1e-2,
               double rel_tol = 2e-2) {
    Tensor y = layer.forward(x, train);
    Tensor w = random_tensor(rng, y.shape());
    Tensor gx = layer.backward(w, true);
    REQUIRE(gx.same_shape(x));

    Tensor d = random_tensor(rng, x.shape());
    double analytic = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) analytic += static_cast<double>(gx[i]) * d[i];
    check_close(analytic, numeric_dir_input(layer, x, w, d, h, train), rel_tol, 1e-3);

    std::vector<Param*> params;
    layer.collect_params("t", params);
    for (auto* p : params) {
        // grads must be re-derived fresh: forward/backward once more per parameter
        layer.forward(x, train);
        for (auto* q : params) q->grad.fill(0.0f);
        layer.backward(w, true);
        Tensor dp = random_tensor(rng, p->value.shape());
        double a = 0.0;
        for (int64_t i = 0; i < dp.numel(); ++i) a += static_cast<double>(p->grad[i]) * dp[i];
        const double n = numeric_dir_param(layer, x, w, *p, dp, h, train);
        CAPTURE(p->name);
        check_close(a, n, rel_tol, 1e-3);
    }
}

} // namespace

TEST_CASE("dense layer gradients") {
    Rng rng(21);
    Dense layer(5, 7);
    for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
        layer.weight.value[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    for (int64_t i = 0; i < layer.bias.value.numel(); ++i)
        layer.bias.value[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    Tensor x = random_tensor(rng, {4, 5});
    gradcheck(layer, x, rng);
}

TEST_CASE("conv layer gradients (stride 1, pad 1)") {
    Rng rng(22);
    Conv2d layer(3, 4, 3, 1);
    for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
        layer.weight.value[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
    Tensor x = random_tensor(rng, {2, 3, 6, 6});
    gradcheck(layer, x, rng);
}

TEST_CASE("conv layer gradients (stride 2)") {
    Rng rng(23);
    Conv2d layer(3, 5, 3, 2);
    for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
        layer.weight.value[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
    Tensor x = random_tensor(rng, {2, 3, 8, 8});
    gradcheck(layer, x, rng);
}

TEST_CASE("1x1 conv gradients") {
    Rng rng(24);
    Conv2d layer(4, 6, 1, 1, 0);
    for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
        layer.weight.value[i] = static_cast<float>(rng.uniform(-0.4, 0.4));
    Tensor x = random_tensor(rng, {2, 4, 5, 5});
    gradcheck(layer, x, rng);
}

TEST_CASE("conv output shape follows the usual arithmetic") {
    Rng rng(25);
    Conv2d c1(3, 8, 3, 1);            // same padding
    CHECK(c1.forward(random_tensor(rng, {1, 3, 32, 32}), false).shape() ==
          std::vector<int>{1, 8, 32, 32});
    Conv2d c2(3, 8, 3, 2);            // halves spatial dims
    CHECK(c2.forward(random_tensor(rng, {1, 3, 32, 32}), false).shape() ==
          std::vector<int>{1, 8, 16, 16});
    Conv2d c3(8, 4, 1, 1, 0);
    CHECK(c3.forward(random_tensor(rng, {1, 8, 16, 16}), false).shape() ==
          std::vector<int>{1, 4, 16, 16});
}

TEST_CASE("depthwise conv gradients") {
    Rng rng(26);
    for (int stride : {1, 2}) {
        DepthwiseConv2d layer(4, stride);
        for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
            layer.weight.value[i] = static_cast<float>(rng.uniform(-0.4, 0.4));
        Tensor x = random_tensor(rng, {2, 4, 6, 6});
        gradcheck(layer, x, rng);
    }
}

TEST_CASE("batchnorm train-mode gradients") {
    Rng rng(27);
    BatchNorm2d layer(3);
    for (int i = 0; i < 3; ++i) {
        layer.gamma.value[i] = static_cast<float>(rng.uniform(0.5, 1.5));
        layer.beta.value[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    }
    Tensor x = random_tensor(rng, {2, 3, 4, 4});
    gradcheck(layer, x, rng, true);
}

TEST_CASE("batchnorm eval-mode input gradients") {
    Rng rng(28);
    BatchNorm2d layer(3);
    // populate running stats with a train pass
    layer.forward(random_tensor(rng, {4, 3, 4, 4}), true);
    Tensor x = random_tensor(rng, {2, 3, 4, 4});
    Tensor y = layer.forward(x, false);
    Tensor w = random_tensor(rng, y.shape());
    Tensor gx = layer.backward(w, false);
    Tensor d = random_tensor(rng, x.shape());
    double analytic = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) analytic += static_cast<double>(gx[i]) * d[i];
    check_close(analytic, numeric_dir_input(layer, x, w, d, 1e-2, false), 2e-2, 1e-3);
}

TEST_CASE("batchnorm running stats follow the momentum update") {
    BatchNorm2d layer(1);
    Tensor x({2, 1, 1, 2});
    x[0] = 1.0f; x[1] = 2.0f; x[2] = 3.0f; x[3] = 6.0f;
    // batch mean 3, biased var 3.5, unbiased var 14/3
    layer.forward(x, true);
    CHECK(layer.running_mean.value[0] == doctest::Approx(0.9f * 0.0f + 0.1f * 3.0f));
    CHECK(layer.running_var.value[0] == doctest::Approx(0.9f * 1.0f + 0.1f * 14.0f / 3.0f));
    // eval mode must use the running stats, not the batch stats
    Tensor y = layer.forward(x, false);
    const float scale = 1.0f / std::sqrt(layer.running_var.value[0] + 1e-5f);
    CHECK(y[0] == doctest::Approx((1.0f - layer.running_mean.value[0]) * scale));
}

TEST_CASE("activation gradients away from kinks") {
    Rng rng(29);
    auto make_x = [&] {
        Tensor x = random_tensor(rng, {3, 10});
        for (int64_t i = 0; i < x.numel(); ++i)
            if (std::abs(x[i]) < 0.15f) x[i] = x[i] < 0 ? -0.2f : 0.2f;
        return x;
    };
    ReLU relu;
    gradcheck(relu, make_x(), rng, true, 1e-3);
    LeakyReLU lrelu(0.2f);
    gradcheck(lrelu, make_x(), rng, true, 1e-3);
    Sigmoid sig;
    gradcheck(sig, random_tensor(rng, {3, 10}, -2.0, 2.0), rng);
}

TEST_CASE("maxpool picks maxima and routes gradients to them") {
    MaxPool2d pool(2);
    Tensor x({1, 1, 2, 2});
    x[0] = 1.0f; x[1] = 4.0f; x[2] = 2.0f; x[3] = 3.0f;
    Tensor y = pool.forward(x, true);
    CHECK(y.numel() == 1);
    CHECK(y[0] == 4.0f);
    Tensor gy({1, 1, 1, 1});
    gy[0] = 2.5f;
    Tensor gx = pool.backward(gy, true);
    CHECK(gx[0] == 0.0f);
    CHECK(gx[1] == 2.5f);
    CHECK(gx[3] == 0.0f);
}

TEST_CASE("maxpool gradients (finite difference)") {
    Rng rng(30);
    MaxPool2d pool(2);
    // well-separated values so the small FD step cannot flip an argmax
    Tensor x({2, 2, 4, 4});
    std::vector<int64_t> order(static_cast<size_t>(x.numel()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(i)))]);
    for (size_t i = 0; i < order.size(); ++i) x[order[i]] = 0.1f * static_cast<float>(i);
    gradcheck(pool, x, rng, true, 1e-3);
}

TEST_CASE("global average pool gradients") {
    Rng rng(31);
    GlobalAvgPool gap;
    gradcheck(gap, random_tensor(rng, {2, 3, 4, 4}), rng);
}

TEST_CASE("reshape layers are exact inverses") {
    Rng rng(32);
    Flatten fl;
    Tensor x = random_tensor(rng, {2, 3, 4, 4});
    Tensor y = fl.forward(x, true);
    CHECK(y.shape() == std::vector<int>{2, 48});
    Tensor back = fl.backward(y, true);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(back[i] == y[i]);

    Unflatten2d uf(3, 4);
    Tensor z = random_tensor(rng, {2, 48});
    CHECK(uf.forward(z, true).shape() == std::vector<int>{2, 3, 4, 4});
}

TEST_CASE("nearest upsample duplicates and its backward sums") {
    Rng rng(33);
    UpsampleNearest2x up;
    Tensor x = random_tensor(rng, {1, 1, 2, 2});
    Tensor y = up.forward(x, true);
    CHECK(y.shape() == std::vector<int>{1, 1, 4, 4});
    CHECK(y.at4(0, 0, 0, 0) == x.at4(0, 0, 0, 0));
    CHECK(y.at4(0, 0, 0, 1) == x.at4(0, 0, 0, 0));
    CHECK(y.at4(0, 0, 1, 1) == x.at4(0, 0, 0, 0));
    CHECK(y.at4(0, 0, 2, 3) == x.at4(0, 0, 1, 1));
    gradcheck(up, random_tensor(rng, {2, 3, 3, 3}), rng);
}

TEST_CASE("residual block equals the hand-wired composition of its parts") {
    // The trailing relu sits on batch-normed activations, right where an FD
    // probe would cross the kink; the building blocks are FD-verified on
    // their own above, so the block is checked for exact equivalence against
    // manually chained layers instead.
    Rng rng(34);
    Conv2d conv_m(3, 4, 3, 2);
    BatchNorm2d bn_m(4);
    Conv2d conv_s(3, 4, 1, 2, 0);
    for (auto* t : {&conv_m.weight.value, &conv_s.weight.value})
        for (int64_t i = 0; i < t->numel(); ++i)
            (*t)[i] = static_cast<float>(rng.uniform(-0.3, 0.3));

    auto main = std::make_unique<Sequential>();
    auto cm = std::make_unique<Conv2d>(3, 4, 3, 2);
    cm->weight.value = conv_m.weight.value;
    main->push(std::move(cm));
    main->push(std::make_unique<BatchNorm2d>(4));
    auto sc = std::make_unique<Sequential>();
    auto cs = std::make_unique<Conv2d>(3, 4, 1, 2, 0);
    cs->weight.value = conv_s.weight.value;
    sc->push(std::move(cs));
    ResidualBlock block(std::move(main), std::move(sc));

    Tensor x = random_tensor(rng, {2, 3, 6, 6});
    Tensor got = block.forward(x, true);

    Tensor pre = bn_m.forward(conv_m.forward(x, true), true);
    Tensor skip = conv_s.forward(x, true);
    Tensor want(pre.shape());
    for (int64_t i = 0; i < pre.numel(); ++i)
        want[i] = std::max(pre[i] + skip[i], 0.0f);
    REQUIRE(got.same_shape(want));
    for (int64_t i = 0; i < got.numel(); ++i) CHECK(got[i] == want[i]);

    Tensor w = random_tensor(rng, got.shape());
    Tensor gx_block = block.backward(w, true);
    Tensor gpre(w.shape());
    for (int64_t i = 0; i < w.numel(); ++i)
        gpre[i] = (pre[i] + skip[i]) > 0.0f ? w[i] : 0.0f;
    Tensor gx_manual = conv_m.backward(bn_m.backward(gpre, true), true);
    Tensor gx_skip = conv_s.backward(gpre, true);
    for (int64_t i = 0; i < gx_manual.numel(); ++i) gx_manual[i] += gx_skip[i];
    for (int64_t i = 0; i < gx_block.numel(); ++i)
        CHECK(gx_block[i] == doctest::Approx(gx_manual[i]).epsilon(1e-6));

    std::vector<Param*> ps;
    block.collect_params("b", ps);
    for (auto* p : ps) {
        Param* ref = nullptr;
        if (p->name == "b.main.0.weight") ref = &conv_m.weight;
        if (p->name == "b.main.0.bias") ref = &conv_m.bias;
        if (p->name == "b.main.1.gamma") ref = &bn_m.gamma;
        if (p->name == "b.main.1.beta") ref = &bn_m.beta;
        if (p->name == "b.shortcut.0.weight") ref = &conv_s.weight;
        if (p->name == "b.shortcut.0.bias") ref = &conv_s.bias;
        REQUIRE(ref != nullptr);
        for (int64_t i = 0; i < p->grad.numel(); ++i)
            CHECK(p->grad[i] == doctest::Approx(ref->grad[i]).epsilon(1e-6));
    }
}

TEST_CASE("pre-activation residual block gradients (identity skip)") {
    // smooth activation inside the branch: this case verifies the
    // sum-without-relu wiring, and a kink would poison the FD oracle
    Rng rng(35);
    auto main = std::make_unique<Sequential>();
    main->push(std::make_unique<BatchNorm2d>(3));
    main->push(std::make_unique<Sigmoid>());
    main->push(std::make_unique<Conv2d>(3, 3, 3, 1));
    ResidualBlock block(std::move(main), nullptr, false);
    std::vector<Param*> ps;
    block.collect_params("b", ps);
    for (auto* p : ps)
        if (p->name.find("weight") != std::string::npos)
            for (int64_t i = 0; i < p->value.numel(); ++i)
                p->value[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
    gradcheck(block, random_tensor(rng, {2, 3, 5, 5}), rng);
}

TEST_CASE("add-skip gradients") {
    Rng rng(36);
    auto main = std::make_unique<Sequential>();
    main->push(std::make_unique<Conv2d>(3, 3, 1, 1, 0));
    AddSkip block(std::move(main));
    std::vector<Param*> ps;
    block.collect_params("b", ps);
    for (auto* p : ps)
        for (int64_t i = 0; i < p->value.numel(); ++i)
            p->value[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
    gradcheck(block, random_tensor(rng, {2, 3, 4, 4}), rng);
}

TEST_CASE("param_grads=false skips weights but keeps the input gradient") {
    Rng rng(37);
    Dense layer(6, 4);
    for (int64_t i = 0; i < layer.weight.value.numel(); ++i)
        layer.weight.value[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    Tensor x = random_tensor(rng, {3, 6});
    Tensor w = random_tensor(rng, {3, 4});

    layer.forward(x, true);
    Tensor gx_full = layer.backward(w, true);
    Tensor gw = layer.weight.grad;

    layer.weight.grad.fill(0.0f);
    layer.bias.grad.fill(0.0f);
    layer.forward(x, true);
    Tensor gx_fast = layer.backward(w, false);

    for (int64_t i = 0; i < gx_full.numel(); ++i) CHECK(gx_full[i] == gx_fast[i]);
    for (int64_t i = 0; i < layer.weight.grad.numel(); ++i) CHECK(layer.weight.grad[i] == 0.0f);
    double gw_norm = 0.0;
    for (int64_t i = 0; i < gw.numel(); ++i) gw_norm += std::abs(gw[i]);
    CHECK(gw_norm > 0.0);
}

TEST_CASE("classifier factory builds every arch with the right output width") {
    Rng rng(38);
    for (const auto& arch : known_archs()) {
        Rng r = rng.fork(arch);
        auto m = make_classifier(arch, 10, r);
        Tensor x = arch == "toy_mlp" ? random_tensor(r, {2, 2}) : random_tensor(r, {2, 3, 32, 32}, 0.0, 1.0);
        Tensor y = m->forward(x, false);
        CHECK(y.shape() == std::vector<int>{2, 10});
        CHECK(m->param_count() > 0);
    }
    CHECK_THROWS_AS((void)make_classifier("lenet", 10, rng), UnknownPreset);
}

TEST_CASE("generator emits 32x32 rgb in [0,1]") {
    Rng rng(39);
    auto g = make_generator(64, rng, 32);
    Tensor z = random_tensor(rng, {4, 64}, -2.0, 2.0);
    Tensor imgs = g->forward(z, true);
    CHECK(imgs.shape() == std::vector<int>{4, 3, 32, 32});
    for (int64_t i = 0; i < imgs.numel(); ++i) {
        CHECK(imgs[i] >= 0.0f);
        CHECK(imgs[i] <= 1.0f);
    }
}

TEST_CASE("model initialization is seed-deterministic") {
    Rng a(7), b(7), c(8);
    auto m1 = make_classifier("smallcnn", 10, a);
    auto m2 = make_classifier("smallcnn", 10, b);
    auto m3 = make_classifier("smallcnn", 10, c);
    bool all_same = true, any_diff_seed_same = true;
    for (size_t i = 0; i < m1->params().size(); ++i) {
        const auto& p1 = m1->params()[i]->value;
        const auto& p2 = m2->params()[i]->value;
        const auto& p3 = m3->params()[i]->value;
        for (int64_t j = 0; j < p1.numel(); ++j) {
            if (p1[j] != p2[j]) all_same = false;
            if (p1.numel() == p3.numel() && p1[j] != p3[j]) any_diff_seed_same = false;
        }
    }
    CHECK(all_same);
    CHECK_FALSE(any_diff_seed_same); // different seed must change the init
}

TEST_CASE("sgd momentum and weight decay trajectory") {
    // w0 = 1, grad 0.5 each step, lr 0.1, momentum 0.9, wd 0.1
    Param p;
    p.value = Tensor({1}); p.value[0] = 1.0f;
    p.grad = Tensor({1});
    Sgd opt({&p}, 0.1f, 0.9f, 0.1f);
    p.grad[0] = 0.5f;
    opt.step();
    // v1 = 0.5 + 0.1*1 = 0.6, w1 = 1 - 0.06 = 0.94
    CHECK(p.value[0] == doctest::Approx(0.94f));
    p.grad[0] = 0.5f;
    opt.step();
    // v2 = 0.9*0.6 + (0.5 + 0.1*0.94) = 1.134, w2 = 0.94 - 0.1134
    CHECK(p.value[0] == doctest::Approx(0.94f - 0.1134f));
}

TEST_CASE("adam first step moves by ~lr") {
    Param p;
    p.value = Tensor({1}); p.value[0] = 2.0f;
    p.grad = Tensor({1}); p.grad[0] = 0.5f;
    Adam opt({&p}, 0.01f);
    opt.step();
    CHECK(p.value[0] == doctest::Approx(2.0f - 0.01f).epsilon(1e-4));
}

TEST_CASE("zero_grads clears every slot") {
    Rng rng(40);
    auto m = make_classifier("toy_mlp", 4, rng);
    Tensor x = random_tensor(rng, {3, 2});
    Tensor y = m->forward(x, true);
    Tensor gy({3, 4});
    gy.fill(1.0f);
    m->backward(gy);
    double total = 0.0;
    for (auto* p : m->params())
        for (int64_t i = 0; i < p->grad.numel(); ++i) total += std::abs(p->grad[i]);
    CHECK(total > 0.0);
    m->zero_grads();
    total = 0.0;
    for (auto* p : m->params())
        for (int64_t i = 0; i < p->grad.numel(); ++i) total += std::abs(p->grad[i]);
    CHECK(total == 0.0);
}
