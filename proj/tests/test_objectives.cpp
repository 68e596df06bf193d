#include <doctest.h>

#include <cmath>

#include "glyphforge/gradcheck.hpp"
#include "glyphforge/objectives.hpp"

using namespace gf;
using namespace gf::obj;

TEST_CASE("rf_make_sample endpoints and arithmetic") {
    Tensor x0 = Tensor::scalar(0.0), x1 = Tensor::scalar(2.0);

    RFSample s0 = rf_make_sample(x0, x1, 0.0);
    CHECK(s0.x_t.item() == 0.0);
    RFSample s1 = rf_make_sample(x0, x1, 1.0);
    CHECK(s1.x_t.item() == 2.0);
    RFSample sh = rf_make_sample(x0, x1, 0.5);
    CHECK(sh.x_t.item() == 1.0);
    CHECK(sh.v_t.item() == 2.0);

    Rng rng(1);
    Tensor a = Tensor::randn({3, 4}, rng), b = Tensor::randn({3, 4}, rng);
    RFSample s = rf_make_sample(a, b, 0.3);
    for (int64_t i = 0; i < a.numel(); ++i) {
        CHECK(s.x_t.at(i) == 0.3 * b.at(i) + 0.7 * a.at(i));
        CHECK(s.v_t.at(i) == b.at(i) - a.at(i));
    }
    CHECK_THROWS_AS(rf_make_sample(a, Tensor::scalar(1.0), 0.5), ArgumentError);
}

TEST_CASE("rf_loss values and elementwise oracle") {
    Tensor x0 = Tensor::scalar(0.0), x1 = Tensor::scalar(2.0);
    RFSample s = rf_make_sample(x0, x1, 0.5);
    CHECK(rf_loss(s.v_t, s).item() == 0.0);
    CHECK(rf_loss(Tensor::scalar(0.0), s).item() == doctest::Approx(4.0));

    Rng rng(2);
    Tensor a = Tensor::randn({5, 7}, rng), b = Tensor::randn({5, 7}, rng);
    RFSample rs = rf_make_sample(a, b, 0.25);
    Tensor pred = Tensor::randn({5, 7}, rng);
    // independent elementwise accumulation
    double want = 0.0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.at(i) - rs.v_t.at(i);
        want += d * d;
    }
    want /= double(pred.numel());
    CHECK(rf_loss(pred, rs).item() == doctest::Approx(want).epsilon(1e-10));

    // rf_loss and align_loss share the same kernel
    CHECK(rf_loss(pred, rs).item() == align_loss(pred, rs.v_t).item());
}

TEST_CASE("align_loss constant offset and gradient") {
    Rng rng(3);
    Tensor p = Tensor::randn({4, 6}, rng, 1.0, true);
    Tensor target = ops::add_scalar(p.detach(), 0.01);
    CHECK(align_loss(p, target).item() == doctest::Approx(1e-4).epsilon(1e-9));

    auto res = grad_check([&] { return align_loss(p, target); }, {{"p", p}});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("dpo_loss closed forms") {
    // policy == reference -> ln 2
    Tensor e_w = Tensor::scalar(0.7), e_l = Tensor::scalar(0.4);
    const double l0 = dpo_loss(e_w, e_l, 0.7, 0.4, 500.0).item();
    CHECK(l0 == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // e_w - ref_w = -1, e_l - ref_l = 0, W = 1 -> -log sigmoid(1)
    Tensor ew2 = Tensor::scalar(0.0), el2 = Tensor::scalar(0.5);
    const double l1 = dpo_loss(ew2, el2, 1.0, 0.5, 1.0).item();
    CHECK(l1 == doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-1.0)))).epsilon(1e-9));
    CHECK(l1 == doctest::Approx(0.31326168751822286).epsilon(1e-9));

    // sigmoid symmetry: sigma(z) + sigma(-z) = 1, i.e. exp(-L) terms sum to 1
    const double a = dpo_loss(Tensor::scalar(0.3), Tensor::scalar(0.9), 0.5, 0.5, 2.0).item();
    const double b = dpo_loss(Tensor::scalar(0.9), Tensor::scalar(0.3), 0.5, 0.5, 2.0).item();
    CHECK(std::exp(-a) + std::exp(-b) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(dpo_loss(e_w, e_l, 0.7, 0.4, 0.0), ArgumentError);
    CHECK_THROWS_AS(dpo_loss(e_w, e_l, 0.7, 0.4, -1.0), ArgumentError);
}

TEST_CASE("dpo_loss monotonicity") {
    auto value = [](double ew, double el) {
        return dpo_loss(Tensor::scalar(ew), Tensor::scalar(el), 0.5, 0.5, 3.0).item();
    };
    CHECK(value(0.4, 0.5) < value(0.5, 0.5));  // decreasing e_w lowers the loss
    CHECK(value(0.5, 0.6) < value(0.5, 0.5));  // increasing e_l lowers the loss
}

TEST_CASE("dpo weight registry") {
    CHECK(dpo_weight("constant", 0.3) == 500.0);
    CHECK(dpo_weight("constant", 0.3, 7.0) == 7.0);
    CHECK(dpo_weight("snr", 0.5) == doctest::Approx(4.0));
    CHECK(dpo_weight("snr", 0.0) == 100.0);  // capped
    CHECK_THROWS_AS(dpo_weight("nope", 0.5), ArgumentError);
}

TEST_CASE("vae_loss composition against hand recomposition") {
    Rng rng(5);
    RandomConvPerceptual perceptual(4, 42);
    Tensor dec = Tensor::uniform({1, 4, 8, 8}, rng, 0.0, 1.0, true);
    Tensor gt = Tensor::uniform({1, 4, 8, 8}, rng, 0.0, 1.0);

    auto parts = vae_loss(dec, gt, perceptual, 0.1);
    CHECK(parts.total.item() ==
          doctest::Approx(parts.mse.item() + 0.1 * parts.lpips.item()).epsilon(1e-12));

    // identical inputs -> 0 for any perceptual model
    auto zero = vae_loss(gt, gt, perceptual, 0.1);
    CHECK(zero.total.item() == 0.0);

    // lambda 0 reduces to plain MSE
    auto plain = vae_loss(dec, gt, perceptual, 0.0);
    CHECK(plain.total.item() == ops::mse(dec, gt).item());

    auto res = grad_check([&] { return vae_loss(dec, gt, perceptual, 0.1).total; }, {{"dec", dec}},
                          1e-5);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("focal_loss scalar cases and symmetry") {
    // single pixel gt=1 pred=0.5, alpha=.25 gamma=2
    SegPrediction seg{Tensor::scalar(0.5), Tensor::scalar(1.0)};
    const double v = focal_loss(seg, 0.25, 2.0).item();
    CHECK(v == doctest::Approx(0.25 * 0.25 * (-std::log(0.5))).epsilon(1e-9));
    CHECK(v == doctest::Approx(0.0433216988).epsilon(1e-5));

    // p_t symmetry: gt=0 pred=0.5 gives the same value
    SegPrediction seg2{Tensor::scalar(0.5), Tensor::scalar(0.0)};
    CHECK(focal_loss(seg2, 0.25, 2.0).item() == doctest::Approx(v).epsilon(1e-12));

    // near-perfect prediction -> loss near 0
    SegPrediction seg3{Tensor::scalar(1.0), Tensor::scalar(1.0)};
    CHECK(focal_loss(seg3, 0.25, 2.0).item() <= 0.25 * std::pow(kFocalClip, 2.0) * 14.0);

    CHECK_THROWS_AS(focal_loss(seg, 0.0, 2.0), ArgumentError);
    CHECK_THROWS_AS(focal_loss(seg, 0.25, -1.0), ArgumentError);
}

TEST_CASE("focal_loss invariant under label/pred complement") {
    Rng rng(6);
    std::vector<double> gtv(16);
    for (auto& v : gtv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor gt = Tensor::from_vec({4, 4}, gtv);
    Tensor pred = Tensor::uniform({4, 4}, rng, 0.05, 0.95);

    std::vector<double> gtc(16), predc(16);
    for (int i = 0; i < 16; ++i) {
        gtc[size_t(i)] = 1.0 - gt.at(i);
        predc[size_t(i)] = 1.0 - pred.at(i);
    }
    SegPrediction a{pred, gt};
    SegPrediction b{Tensor::from_vec({4, 4}, predc), Tensor::from_vec({4, 4}, gtc)};
    // complement swaps which branch defines p_t; gt=0 maps to 1-pred either way
    CHECK(focal_loss(a, 0.25, 2.0).item() == doctest::Approx(focal_loss(b, 0.25, 2.0).item()));
}

TEST_CASE("dice_loss closed forms") {
    Tensor ones = Tensor::full({4, 4}, 1.0);
    Tensor zeros = Tensor::zeros({4, 4});

    // perfect overlap
    CHECK(dice_loss({ones, ones}).item() == doctest::Approx(0.0).epsilon(1e-12));

    // disjoint binary masks
    std::vector<double> a(16, 0.0), b(16, 0.0);
    for (int i = 0; i < 8; ++i) a[size_t(i)] = 1.0;
    for (int i = 8; i < 16; ++i) b[size_t(i)] = 1.0;
    CHECK(dice_loss({Tensor::from_vec({4, 4}, a), Tensor::from_vec({4, 4}, b)}).item() ==
          doctest::Approx(1.0).epsilon(1e-12));

    // pred = 0.5 * gt (binary gt) -> 1/3
    std::vector<double> half(16, 0.0), full(16, 0.0);
    for (int i = 0; i < 6; ++i) {
        half[size_t(i)] = 0.5;
        full[size_t(i)] = 1.0;
    }
    const double v =
        dice_loss({Tensor::from_vec({4, 4}, half), Tensor::from_vec({4, 4}, full)}).item();
    CHECK(std::fabs(v - 1.0 / 3.0) < 1e-10);
    (void)zeros;
}

TEST_CASE("seg_loss_total composition and reductions") {
    Rng rng(7);
    Tensor pred = Tensor::uniform({6, 6}, rng, 0.0, 1.0, true);
    std::vector<double> gtv(36);
    for (auto& v : gtv) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    Tensor gt = Tensor::from_vec({6, 6}, gtv);
    SegPrediction seg{pred, gt};

    auto parts = seg_loss_total(seg, 0.25, 2.0, 0.3, 0.7);
    const double want = parts.mse.item() + 0.3 * parts.focal.item() + 0.7 * parts.dice.item();
    CHECK(parts.total.item() == doctest::Approx(want).epsilon(1e-12));

    // zero weights reduce to the mse
    auto mse_only = seg_loss_total(seg, 0.25, 2.0, 0.0, 0.0);
    CHECK(mse_only.total.item() == doctest::Approx(mse_only.mse.item()).epsilon(1e-12));

    // perfect prediction -> 0
    auto perfect = seg_loss_total({gt, gt}, 0.25, 2.0, 0.3, 0.7);
    CHECK(perfect.total.item() == doctest::Approx(0.0).scale(1).epsilon(1e-8));

    CHECK_THROWS_AS(seg_loss_total(seg, 0.25, 2.0, -0.1, 0.0), ArgumentError);
}

TEST_CASE("segmentation losses pass gradient checks") {
    Rng rng(8);
    Tensor pred = Tensor::uniform({4, 4}, rng, 0.1, 0.9, true);
    std::vector<double> gtv(16);
    for (auto& v : gtv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor gt = Tensor::from_vec({4, 4}, gtv);
    SegPrediction seg{pred, gt};

    auto focal = grad_check([&] { return focal_loss(seg, 0.25, 2.0); }, {{"pred", pred}});
    CHECK(focal.max_rel_err < 1e-6);
    auto dice = grad_check([&] { return dice_loss(seg); }, {{"pred", pred}});
    CHECK(dice.max_rel_err < 1e-6);
    auto total =
        grad_check([&] { return seg_loss_total(seg, 0.25, 2.0, 0.5, 0.5).total; }, {{"pred", pred}});
    CHECK(total.max_rel_err < 1e-6);
}

TEST_CASE("dpo_loss gradient through the policy errors") {
    Rng rng(9);
    Tensor vp_w = Tensor::randn({6}, rng, 1.0, true);
    Tensor vp_l = Tensor::randn({6}, rng, 1.0, true);
    Tensor vt_w = Tensor::randn({6}, rng);
    Tensor vt_l = Tensor::randn({6}, rng);
    auto loss_fn = [&] {
        Tensor e_w = ops::mse(vp_w, vt_w);
        Tensor e_l = ops::mse(vp_l, vt_l);
        return dpo_loss(e_w, e_l, 0.4, 0.6, 2.0);
    };
    auto res = grad_check(loss_fn, {{"vp_w", vp_w}, {"vp_l", vp_l}});
    CHECK(res.max_rel_err < 1e-6);
}
