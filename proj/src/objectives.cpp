#include "glyphforge/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace gf::obj {

RFSample rf_make_sample(const Tensor& x0, const Tensor& x1, double t) {
    if (!same_shape(x0.shape(), x1.shape()))
        throw ArgumentError("rf_make_sample: shape mismatch");
    if (t < 0.0 || t > 1.0) throw ArgumentError("rf_make_sample: t outside [0,1]");
    RFSample s;
    s.x0 = x0;
    s.x1 = x1;
    s.t = t;
    std::vector<double> xt(size_t(x0.numel()), 0.0), vt(size_t(x0.numel()), 0.0);
    const double* a = x0.data();
    const double* b = x1.data();
    for (int64_t i = 0; i < x0.numel(); ++i) {
        xt[size_t(i)] = t * b[i] + (1.0 - t) * a[i];
        vt[size_t(i)] = b[i] - a[i];
    }
    s.x_t = Tensor::from_vec(x0.shape(), std::move(xt));
    s.v_t = Tensor::from_vec(x0.shape(), std::move(vt));
    return s;
}

Tensor rf_loss(const Tensor& v_pred, const RFSample& sample) {
    return ops::mse(v_pred, sample.v_t);
}

Tensor align_loss(const Tensor& projected, const Tensor& target) {
    return ops::mse(projected, target);
}

Tensor dpo_loss(const Tensor& e_w, const Tensor& e_l, double ref_e_w, double ref_e_l,
                double w_t) {
    if (!(w_t > 0.0)) throw ArgumentError("dpo_loss: weight must be > 0");
    if (e_w.item() < 0.0 || e_l.item() < 0.0 || ref_e_w < 0.0 || ref_e_l < 0.0)
        throw ArgumentError("dpo_loss: errors must be >= 0");
    Tensor margin = ops::sub(ops::add_scalar(e_w, -ref_e_w), ops::add_scalar(e_l, -ref_e_l));
    return ops::softplus(ops::scale(margin, w_t));
}

double dpo_weight(const std::string& id, double t, double beta, double cap) {
    if (id == "constant") return beta;
    if (id == "snr") {
        const double denom = t * (1.0 - t);
        if (denom <= 0.0) return cap;
        return std::min(cap, 1.0 / denom);
    }
    throw ArgumentError("unknown dpo weight id: " + id);
}

RandomConvPerceptual::RandomConvPerceptual(int in_channels, uint64_t seed) {
    Rng rng(hash_combine(0x9e7cef7ULL, seed));
    const int c1 = 8, c2 = 16;
    w1_ = Tensor::randn({c1, in_channels, 3, 3}, rng, 1.0 / std::sqrt(9.0 * in_channels));
    w2_ = Tensor::randn({c2, c1, 3, 3}, rng, 1.0 / std::sqrt(9.0 * c1));
}

std::vector<Tensor> RandomConvPerceptual::features(const Tensor& nchw) const {
    Tensor f1 = ops::tanh(ops::conv2d(nchw, w1_, Tensor(), 2, 1));
    Tensor f2 = ops::tanh(ops::conv2d(f1, w2_, Tensor(), 2, 1));
    return {f1, f2};
}

VaeLossParts vae_loss(const Tensor& decoded, const Tensor& gt, const PerceptualModel& perceptual,
                      double lambda_lpips) {
    if (!same_shape(decoded.shape(), gt.shape())) throw ArgumentError("vae_loss: shape mismatch");
    if (lambda_lpips < 0.0) throw ArgumentError("vae_loss: lambda must be >= 0");
    VaeLossParts parts;
    parts.mse = ops::mse(decoded, gt);
    if (lambda_lpips > 0.0) {
        auto fd = perceptual.features(decoded);
        auto fg = perceptual.features(gt);
        Tensor acc = Tensor::scalar(0.0);
        for (size_t i = 0; i < fd.size(); ++i) acc = ops::add(acc, ops::mse(fd[i], fg[i]));
        parts.lpips = acc;
        parts.total = ops::add(parts.mse, ops::scale(parts.lpips, lambda_lpips));
    } else {
        parts.lpips = Tensor::scalar(0.0);
        parts.total = parts.mse;
    }
    return parts;
}

namespace {
// p_t = pred where gt > 0, else 1 - pred; inputs clamped to valid ranges.
Tensor focal_pt(const SegPrediction& seg) {
    if (!same_shape(seg.pred_alpha.shape(), seg.gt_alpha.shape()))
        throw ArgumentError("segmentation: shape mismatch");
    Tensor pred = ops::clamp(seg.pred_alpha, kFocalClip, 1.0 - kFocalClip);
    std::vector<double> mask(size_t(seg.gt_alpha.numel()), 0.0);
    for (int64_t i = 0; i < seg.gt_alpha.numel(); ++i)
        mask[size_t(i)] = seg.gt_alpha.at(i) > 0.0 ? 1.0 : 0.0;
    Tensor m = Tensor::from_vec(seg.gt_alpha.shape(), std::move(mask));
    // m*pred + (1-m)*(1-pred)
    Tensor one_minus = ops::add_scalar(ops::neg(pred), 1.0);
    return ops::add(ops::mul(m, pred), ops::mul(ops::add_scalar(ops::neg(m), 1.0), one_minus));
}
}  // namespace

Tensor focal_loss(const SegPrediction& seg, double alpha, double gamma) {
    if (!(alpha > 0.0)) throw ArgumentError("focal_loss: alpha must be > 0");
    if (gamma < 0.0) throw ArgumentError("focal_loss: gamma must be >= 0");
    Tensor pt = focal_pt(seg);
    Tensor weight = gamma == 0.0 ? Tensor::full(pt.shape(), 1.0)
                                 : ops::pow_scalar(ops::add_scalar(ops::neg(pt), 1.0), gamma);
    Tensor terms = ops::mul(weight, ops::log(pt));
    return ops::scale(ops::mean(terms), -alpha);
}

Tensor dice_loss(const SegPrediction& seg) {
    if (!same_shape(seg.pred_alpha.shape(), seg.gt_alpha.shape()))
        throw ArgumentError("segmentation: shape mismatch");
    Tensor pred = ops::clamp(seg.pred_alpha, 0.0, 1.0);
    Tensor gt = ops::clamp(seg.gt_alpha, 0.0, 1.0);
    Tensor inter = ops::sum(ops::mul(pred, gt));
    Tensor denom = ops::add(ops::sum(pred), ops::sum(gt));
    // guard the degenerate empty/empty case without perturbing normal values
    if (denom.item() < kDiceEps) denom = Tensor::scalar(kDiceEps);
    return ops::add_scalar(ops::neg(ops::div(ops::scale(inter, 2.0), denom)), 1.0);
}

SegLossParts seg_loss_total(const SegPrediction& seg, double alpha, double gamma,
                            double lambda_focal, double lambda_dice) {
    if (lambda_focal < 0.0 || lambda_dice < 0.0)
        throw ArgumentError("seg_loss_total: negative weights");
    SegLossParts parts;
    Tensor pred = ops::clamp(seg.pred_alpha, 0.0, 1.0);
    parts.mse = ops::mse(pred, seg.gt_alpha);
    parts.focal = focal_loss(seg, alpha, gamma);
    parts.dice = dice_loss(seg);
    parts.total = ops::add(parts.mse, ops::add(ops::scale(parts.focal, lambda_focal),
                                               ops::scale(parts.dice, lambda_dice)));
    return parts;
}

}  // namespace gf::obj
