#ifndef GLYPHFORGE_OBJECTIVES_HPP
#define GLYPHFORGE_OBJECTIVES_HPP

#include <memory>
#include <string>

#include "glyphforge/ops.hpp"
#include "glyphforge/tensor.hpp"

// Training losses. Squared-error losses are mean-reduced so values stay
// resolution independent.
namespace gf::obj {

// Linear-interpolant sample: x_t = t*x1 + (1-t)*x0, target velocity x1 - x0.
struct RFSample {
    Tensor x0, x1, x_t, v_t;
    double t = 0.0;
};

RFSample rf_make_sample(const Tensor& x0, const Tensor& x1, double t);

Tensor rf_loss(const Tensor& v_pred, const RFSample& sample);

Tensor align_loss(const Tensor& projected, const Tensor& target);

// Preference loss on velocity errors: softplus(W_t * ((e_w - ref_e_w) - (e_l - ref_e_l))).
// Equals ln 2 when the policy matches the reference.
Tensor dpo_loss(const Tensor& e_w, const Tensor& e_l, double ref_e_w, double ref_e_l,
                double w_t);

// Timestep weighting registry for the preference loss.
//   "constant": beta
//   "snr": min(1/(t(1-t)), cap)
double dpo_weight(const std::string& id, double t, double beta = 500.0, double cap = 100.0);

// Pluggable perceptual feature extractor for the reconstruction loss.
class PerceptualModel {
public:
    virtual ~PerceptualModel() = default;
    // input NCHW; returns one tensor per feature level
    virtual std::vector<Tensor> features(const Tensor& nchw) const = 0;
};

// Fixed, seeded random convolutional feature stack (frozen weights).
class RandomConvPerceptual : public PerceptualModel {
public:
    RandomConvPerceptual(int in_channels, uint64_t seed);
    std::vector<Tensor> features(const Tensor& nchw) const override;

private:
    Tensor w1_, w2_;
};

struct VaeLossParts {
    Tensor total, mse, lpips;
};

// decoded/gt NCHW (4-channel RGBA). total = mse + lambda_lpips * lpips.
VaeLossParts vae_loss(const Tensor& decoded, const Tensor& gt, const PerceptualModel& perceptual,
                      double lambda_lpips);

// Segmentation prediction/target, values clamped to [0,1] before evaluation.
struct SegPrediction {
    Tensor pred_alpha;
    Tensor gt_alpha;
};

constexpr double kFocalClip = 1e-6;
constexpr double kDiceEps = 1e-8;

Tensor focal_loss(const SegPrediction& seg, double alpha, double gamma);
Tensor dice_loss(const SegPrediction& seg);

struct SegLossParts {
    Tensor total, mse, focal, dice;
};

SegLossParts seg_loss_total(const SegPrediction& seg, double alpha, double gamma,
                            double lambda_focal, double lambda_dice);

}  // namespace gf::obj

#endif
