#ifndef GLYPHFORGE_LAYOUT_HPP
#define GLYPHFORGE_LAYOUT_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glyphforge/clients.hpp"
#include "glyphforge/errors.hpp"
#include "glyphforge/rng.hpp"

namespace gf::layout {

struct BBox {
    int left = 0, top = 0, right = 0, bottom = 0;

    void validate() const;
    int64_t area() const { return int64_t(right - left) * (bottom - top); }
    int width() const { return right - left; }
    int height() const { return bottom - top; }
};

struct LayoutItem {
    std::string label;
    BBox bbox;
};

struct Layout {
    std::vector<LayoutItem> items;
    int canvas_w = 0, canvas_h = 0;

    size_t size() const { return items.size(); }
};

struct RewardWeights {
    double lambda_ol = 0.5;
    double lambda_bl = 0.5;
    double eps = 1e-6;

    void validate() const;
};

enum class PlanStage { Coarse, Fine };

struct LayoutTask {
    int canvas_w = 0, canvas_h = 0;
    std::string caption;
    std::vector<std::string> labels;
    PlanStage stage = PlanStage::Coarse;
    std::optional<BBox> parent_box;  // required for the fine stage
};

// ---------------------------------------------------------------------------
// geometry + rewards

double iou(const BBox& a, const BBox& b, double eps);

double reward_iou(const Layout& pred, const Layout& gt, double eps);
double reward_overlap(const Layout& pred, double eps);
double reward_balance(const Layout& pred);

struct RewardBreakdown {
    double iou = 0.0;
    double overlap = 0.0;
    double balance = 0.0;
    double total = 0.0;
};

RewardBreakdown total_reward(const Layout& pred, const Layout& gt, const RewardWeights& w);

// Group-normalized advantages: (r - mean)/(std + eps); requires >= 2 rewards.
std::vector<double> grpo_advantages(const std::vector<double>& rewards);

// ---------------------------------------------------------------------------
// JSON protocol (array of {"label": ..., "bbox": [l,t,r,b]})

std::string layout_to_json(const Layout& layout);
// Parses and validates against the expected labels (count and order).
Layout json_to_layout(const std::string& text, const std::vector<std::string>& expected_labels);

// The instruction prompt sent to layout-planning text models; placeholders
// are substituted from the task. The template text is configurable.
std::string planner_prompt(const LayoutTask& task, const std::string& template_override = "");

// ---------------------------------------------------------------------------
// planners

class Planner {
public:
    virtual ~Planner() = default;
    virtual Layout plan(const LayoutTask& task) = 0;
};

// Deterministic rule-based reference: vertical stacking with 5% margins,
// heights proportional to label length, centered horizontally.
class BaselinePlanner : public Planner {
public:
    explicit BaselinePlanner(double tracking = 0.0) : tracking_(tracking) {}
    Layout plan(const LayoutTask& task) override;

private:
    double tracking_;
};

// Text-model-backed planner speaking the JSON protocol.
class MllmPlanner : public Planner {
public:
    MllmPlanner(std::shared_ptr<clients::TextClient> client, std::string template_override = "");
    Layout plan(const LayoutTask& task) override;

private:
    std::shared_ptr<clients::TextClient> client_;
    std::string template_override_;
};

Layout plan_coarse(const LayoutTask& task, Planner& planner);
Layout plan_fine(const BBox& parent, int glyph_count, Planner& planner, double tracking = 0.0);

// ---------------------------------------------------------------------------
// toy policy + GRPO harness

struct GrpoTask {
    LayoutTask task;
    Layout gt;
};

// Parametric per-task policy: one gaussian box parameterization per item,
// trained with score-function policy gradients over group advantages.
class ToyLayoutPolicy : public Planner {
public:
    ToyLayoutPolicy(const std::vector<GrpoTask>& tasks, double sigma, uint64_t seed);

    Layout plan(const LayoutTask& task) override;          // deterministic mean boxes
    Layout sample(int task_index, Rng& rng, std::vector<double>* noise_out);
    Layout decode(int task_index, const std::vector<double>& params) const;

    int task_count() const { return int(params_.size()); }
    std::vector<double>& task_params(int i) { return params_[size_t(i)]; }
    double sigma() const { return sigma_; }
    int find_task(const LayoutTask& task) const;

private:
    std::vector<GrpoTask> tasks_;
    std::vector<std::vector<double>> params_;  // per task: 4 per item
    double sigma_;
};

struct GrpoTrainResult {
    std::vector<double> mean_reward_per_step;
    double initial_reward = 0.0;  // mean over tasks at the deterministic policy, before training
    double final_reward = 0.0;    // same, after training
};

GrpoTrainResult grpo_toy_train(ToyLayoutPolicy& policy, const std::vector<GrpoTask>& tasks,
                               int group_size, int steps, double lr, const RewardWeights& weights,
                               uint64_t seed);

}  // namespace gf::layout

#endif
