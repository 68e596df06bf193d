#include "glyphforge/layout.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace gf::layout {

void BBox::validate() const {
    if (left >= right || top >= bottom)
        throw ArgumentError("degenerate bbox [" + std::to_string(left) + "," +
                            std::to_string(top) + "," + std::to_string(right) + "," +
                            std::to_string(bottom) + "]");
}

void RewardWeights::validate() const {
    if (lambda_ol < 0.0 || lambda_bl < 0.0) throw ArgumentError("reward weights must be >= 0");
    if (!(eps > 0.0)) throw ArgumentError("reward eps must be > 0");
}

double iou(const BBox& a, const BBox& b, double eps) {
    const int il = std::max(a.left, b.left), it = std::max(a.top, b.top);
    const int ir = std::min(a.right, b.right), ib = std::min(a.bottom, b.bottom);
    const int64_t inter =
        (ir > il && ib > it) ? int64_t(ir - il) * (ib - it) : 0;
    if (inter == 0) return 0.0;
    const int64_t uni = a.area() + b.area() - inter;
    return double(inter) / (double(uni) + eps);
}

double reward_iou(const Layout& pred, const Layout& gt, double eps) {
    if (pred.size() != gt.size())
        throw ArgumentError("reward_iou: layout size mismatch " + std::to_string(pred.size()) +
                            " vs " + std::to_string(gt.size()));
    if (pred.items.empty()) throw ArgumentError("reward_iou: empty layouts");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i)
        acc += iou(pred.items[i].bbox, gt.items[i].bbox, eps);
    return acc / double(pred.size());
}

double reward_overlap(const Layout& pred, double eps) {
    const int n = int(pred.size());
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            acc += iou(pred.items[size_t(i)].bbox, pred.items[size_t(j)].bbox, eps);
    return -2.0 / (double(n) * (n - 1)) * acc;
}

double reward_balance(const Layout& pred) {
    const int n = int(pred.size());
    if (n < 1) throw ArgumentError("reward_balance: empty layout");
    double mean = 0.0;
    for (const auto& it : pred.items) mean += double(it.bbox.area());
    mean /= n;
    double var = 0.0;
    for (const auto& it : pred.items) {
        const double d = double(it.bbox.area()) - mean;
        var += d * d;
    }
    var /= n;  // population variance
    return -std::sqrt(var) / mean;
}

RewardBreakdown total_reward(const Layout& pred, const Layout& gt, const RewardWeights& w) {
    w.validate();
    RewardBreakdown r;
    r.iou = reward_iou(pred, gt, w.eps);
    r.overlap = reward_overlap(pred, w.eps);
    r.balance = reward_balance(pred);
    r.total = r.iou + w.lambda_ol * r.overlap + w.lambda_bl * r.balance;
    return r;
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards) {
    constexpr double kEps = 1e-8;
    if (rewards.size() < 2) throw ArgumentError("grpo_advantages: group size must be >= 2");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= double(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= double(rewards.size());
    const double denom = std::sqrt(var) + kEps;
    std::vector<double> adv(rewards.size());
    for (size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

// ---------------------------------------------------------------------------
// JSON protocol

std::string layout_to_json(const Layout& layout) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& it : layout.items) {
        arr.push_back({{"label", it.label},
                       {"bbox", {it.bbox.left, it.bbox.top, it.bbox.right, it.bbox.bottom}}});
    }
    return arr.dump();
}

Layout json_to_layout(const std::string& text, const std::vector<std::string>& expected_labels) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("layout reply is not valid JSON: ") + e.what(), text);
    }
    if (!arr.is_array())
        throw ProtocolError("layout reply must be a JSON array", text);
    if (arr.size() != expected_labels.size())
        throw ProtocolError("layout reply has " + std::to_string(arr.size()) + " items, expected " +
                                std::to_string(expected_labels.size()),
                            text);
    Layout out;
    size_t idx = 0;
    for (const auto& e : arr) {
        if (!e.is_object() || !e.contains("label") || !e.contains("bbox"))
            throw ProtocolError("layout item missing label/bbox", text);
        const std::string label = e.at("label").get<std::string>();
        if (label != expected_labels[idx])
            throw ProtocolError("layout label mismatch at index " + std::to_string(idx) +
                                    ": got '" + label + "', expected '" + expected_labels[idx] + "'",
                                text);
        const auto& bb = e.at("bbox");
        if (!bb.is_array() || bb.size() != 4)
            throw ProtocolError("bbox must be [left, top, right, bottom]", text);
        for (const auto& v : bb)
            if (!v.is_number_integer())
                throw ProtocolError("bbox coordinates must be integers", text);
        BBox box{bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
        try {
            box.validate();
        } catch (const ArgumentError& err) {
            throw ProtocolError(err.what(), text);
        }
        out.items.push_back({label, box});
        ++idx;
    }
    return out;
}

namespace {
constexpr const char* kDefaultTemplate =
    "<image>Please help me design a layout to place {l} foreground text items over the "
    "background of original size w={w}, h={h}. {caption} The foreground text items are "
    "{labels}. Place the items carefully to avoid unbalance, overlap, and out-of-bounds. The "
    "layout should contain all the text items in given order, in which each item has a bounding "
    "box described as [left, top, right, bottom] (all the values are integer numbers). Return "
    "the result by filling in the initial JSON file while keeping the label of items unchanged "
    "and do not return any extra explanation. The initial JSON is defined as: {json_template}.";

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}
}  // namespace

std::string planner_prompt(const LayoutTask& task, const std::string& template_override) {
    std::string tpl = template_override.empty() ? kDefaultTemplate : template_override;
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json initial = nlohmann::json::array();
    for (const auto& l : task.labels) {
        labels.push_back(l);
        initial.push_back({{"label", l}, {"bbox", {0, 0, 0, 0}}});
    }
    replace_all(tpl, "{l}", std::to_string(task.labels.size()));
    replace_all(tpl, "{w}", std::to_string(task.canvas_w));
    replace_all(tpl, "{h}", std::to_string(task.canvas_h));
    replace_all(tpl, "{caption}", task.caption);
    replace_all(tpl, "{labels}", labels.dump());
    replace_all(tpl, "{json_template}", initial.dump());
    return tpl;
}

// ---------------------------------------------------------------------------
// planners

namespace {
void validate_planner_output(const Layout& out, const LayoutTask& task) {
    if (out.size() != task.labels.size())
        throw ProtocolError("planner returned " + std::to_string(out.size()) + " boxes for " +
                                std::to_string(task.labels.size()) + " labels",
                            layout_to_json(out));
    for (const auto& it : out.items) {
        it.bbox.validate();
        if (it.bbox.left < 0 || it.bbox.top < 0 || it.bbox.right > task.canvas_w ||
            it.bbox.bottom > task.canvas_h)
            throw ProtocolError("planner box out of canvas bounds", layout_to_json(out));
    }
}
}  // namespace

Layout BaselinePlanner::plan(const LayoutTask& task) {
    if (task.labels.empty()) throw ArgumentError("planner: no labels");
    Layout out;
    out.canvas_w = task.canvas_w;
    out.canvas_h = task.canvas_h;

    if (task.stage == PlanStage::Fine) {
        if (!task.parent_box) throw ArgumentError("fine stage requires parent_box");
        const BBox& p = *task.parent_box;
        const int g = int(task.labels.size());
        const int cell = p.width() / g;
        if (cell < 1) throw ArgumentError("parent box too narrow for glyph count");
        const int used = cell * g;
        const int x0 = p.left + (p.width() - used) / 2;
        const int shrink = int(std::floor(cell * tracking_ / 2.0));
        for (int i = 0; i < g; ++i) {
            BBox b;
            b.left = x0 + i * cell + shrink;
            b.right = x0 + (i + 1) * cell - shrink;
            if (b.right <= b.left) b.right = b.left + 1;
            b.top = p.top;
            b.bottom = p.bottom;
            out.items.push_back({task.labels[size_t(i)], b});
        }
        return out;
    }

    // coarse: vertical stack inside 5% margins, line heights proportional to
    // label length, centered horizontally
    const int mx = std::max(1, task.canvas_w / 20);
    const int my = std::max(1, task.canvas_h / 20);
    const int usable_w = task.canvas_w - 2 * mx;
    const int usable_h = task.canvas_h - 2 * my;
    if (usable_w < 1 || usable_h < 1) throw ArgumentError("canvas too small for margins");

    int64_t weight_sum = 0;
    std::vector<int64_t> weights;
    for (const auto& l : task.labels) {
        weights.push_back(std::max<int64_t>(1, int64_t(l.size())));
        weight_sum += weights.back();
    }
    int top = my;
    for (size_t i = 0; i < task.labels.size(); ++i) {
        const int slot_h = std::max(2, int(int64_t(usable_h) * weights[i] / weight_sum));
        const int box_h = std::max(1, slot_h * 4 / 5);
        const int pad = (slot_h - box_h) / 2;
        const int glyphs = std::max(1, int(task.labels[i].size()));
        const int box_w = std::min(usable_w, std::max(1, box_h * glyphs * 11 / 20));
        BBox b;
        b.top = top + pad;
        b.bottom = b.top + box_h;
        b.left = (task.canvas_w - box_w) / 2;
        b.right = b.left + box_w;
        b.bottom = std::min(b.bottom, task.canvas_h - my);
        if (b.bottom <= b.top) b.bottom = b.top + 1;
        out.items.push_back({task.labels[i], b});
        top += slot_h;
    }
    return out;
}

MllmPlanner::MllmPlanner(std::shared_ptr<clients::TextClient> client,
                         std::string template_override)
    : client_(std::move(client)), template_override_(std::move(template_override)) {}

Layout MllmPlanner::plan(const LayoutTask& task) {
    if (task.labels.empty()) throw ArgumentError("planner: no labels");
    const std::string prompt = planner_prompt(task, template_override_);
    const std::string reply = client_->complete(prompt, nullptr);
    Layout out = json_to_layout(reply, task.labels);
    out.canvas_w = task.canvas_w;
    out.canvas_h = task.canvas_h;
    return out;
}

Layout plan_coarse(const LayoutTask& task, Planner& planner) {
    if (task.stage != PlanStage::Coarse) throw ArgumentError("plan_coarse: task stage mismatch");
    if (task.labels.empty()) throw ArgumentError("plan_coarse: labels non-empty required");
    Layout out = planner.plan(task);
    validate_planner_output(out, task);
    return out;
}

Layout plan_fine(const BBox& parent, int glyph_count, Planner& planner, double tracking) {
    if (glyph_count < 1) throw ArgumentError("plan_fine: glyph_count must be >= 1");
    parent.validate();
    LayoutTask task;
    task.stage = PlanStage::Fine;
    task.parent_box = parent;
    task.canvas_w = std::max(parent.right, 1);
    task.canvas_h = std::max(parent.bottom, 1);
    for (int i = 0; i < glyph_count; ++i) task.labels.push_back("g" + std::to_string(i));
    (void)tracking;
    Layout out = planner.plan(task);
    validate_planner_output(out, task);
    for (const auto& it : out.items) {
        const BBox& b = it.bbox;
        if (b.left < parent.left || b.top < parent.top || b.right > parent.right ||
            b.bottom > parent.bottom)
            throw ProtocolError("fine plan box escapes parent", layout_to_json(out));
    }
    return out;
}

// ---------------------------------------------------------------------------
// toy policy + GRPO

namespace {
double squash01(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

ToyLayoutPolicy::ToyLayoutPolicy(const std::vector<GrpoTask>& tasks, double sigma, uint64_t seed)
    : tasks_(tasks), sigma_(sigma) {
    Rng rng(hash_combine(0x70f1cfULL, seed));
    for (const auto& t : tasks_) {
        // 4 params per item: center x, center y, log-ish width, height
        std::vector<double> p(t.task.labels.size() * 4);
        for (auto& v : p) v = rng.normal(0.0, 0.3);
        params_.push_back(std::move(p));
    }
}

int ToyLayoutPolicy::find_task(const LayoutTask& task) const {
    for (size_t i = 0; i < tasks_.size(); ++i) {
        const auto& t = tasks_[i].task;
        if (t.canvas_w == task.canvas_w && t.canvas_h == task.canvas_h &&
            t.labels == task.labels && t.caption == task.caption)
            return int(i);
    }
    return -1;
}

Layout ToyLayoutPolicy::decode(int task_index, const std::vector<double>& params) const {
    const auto& task = tasks_[size_t(task_index)].task;
    Layout out;
    out.canvas_w = task.canvas_w;
    out.canvas_h = task.canvas_h;
    for (size_t i = 0; i < task.labels.size(); ++i) {
        const double* p = params.data() + i * 4;
        const double cx = 0.05 + 0.9 * squash01(p[0]);
        const double cy = 0.05 + 0.9 * squash01(p[1]);
        const double bw = (0.08 + 0.72 * squash01(p[2])) * task.canvas_w;
        const double bh = (0.05 + 0.45 * squash01(p[3])) * task.canvas_h;
        BBox b;
        b.left = int(std::lround(cx * task.canvas_w - bw / 2));
        b.right = int(std::lround(cx * task.canvas_w + bw / 2));
        b.top = int(std::lround(cy * task.canvas_h - bh / 2));
        b.bottom = int(std::lround(cy * task.canvas_h + bh / 2));
        b.left = std::max(0, std::min(b.left, task.canvas_w - 2));
        b.top = std::max(0, std::min(b.top, task.canvas_h - 2));
        b.right = std::max(b.left + 1, std::min(b.right, task.canvas_w));
        b.bottom = std::max(b.top + 1, std::min(b.bottom, task.canvas_h));
        out.items.push_back({task.labels[i], b});
    }
    return out;
}

Layout ToyLayoutPolicy::plan(const LayoutTask& task) {
    const int idx = find_task(task);
    if (idx < 0) throw ArgumentError("toy policy: unknown task");
    return decode(idx, params_[size_t(idx)]);
}

Layout ToyLayoutPolicy::sample(int task_index, Rng& rng, std::vector<double>* noise_out) {
    auto& theta = params_[size_t(task_index)];
    std::vector<double> noisy(theta.size());
    if (noise_out) noise_out->resize(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) {
        const double eps = sigma_ > 0.0 ? rng.normal(0.0, 1.0) : 0.0;
        if (noise_out) (*noise_out)[i] = eps;
        noisy[i] = theta[i] + sigma_ * eps;
    }
    return decode(task_index, noisy);
}

GrpoTrainResult grpo_toy_train(ToyLayoutPolicy& policy, const std::vector<GrpoTask>& tasks,
                               int group_size, int steps, double lr, const RewardWeights& weights,
                               uint64_t seed) {
    if (group_size < 2) throw ArgumentError("grpo_toy_train: group size must be >= 2");
    weights.validate();
    Rng rng(hash_combine(0x6b70ULL, seed));

    auto eval_mean = [&]() {
        double acc = 0.0;
        for (size_t ti = 0; ti < tasks.size(); ++ti) {
            Layout pred = policy.decode(int(ti), policy.task_params(int(ti)));
            acc += total_reward(pred, tasks[ti].gt, weights).total;
        }
        return acc / double(tasks.size());
    };

    GrpoTrainResult result;
    result.initial_reward = eval_mean();

    const double sigma = policy.sigma();
    for (int step = 0; step < steps; ++step) {
        double step_reward = 0.0;
        int count = 0;
        for (size_t ti = 0; ti < tasks.size(); ++ti) {
            std::vector<std::vector<double>> noises;
            noises.resize(size_t(group_size));
            std::vector<double> rewards(size_t(group_size), 0.0);
            for (int g = 0; g < group_size; ++g) {
                Layout pred = policy.sample(int(ti), rng, &noises[size_t(g)]);
                rewards[size_t(g)] = total_reward(pred, tasks[ti].gt, weights).total;
                step_reward += rewards[size_t(g)];
                ++count;
            }
            const auto adv = grpo_advantages(rewards);
            auto& theta = policy.task_params(int(ti));
            if (sigma > 0.0) {
                for (size_t j = 0; j < theta.size(); ++j) {
                    double grad = 0.0;
                    for (int g = 0; g < group_size; ++g)
                        grad += adv[size_t(g)] * noises[size_t(g)][j] / sigma;
                    theta[j] += lr * grad / double(group_size);
                }
            }
        }
        result.mean_reward_per_step.push_back(step_reward / count);
    }
    result.final_reward = eval_mean();
    return result;
}

}  // namespace gf::layout
