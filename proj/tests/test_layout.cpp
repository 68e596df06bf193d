#include <doctest.h>

#include <cmath>

#include "glyphforge/layout.hpp"

using namespace gf;
using namespace gf::layout;

namespace {

// Rasterization oracle: count grid cells, independent of the closed-form path.
int64_t raster_intersection(const BBox& a, const BBox& b) {
    int64_t count = 0;
    const int l = std::min(a.left, b.left), r = std::max(a.right, b.right);
    const int t = std::min(a.top, b.top), btm = std::max(a.bottom, b.bottom);
    for (int y = t; y < btm; ++y)
        for (int x = l; x < r; ++x) {
            const bool in_a = x >= a.left && x < a.right && y >= a.top && y < a.bottom;
            const bool in_b = x >= b.left && x < b.right && y >= b.top && y < b.bottom;
            if (in_a && in_b) ++count;
        }
    return count;
}

double raster_iou(const BBox& a, const BBox& b, double eps) {
    const int64_t inter = raster_intersection(a, b);
    if (inter == 0) return 0.0;
    const int64_t uni = a.area() + b.area() - inter;
    return double(inter) / (double(uni) + eps);
}

Layout random_layout(Rng& rng, int n, int canvas) {
    Layout l;
    l.canvas_w = canvas;
    l.canvas_h = canvas;
    for (int i = 0; i < n; ++i) {
        BBox b;
        b.left = int(rng.below(uint64_t(canvas - 2)));
        b.top = int(rng.below(uint64_t(canvas - 2)));
        b.right = b.left + 1 + int(rng.below(uint64_t(canvas - b.left - 1)));
        b.bottom = b.top + 1 + int(rng.below(uint64_t(canvas - b.top - 1)));
        l.items.push_back({"t" + std::to_string(i), b});
    }
    return l;
}

}  // namespace

TEST_CASE("iou basics: self, disjoint, hand geometry") {
    const double eps = 1e-6;
    BBox a{0, 0, 10, 10};
    CHECK(iou(a, a, eps) == doctest::Approx(100.0 / (100.0 + eps)).epsilon(1e-12));
    CHECK(iou(a, a, eps) >= 1.0 - 1e-6);

    BBox far{20, 20, 30, 30};
    CHECK(iou(a, far, eps) == 0.0);

    BBox b{5, 0, 15, 10};
    CHECK(iou(a, b, eps) == doctest::Approx(50.0 / (150.0 + eps)).epsilon(1e-12));
    CHECK(iou(a, b, eps) == doctest::Approx(raster_iou(a, b, eps)).epsilon(1e-12));

    // symmetry is exact
    CHECK(iou(a, b, eps) == iou(b, a, eps));
}

TEST_CASE("reward_iou matches rasterization oracle on random layouts") {
    Rng rng(17);
    const double eps = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + int(rng.below(8));
        Layout pred = random_layout(rng, n, 48);
        Layout gt = random_layout(rng, n, 48);
        double oracle = 0.0;
        for (int i = 0; i < n; ++i)
            oracle += raster_iou(pred.items[size_t(i)].bbox, gt.items[size_t(i)].bbox, eps);
        oracle /= n;
        CHECK(reward_iou(pred, gt, eps) == doctest::Approx(oracle).epsilon(1e-9));
    }
    Layout a = random_layout(rng, 3, 48), b = random_layout(rng, 4, 48);
    CHECK_THROWS_AS(reward_iou(a, b, eps), ArgumentError);
}

TEST_CASE("reward_overlap: disjoint, identical pair, pairwise oracle") {
    const double eps = 1e-6;
    Layout disjoint;
    disjoint.items = {{"a", {0, 0, 10, 10}}, {"b", {20, 0, 30, 10}}, {"c", {40, 0, 50, 10}}};
    CHECK(reward_overlap(disjoint, eps) == 0.0);

    Layout twins;
    twins.items = {{"a", {0, 0, 10, 10}}, {"b", {0, 0, 10, 10}}};
    CHECK(reward_overlap(twins, eps) ==
          doctest::Approx(-100.0 / (100.0 + eps)).epsilon(1e-12));

    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Layout l = random_layout(rng, 6, 32);
        double acc = 0.0;
        for (int i = 0; i < 6; ++i)
            for (int j = i + 1; j < 6; ++j)
                acc += iou(l.items[size_t(i)].bbox, l.items[size_t(j)].bbox, eps);
        const double want = -2.0 / (6.0 * 5.0) * acc;
        CHECK(reward_overlap(l, eps) == doctest::Approx(want).epsilon(1e-10));
    }

    Layout single;
    single.items = {{"a", {0, 0, 5, 5}}};
    CHECK(reward_overlap(single, eps) == 0.0);  // defined as 0 for N < 2
}

TEST_CASE("reward_balance: equal areas, {1,3} case, scale invariance") {
    Layout equal;
    equal.items = {{"a", {0, 0, 4, 4}}, {"b", {10, 10, 14, 14}}};
    CHECK(reward_balance(equal) == 0.0);

    // areas {1, 3}: population std 1, mean 2
    Layout uneven;
    uneven.items = {{"a", {0, 0, 1, 1}}, {"b", {5, 5, 8, 6}}};
    CHECK(reward_balance(uneven) == doctest::Approx(-0.5).epsilon(1e-12));

    // integer scaling in both axes leaves std/mean unchanged
    Layout scaled;
    scaled.items = {{"a", {0, 0, 3, 3}}, {"b", {15, 15, 24, 18}}};
    CHECK(reward_balance(scaled) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("total_reward composition and reductions") {
    RewardWeights w;  // 0.5 / 0.5
    Layout gt;
    gt.items = {{"a", {0, 0, 10, 10}}, {"b", {20, 20, 30, 30}}};
    auto r = total_reward(gt, gt, w);
    CHECK(r.total == doctest::Approx(1.0).epsilon(1e-6));

    RewardWeights zero;
    zero.lambda_ol = 0.0;
    zero.lambda_bl = 0.0;
    Rng rng(31);
    Layout pred = random_layout(rng, 2, 48);
    Layout gt2 = random_layout(rng, 2, 48);
    auto rz = total_reward(pred, gt2, zero);
    CHECK(rz.total == doctest::Approx(reward_iou(pred, gt2, zero.eps)).epsilon(1e-12));

    auto rw = total_reward(pred, gt2, w);
    CHECK(rw.total ==
          doctest::Approx(rw.iou + 0.5 * rw.overlap + 0.5 * rw.balance).epsilon(1e-12));

    RewardWeights bad;
    bad.lambda_ol = -1.0;
    CHECK_THROWS_AS(total_reward(pred, gt2, bad), ArgumentError);
}

TEST_CASE("translation invariance of all three rewards") {
    Rng rng(37);
    Layout pred = random_layout(rng, 5, 32);
    Layout gt = random_layout(rng, 5, 32);
    Layout pred_t = pred, gt_t = gt;
    for (auto& it : pred_t.items) {
        it.bbox.left += 100; it.bbox.right += 100; it.bbox.top += 55; it.bbox.bottom += 55;
    }
    for (auto& it : gt_t.items) {
        it.bbox.left += 100; it.bbox.right += 100; it.bbox.top += 55; it.bbox.bottom += 55;
    }
    const double eps = 1e-6;
    CHECK(reward_iou(pred, gt, eps) == reward_iou(pred_t, gt_t, eps));
    CHECK(reward_overlap(pred, eps) == reward_overlap(pred_t, eps));
    CHECK(reward_balance(pred) == reward_balance(pred_t));
}

TEST_CASE("grpo_advantages centering and scaling") {
    CHECK_THROWS_AS(grpo_advantages({1.0}), ArgumentError);

    auto flat = grpo_advantages({2.0, 2.0, 2.0});
    for (double a : flat) CHECK(a == 0.0);

    auto two = grpo_advantages({0.0, 1.0});
    CHECK(two[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-6));

    Rng rng(41);
    std::vector<double> rewards(9);
    for (auto& r : rewards) r = rng.normal();
    auto adv = grpo_advantages(rewards);
    double mean = 0.0;
    for (double a : adv) mean += a;
    CHECK(std::fabs(mean / 9.0) < 1e-10);
}

TEST_CASE("layout json round trip and parse validation") {
    Layout l;
    l.items = {{"hello", {100, 200, 300, 400}}};
    const std::string js = layout_to_json(l);
    Layout parsed = json_to_layout(js, {"hello"});
    REQUIRE(parsed.size() == 1);
    CHECK(parsed.items[0].label == "hello");
    CHECK(parsed.items[0].bbox.left == 100);
    CHECK(parsed.items[0].bbox.top == 200);
    CHECK(parsed.items[0].bbox.right == 300);
    CHECK(parsed.items[0].bbox.bottom == 400);

    // degenerate box (left > right)
    CHECK_THROWS_AS(
        json_to_layout(R"([{"label":"x","bbox":[300,200,100,400]}])", {"x"}), ProtocolError);
    // malformed json
    CHECK_THROWS_AS(json_to_layout("here you go: [100,", {"x"}), ProtocolError);
    // wrong labels
    CHECK_THROWS_AS(json_to_layout(R"([{"label":"y","bbox":[0,0,1,1]}])", {"x"}), ProtocolError);
    // non-integer coords
    CHECK_THROWS_AS(
        json_to_layout(R"([{"label":"x","bbox":[0.5,0,1,1]}])", {"x"}), ProtocolError);
    // raw response is carried in the error
    try {
        json_to_layout("garbage", {"x"});
        CHECK(false);
    } catch (const ProtocolError& e) {
        CHECK(e.raw_response == "garbage");
    }
}

TEST_CASE("json round-trip identity on random layouts") {
    Rng rng(43);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + int(rng.below(6));
        Layout l = random_layout(rng, n, 64);
        std::vector<std::string> labels;
        for (const auto& it : l.items) labels.push_back(it.label);
        Layout back = json_to_layout(layout_to_json(l), labels);
        REQUIRE(back.size() == l.size());
        for (size_t i = 0; i < l.size(); ++i) {
            CHECK(back.items[i].label == l.items[i].label);
            CHECK(back.items[i].bbox.left == l.items[i].bbox.left);
            CHECK(back.items[i].bbox.top == l.items[i].bbox.top);
            CHECK(back.items[i].bbox.right == l.items[i].bbox.right);
            CHECK(back.items[i].bbox.bottom == l.items[i].bbox.bottom);
        }
    }
}

TEST_CASE("baseline coarse planner: in-bounds, disjoint, deterministic") {
    LayoutTask task;
    task.canvas_w = 100;
    task.canvas_h = 200;
    task.labels = {"first line", "second", "third one here"};
    BaselinePlanner planner;
    Layout a = plan_coarse(task, planner);
    Layout b = plan_coarse(task, planner);
    REQUIRE(a.size() == 3);
    CHECK(layout_to_json(a) == layout_to_json(b));
    for (const auto& it : a.items) {
        CHECK(it.bbox.left >= 0);
        CHECK(it.bbox.top >= 0);
        CHECK(it.bbox.right <= 100);
        CHECK(it.bbox.bottom <= 200);
    }
    CHECK(reward_overlap(a, 1e-6) == 0.0);  // pairwise disjoint

    // single label is centered
    LayoutTask one;
    one.canvas_w = 100;
    one.canvas_h = 100;
    one.labels = {"solo"};
    Layout c = plan_coarse(one, planner);
    REQUIRE(c.size() == 1);
    const BBox& bb = c.items[0].bbox;
    CHECK(std::abs((bb.left + bb.right) / 2 - 50) <= 1);
}

TEST_CASE("baseline fine planner: equal subdivision") {
    BaselinePlanner planner;
    Layout l = plan_fine({0, 0, 100, 20}, 4, planner);
    REQUIRE(l.size() == 4);
    for (const auto& it : l.items) {
        CHECK(it.bbox.width() == 25);
        CHECK(it.bbox.top == 0);
        CHECK(it.bbox.bottom == 20);
    }
    CHECK(l.items[0].bbox.left == 0);
    CHECK(l.items[3].bbox.right == 100);
    CHECK(reward_balance(l) == 0.0);  // equal areas

    // one glyph fills the parent
    Layout single = plan_fine({10, 5, 60, 25}, 1, planner);
    REQUIRE(single.size() == 1);
    CHECK(single.items[0].bbox.left == 10);
    CHECK(single.items[0].bbox.right == 60);
    CHECK(single.items[0].bbox.top == 5);
    CHECK(single.items[0].bbox.bottom == 25);

    CHECK_THROWS_AS(plan_fine({0, 0, 100, 20}, 0, planner), ArgumentError);
}

TEST_CASE("mllm planner parses stub output or raises protocol errors") {
    LayoutTask task;
    task.canvas_w = 200;
    task.canvas_h = 300;
    task.caption = "a poster";
    task.labels = {"hello", "world"};

    auto ok_client = std::make_shared<clients::StubTextClient>();
    MllmPlanner good(ok_client);
    Layout l = good.plan(task);
    CHECK(l.size() == 2);
    CHECK(l.items[0].label == "hello");

    auto bad_client =
        std::make_shared<clients::StubTextClient>(clients::StubTextClient::Mode::Malformed);
    MllmPlanner bad(bad_client);
    CHECK_THROWS_AS(bad.plan(task), ProtocolError);
}

TEST_CASE("planner prompt substitutes every placeholder") {
    LayoutTask task;
    task.canvas_w = 128;
    task.canvas_h = 256;
    task.caption = "The design is about tea.";
    task.labels = {"green tea", "black tea"};
    const std::string p = planner_prompt(task);
    CHECK(p.find("{l}") == std::string::npos);
    CHECK(p.find("{w}") == std::string::npos);
    CHECK(p.find("{caption}") == std::string::npos);
    CHECK(p.find("w=128") != std::string::npos);
    CHECK(p.find("h=256") != std::string::npos);
    CHECK(p.find("The design is about tea.") != std::string::npos);
    CHECK(p.find("green tea") != std::string::npos);
    CHECK(p.find("[left, top, right, bottom]") != std::string::npos);
}

TEST_CASE("toy grpo: zero-lr control is flat, identical samples give zero update") {
    BaselinePlanner base;
    std::vector<GrpoTask> tasks;
    for (int i = 0; i < 4; ++i) {
        GrpoTask t;
        t.task.canvas_w = 64;
        t.task.canvas_h = 64;
        t.task.caption = "task " + std::to_string(i);
        t.task.labels = {"aaa", "bb"};
        t.gt = plan_coarse(t.task, base);
        tasks.push_back(std::move(t));
    }
    RewardWeights w;

    ToyLayoutPolicy p1(tasks, 0.3, 7);
    auto before = p1.task_params(0);
    auto res = grpo_toy_train(p1, tasks, 4, 20, 0.0, w, 1);
    CHECK(p1.task_params(0) == before);  // zero lr: parameters untouched
    CHECK(res.final_reward == doctest::Approx(res.initial_reward).epsilon(1e-12));

    // sigma 0 -> identical samples in the group -> zero advantages -> no update
    ToyLayoutPolicy p2(tasks, 0.0, 7);
    auto before2 = p2.task_params(0);
    grpo_toy_train(p2, tasks, 2, 10, 0.5, w, 2);
    CHECK(p2.task_params(0) == before2);

    CHECK_THROWS_AS(grpo_toy_train(p1, tasks, 1, 5, 0.1, w, 3), ArgumentError);
}

TEST_CASE("toy grpo: reward improves on fixed tasks") {
    BaselinePlanner base;
    std::vector<GrpoTask> tasks;
    for (int i = 0; i < 4; ++i) {
        GrpoTask t;
        t.task.canvas_w = 64;
        t.task.canvas_h = 64;
        t.task.caption = "task " + std::to_string(i);
        t.task.labels = {"headline", "sub"};
        t.gt = plan_coarse(t.task, base);
        tasks.push_back(std::move(t));
    }
    RewardWeights w;
    ToyLayoutPolicy policy(tasks, 0.25, 5);
    auto res = grpo_toy_train(policy, tasks, 8, 120, 0.08, w, 11);
    CHECK(res.final_reward > res.initial_reward + 0.05);
}
