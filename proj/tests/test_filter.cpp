#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "glyphforge/nsd.hpp"
#include "glyphforge/rng.hpp"

using namespace gf;
using namespace gf::filter;

namespace {

StyleFeature unit_feature(std::vector<double> v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double inv = 1.0 / std::sqrt(ss);
    for (auto& x : v) x *= inv;
    return {std::move(v)};
}

std::vector<StyleFeature> random_unit_features(Rng& rng, int n, int d) {
    std::vector<StyleFeature> fs;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(size_t(d), 0.0);
        for (auto& x : v) x = rng.normal();
        fs.push_back(unit_feature(std::move(v)));
    }
    return fs;
}

}  // namespace

TEST_CASE("kmeans degenerate case: k == n gives zero inertia") {
    Rng rng(3);
    auto fs = random_unit_features(rng, 5, 6);
    auto model = kmeans_fit(fs, 5, 0);
    CHECK(model.inertia == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    for (const auto& f : fs) CHECK(nsd(f, model) == doctest::Approx(0.0).scale(1).epsilon(1e-9));
}

TEST_CASE("kmeans recovers two well-separated clouds") {
    Rng rng(5);
    std::vector<StyleFeature> fs;
    // two tight caps around orthogonal unit vectors
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v(8, 0.0);
        v[0] = 1.0;
        for (auto& x : v) x += rng.normal(0.0, 0.01);
        fs.push_back(unit_feature(std::move(v)));
    }
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v(8, 0.0);
        v[3] = 1.0;
        for (auto& x : v) x += rng.normal(0.0, 0.01);
        fs.push_back(unit_feature(std::move(v)));
    }
    auto model = kmeans_fit(fs, 2, 7);

    // analytic means of the constructed clouds
    std::vector<double> mean_a(8, 0.0), mean_b(8, 0.0);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 8; ++j) {
            mean_a[size_t(j)] += fs[size_t(i)].v[size_t(j)] / 40.0;
            mean_b[size_t(j)] += fs[size_t(40 + i)].v[size_t(j)] / 40.0;
        }
    auto dist_to_center = [&](const std::vector<double>& m) {
        double best = 1e18;
        for (int c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (int j = 0; j < 8; ++j) {
                const double d = m[size_t(j)] - model.centers[size_t(c) * 8 + size_t(j)];
                acc += d * d;
            }
            best = std::min(best, std::sqrt(acc));
        }
        return best;
    };
    CHECK(dist_to_center(mean_a) < 1e-6);
    CHECK(dist_to_center(mean_b) < 1e-6);
}

TEST_CASE("kmeans determinism and argument validation") {
    Rng rng(11);
    auto fs = random_unit_features(rng, 30, 5);
    auto m1 = kmeans_fit(fs, 4, 123);
    auto m2 = kmeans_fit(fs, 4, 123);
    CHECK(m1.centers == m2.centers);
    CHECK(m1.inertia == m2.inertia);

    CHECK_THROWS_AS(kmeans_fit(fs, 31, 0), ArgumentError);
    CHECK_THROWS_AS(kmeans_fit(fs, 0, 0), ArgumentError);
}

TEST_CASE("nsd closed forms and exhaustive-min oracle") {
    // centers at unit basis vectors e1, e2
    ClusterModel model;
    model.k = 2;
    model.d = 4;
    model.centers = {1, 0, 0, 0, 0, 1, 0, 0};

    StyleFeature at_center = unit_feature({1, 0, 0, 0});
    CHECK(nsd(at_center, model) == doctest::Approx(0.0).scale(1).epsilon(1e-12));

    // (e1+e2)/sqrt(2): distance sqrt(2 - sqrt(2)) to either center
    StyleFeature between = unit_feature({1, 1, 0, 0});
    CHECK(nsd(between, model) == doctest::Approx(std::sqrt(2.0 - std::sqrt(2.0))).epsilon(1e-12));
    CHECK(nsd(between, model) == doctest::Approx(0.7653668647).epsilon(1e-9));

    // brute-force min over centers
    Rng rng(13);
    auto fs = random_unit_features(rng, 50, 4);
    auto fitted = kmeans_fit(fs, 5, 3);
    for (const auto& f : fs) {
        double brute = 1e18;
        for (int c = 0; c < fitted.k; ++c) {
            double acc = 0.0;
            for (int j = 0; j < fitted.d; ++j) {
                const double d = f.v[size_t(j)] - fitted.centers[size_t(c) * 4 + size_t(j)];
                acc += d * d;
            }
            brute = std::min(brute, std::sqrt(acc));
        }
        CHECK(std::fabs(nsd(f, fitted) - brute) < 1e-12);
        CHECK(nsd(f, fitted) >= 0.0);
    }

    StyleFeature wrong_dim = unit_feature({1, 0, 0});
    CHECK_THROWS_AS(nsd(wrong_dim, model), ArgumentError);

    // the /2 normalization flag halves the value
    CHECK(nsd(between, model, true) == doctest::Approx(nsd(between, model) / 2.0));
}

TEST_CASE("nsd is 1-Lipschitz in the feature") {
    Rng rng(17);
    auto fs = random_unit_features(rng, 40, 6);
    auto model = kmeans_fit(fs, 6, 1);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = random_unit_features(rng, 1, 6)[0];
        auto b = random_unit_features(rng, 1, 6)[0];
        double dist = 0.0;
        for (int j = 0; j < 6; ++j) {
            const double d = a.v[size_t(j)] - b.v[size_t(j)];
            dist += d * d;
        }
        dist = std::sqrt(dist);
        CHECK(std::fabs(nsd(a, model) - nsd(b, model)) <= dist + 1e-12);
    }
}

TEST_CASE("filter_by_nsd boundaries, partition, idempotence") {
    Rng rng(19);
    auto fs = random_unit_features(rng, 60, 5);
    auto model = kmeans_fit(fs, 4, 2);
    std::vector<FilterSample> samples;
    for (int i = 0; i < 60; ++i) samples.push_back({i, fs[size_t(i)]});

    // d = 0, keep_above keeps everything with nsd > 0
    auto all = filter_by_nsd(samples, model, 0.0, FilterMode::KeepAbove);
    int positive = 0;
    for (const auto& r : all.rows)
        if (r.nsd > 0.0) ++positive;
    CHECK(int(all.kept.size()) == positive);

    // huge threshold keeps nothing
    auto none = filter_by_nsd(samples, model, 1e9, FilterMode::KeepAbove);
    CHECK(none.kept.empty());

    // keep_above(d) and keep_below(d) partition the set
    const double d = 0.3;
    auto above = filter_by_nsd(samples, model, d, FilterMode::KeepAbove);
    auto below = filter_by_nsd(samples, model, d, FilterMode::KeepBelow);
    CHECK(above.kept.size() + below.kept.size() == samples.size());
    for (const auto& s : above.kept) CHECK(nsd(s.feature, model) > d);
    for (const auto& s : below.kept) CHECK(nsd(s.feature, model) <= d);

    // idempotence
    auto again = filter_by_nsd(above.kept, model, d, FilterMode::KeepAbove);
    CHECK(again.kept.size() == above.kept.size());

    CHECK_THROWS_AS(filter_by_nsd(samples, model, -1.0, FilterMode::KeepAbove), ArgumentError);
}

TEST_CASE("filter report writes csv and histogram") {
    Rng rng(23);
    auto fs = random_unit_features(rng, 20, 4);
    auto model = kmeans_fit(fs, 3, 0);
    std::vector<FilterSample> samples;
    for (int i = 0; i < 20; ++i) samples.push_back({i, fs[size_t(i)]});
    auto result = filter_by_nsd(samples, model, 0.2, FilterMode::KeepAbove);

    namespace fsys = std::filesystem;
    const auto dir = fsys::temp_directory_path() / "gf_filter_test";
    fsys::create_directories(dir);
    const std::string csv = (dir / "report.csv").string();
    write_filter_report(csv, result);
    CHECK(fsys::exists(csv));
    CHECK(fsys::exists(csv + ".hist.json"));
    fsys::remove_all(dir);
}
