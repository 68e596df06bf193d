#include "glyphforge/nsd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "glyphforge/rng.hpp"

namespace gf::filter {

void StyleFeature::validate() const {
    if (v.empty()) throw ArgumentError("style feature: empty vector");
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double norm = std::sqrt(ss);
    if (std::fabs(norm - 1.0) > 1e-3)
        throw ArgumentError("style feature: not unit norm (" + std::to_string(norm) + ")");
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

int nearest_center(const double* x, const std::vector<double>& centers, int k, int d,
                   double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (int j = 0; j < k; ++j) {
        const double dj = sq_dist(x, centers.data() + size_t(j) * d, d);
        if (dj < best_d) {
            best_d = dj;
            best = j;
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

}  // namespace

ClusterModel kmeans_fit(const std::vector<StyleFeature>& features, int k, uint64_t seed,
                        int max_iters, double tol) {
    if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
    if (int(features.size()) < k)
        throw ArgumentError("kmeans: need at least k features (" + std::to_string(features.size()) +
                            " < " + std::to_string(k) + ")");
    const int d = int(features.front().v.size());
    for (const auto& f : features) {
        f.validate();
        if (int(f.v.size()) != d) throw ArgumentError("kmeans: inconsistent feature dims");
    }
    const int n = int(features.size());

    ClusterModel model;
    model.k = k;
    model.d = d;
    model.seed = seed;
    model.centers.assign(size_t(k) * d, 0.0);

    // k-means++ seeding
    Rng rng(hash_combine(0x6b6d5050ULL, seed));
    std::vector<double> min_d2(size_t(n), std::numeric_limits<double>::max());
    {
        const int first = int(rng.below(uint64_t(n)));
        std::copy(features[size_t(first)].v.begin(), features[size_t(first)].v.end(),
                  model.centers.begin());
        for (int j = 1; j < k; ++j) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dj =
                    sq_dist(features[size_t(i)].v.data(), model.centers.data() + size_t(j - 1) * d, d);
                min_d2[size_t(i)] = std::min(min_d2[size_t(i)], dj);
                total += min_d2[size_t(i)];
            }
            double r = rng.uniform() * total;
            int pick = n - 1;
            for (int i = 0; i < n; ++i) {
                r -= min_d2[size_t(i)];
                if (r <= 0.0) { pick = i; break; }
            }
            std::copy(features[size_t(pick)].v.begin(), features[size_t(pick)].v.end(),
                      model.centers.begin() + size_t(j) * d);
        }
    }

    std::vector<int> assign(size_t(n), -1);
    double prev_inertia = std::numeric_limits<double>::max();
    for (int iter = 0; iter < max_iters; ++iter) {
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            double dist = 0.0;
            assign[size_t(i)] = nearest_center(features[size_t(i)].v.data(), model.centers, k, d,
                                               &dist);
            inertia += dist;
        }
        if (inertia > prev_inertia + 1e-9)
            throw ContractError("kmeans: inertia increased between iterations");
        model.inertia = inertia;

        std::vector<double> new_centers(size_t(k) * d, 0.0);
        std::vector<int> counts(size_t(k), 0);
        for (int i = 0; i < n; ++i) {
            const int a = assign[size_t(i)];
            counts[size_t(a)]++;
            const double* x = features[size_t(i)].v.data();
            double* c = new_centers.data() + size_t(a) * d;
            for (int j = 0; j < d; ++j) c[j] += x[j];
        }
        double movement = 0.0;
        for (int j = 0; j < k; ++j) {
            double* c = new_centers.data() + size_t(j) * d;
            if (counts[size_t(j)] == 0) {
                // keep empty clusters in place
                std::copy(model.centers.begin() + size_t(j) * d,
                          model.centers.begin() + size_t(j + 1) * d, c);
            } else {
                for (int jj = 0; jj < d; ++jj) c[jj] /= counts[size_t(j)];
            }
            movement += std::sqrt(sq_dist(c, model.centers.data() + size_t(j) * d, d));
        }
        model.centers = std::move(new_centers);
        if (movement < tol && iter > 0) break;
        prev_inertia = inertia;
    }
    // final inertia against the settled centers
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        double dist = 0.0;
        nearest_center(features[size_t(i)].v.data(), model.centers, k, d, &dist);
        inertia += dist;
    }
    model.inertia = inertia;
    return model;
}

double nsd(const StyleFeature& feature, const ClusterModel& model, bool normalize_half) {
    if (int(feature.v.size()) != model.d)
        throw ArgumentError("nsd: feature dim " + std::to_string(feature.v.size()) +
                            " != model dim " + std::to_string(model.d));
    double dist = 0.0;
    nearest_center(feature.v.data(), model.centers, model.k, model.d, &dist);
    const double value = std::sqrt(dist);
    return normalize_half ? value / 2.0 : value;
}

FilterResult filter_by_nsd(const std::vector<FilterSample>& samples, const ClusterModel& model,
                           double threshold, FilterMode mode, bool normalize_half) {
    if (threshold < 0.0) throw ArgumentError("filter_by_nsd: threshold must be >= 0");
    FilterResult res;
    for (const auto& s : samples) {
        const double score = nsd(s.feature, model, normalize_half);
        const bool keep = mode == FilterMode::KeepAbove ? score > threshold : score <= threshold;
        res.rows.push_back({s.id, score, keep});
        if (keep) res.kept.push_back(s);
    }
    return res;
}

void write_filter_report(const std::string& csv_path, const FilterResult& result, int bins) {
    std::ofstream f(csv_path);
    if (!f) throw IoError("cannot write filter report: " + csv_path);
    f << "id,nsd,kept\n";
    double max_nsd = 0.0;
    for (const auto& r : result.rows) {
        f << r.id << "," << r.nsd << "," << (r.kept ? 1 : 0) << "\n";
        max_nsd = std::max(max_nsd, r.nsd);
    }

    nlohmann::json hist;
    hist["bins"] = bins;
    hist["max"] = max_nsd;
    std::vector<int> counts(size_t(bins), 0);
    const double width = max_nsd > 0 ? max_nsd / bins : 1.0;
    for (const auto& r : result.rows) {
        int b = int(r.nsd / width);
        b = std::min(b, bins - 1);
        counts[size_t(b)]++;
    }
    hist["counts"] = counts;
    hist["kept"] = result.kept.size();
    hist["total"] = result.rows.size();
    std::ofstream hf(csv_path + ".hist.json");
    if (!hf) throw IoError("cannot write histogram: " + csv_path + ".hist.json");
    hf << hist.dump(2) << "\n";
}

}  // namespace gf::filter
