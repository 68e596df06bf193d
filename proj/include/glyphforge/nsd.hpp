#ifndef GLYPHFORGE_NSD_HPP
#define GLYPHFORGE_NSD_HPP

#include <string>
#include <vector>

#include "glyphforge/errors.hpp"

// Style-diversity filtering: K-means over unit-norm style features, with the
// per-sample score being the distance to the nearest cluster center.
namespace gf::filter {

struct StyleFeature {
    std::vector<double> v;

    void validate() const;  // unit 2-norm within 1e-3
};

struct ClusterModel {
    std::vector<double> centers;  // k * d, row-major
    int k = 0;
    int d = 0;
    uint64_t seed = 0;
    double inertia = 0.0;
};

ClusterModel kmeans_fit(const std::vector<StyleFeature>& features, int k, uint64_t seed,
                        int max_iters = 100, double tol = 1e-6);

// Minimum Euclidean distance from the feature to any center. The raw value
// can exceed 1 for unit features; normalize_half divides by 2 to force [0,1].
double nsd(const StyleFeature& feature, const ClusterModel& model, bool normalize_half = false);

enum class FilterMode { KeepAbove, KeepBelow };

struct FilterSample {
    int id = 0;
    StyleFeature feature;
};

struct FilterRow {
    int id = 0;
    double nsd = 0.0;
    bool kept = false;
};

struct FilterResult {
    std::vector<FilterSample> kept;
    std::vector<FilterRow> rows;  // one per input sample, input order
};

// Keeps samples by comparing nsd against the threshold. KeepAbove keeps
// nsd > d (the diverse tail); KeepBelow keeps nsd <= d.
FilterResult filter_by_nsd(const std::vector<FilterSample>& samples, const ClusterModel& model,
                           double threshold, FilterMode mode = FilterMode::KeepAbove,
                           bool normalize_half = false);

// CSV table (id,nsd,kept) plus a histogram summary JSON next to it.
void write_filter_report(const std::string& csv_path, const FilterResult& result, int bins = 20);

}  // namespace gf::filter

#endif
