#ifndef GLYPHFORGE_METRICS_HPP
#define GLYPHFORGE_METRICS_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "glyphforge/image.hpp"
#include "glyphforge/layout.hpp"

// Text-rendering evaluation: recognized lines are paired with ground truth by
// greedy IoU matching, then precision / recall / F / NED / accuracy are
// computed per case and macro-averaged by the benchmark runner.
namespace gf::metrics {

struct OCRLine {
    std::string text;
    layout::BBox bbox;
    double confidence = 1.0;
};

struct MatchPair {
    int pred_index = -1;
    int gt_index = -1;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_pred;
    std::vector<int> unmatched_gt;
};

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double ned = 0.0;  // mean normalized edit distance over gt lines (0 = perfect)
    double accuracy = 0.0;
    int n_pred = 0;
    int n_gt = 0;
    int n_matched = 0;
    bool empty_gt = false;
};

int levenshtein(const std::string& a, const std::string& b);
double ned(const std::string& a, const std::string& b);

// Greedy one-to-one matching by descending IoU; ties broken by lower pred
// index, then lower gt index. Pairs require iou >= iou_thresh in (0,1).
MatchResult match_lines(const std::vector<OCRLine>& pred, const std::vector<OCRLine>& gt,
                        double iou_thresh = 0.5);

MetricsReport compute_metrics(const MatchResult& match, const std::vector<OCRLine>& pred,
                              const std::vector<OCRLine>& gt);

// ---------------------------------------------------------------------------
// benchmark runner

struct BenchCase {
    std::string id;
    Image input;                  // optional inline image
    std::string input_path;       // or a blob path
    std::vector<OCRLine> gt_lines;
};

constexpr int kCaseSchemaVersion = 1;
std::vector<BenchCase> load_case_manifest(const std::string& path);
void write_case_manifest(const std::string& path, const std::vector<BenchCase>& cases);

class OCRClient {
public:
    virtual ~OCRClient() = default;
    virtual std::vector<OCRLine> recognize(const Image& image, const std::string& case_id) = 0;
};

// Reads the ground truth for the case (perfect recognizer).
class OracleOcr : public OCRClient {
public:
    explicit OracleOcr(const std::vector<BenchCase>& cases);
    std::vector<OCRLine> recognize(const Image& image, const std::string& case_id) override;

private:
    std::map<std::string, std::vector<OCRLine>> gt_;
};

class EmptyOcr : public OCRClient {
public:
    std::vector<OCRLine> recognize(const Image&, const std::string&) override { return {}; }
};

// Seeded character corruption of the ground truth.
class NoisyOcr : public OCRClient {
public:
    NoisyOcr(const std::vector<BenchCase>& cases, double char_error_rate, uint64_t seed);
    std::vector<OCRLine> recognize(const Image& image, const std::string& case_id) override;

private:
    std::map<std::string, std::vector<OCRLine>> gt_;
    double rate_;
    uint64_t seed_;
};

// The system under test maps a case to an output image.
using BenchSystem = std::function<Image(const BenchCase&)>;

struct BenchRun {
    MetricsReport aggregate;  // macro average over successful cases
    std::vector<std::pair<std::string, MetricsReport>> per_case;
    std::vector<std::pair<std::string, std::string>> failures;  // id -> error
};

BenchRun run_benchmark(const std::vector<BenchCase>& cases, const BenchSystem& system,
                       OCRClient& ocr, double iou_thresh = 0.5);

constexpr int kReportSchemaVersion = 1;
void write_report_json(const std::string& path, const BenchRun& run);
void write_report_csv(const std::string& path, const BenchRun& run);

}  // namespace gf::metrics

#endif
