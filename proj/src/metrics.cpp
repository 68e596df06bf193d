#include "glyphforge/metrics.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "glyphforge/rng.hpp"
#include "glyphforge/synth.hpp"

namespace gf::metrics {

int levenshtein(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return int(m);
    if (m == 0) return int(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = int(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = int(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double ned(const std::string& a, const std::string& b) {
    const size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 0.0;
    return double(levenshtein(a, b)) / double(longest);
}

MatchResult match_lines(const std::vector<OCRLine>& pred, const std::vector<OCRLine>& gt,
                        double iou_thresh) {
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
        throw ArgumentError("match_lines: iou_thresh must be in (0,1)");
    struct Cand {
        double iou;
        int pi, gi;
    };
    std::vector<Cand> cands;
    for (int pi = 0; pi < int(pred.size()); ++pi)
        for (int gi = 0; gi < int(gt.size()); ++gi) {
            const double v = layout::iou(pred[size_t(pi)].bbox, gt[size_t(gi)].bbox, 1e-9);
            if (v >= iou_thresh) cands.push_back({v, pi, gi});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.pi != b.pi) return a.pi < b.pi;
        return a.gi < b.gi;
    });

    MatchResult res;
    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    for (const auto& c : cands) {
        if (pred_used[size_t(c.pi)] || gt_used[size_t(c.gi)]) continue;
        pred_used[size_t(c.pi)] = true;
        gt_used[size_t(c.gi)] = true;
        res.pairs.push_back({c.pi, c.gi, c.iou});
    }
    for (int pi = 0; pi < int(pred.size()); ++pi)
        if (!pred_used[size_t(pi)]) res.unmatched_pred.push_back(pi);
    for (int gi = 0; gi < int(gt.size()); ++gi)
        if (!gt_used[size_t(gi)]) res.unmatched_gt.push_back(gi);
    return res;
}

MetricsReport compute_metrics(const MatchResult& match, const std::vector<OCRLine>& pred,
                              const std::vector<OCRLine>& gt) {
    MetricsReport r;
    r.n_pred = int(pred.size());
    r.n_gt = int(gt.size());
    r.n_matched = int(match.pairs.size());

    int tp = 0;
    std::vector<const std::string*> matched_text(gt.size(), nullptr);
    for (const auto& p : match.pairs) {
        const std::string& pt = pred[size_t(p.pred_index)].text;
        matched_text[size_t(p.gt_index)] = &pt;
        if (pt == gt[size_t(p.gt_index)].text) ++tp;
    }

    r.precision = r.n_pred > 0 ? double(tp) / r.n_pred : 0.0;
    if (r.n_gt == 0) {
        r.empty_gt = true;
        r.recall = 0.0;
        r.accuracy = 0.0;
        r.ned = 0.0;
    } else {
        r.recall = double(tp) / r.n_gt;
        r.accuracy = r.recall;  // exact-match rate over gt lines
        double acc_ned = 0.0;
        for (size_t gi = 0; gi < gt.size(); ++gi) {
            const std::string best = matched_text[gi] ? *matched_text[gi] : std::string();
            acc_ned += ned(best, gt[gi].text);
        }
        r.ned = acc_ned / double(gt.size());
    }
    const double pr = r.precision + r.recall;
    r.f_score = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// manifests

std::vector<BenchCase> load_case_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open case manifest: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.at("schema_version").get<int>() != kCaseSchemaVersion)
        throw IoError("unsupported case manifest schema in " + path);
    std::vector<BenchCase> cases;
    for (const auto& e : j.at("cases")) {
        BenchCase c;
        c.id = e.at("id").get<std::string>();
        if (e.contains("inputs") && e.at("inputs").contains("image"))
            c.input_path = e.at("inputs").at("image").get<std::string>();
        for (const auto& g : e.at("gt")) {
            OCRLine line;
            line.text = g.at("text").get<std::string>();
            const auto& bb = g.at("bbox");
            line.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
            c.gt_lines.push_back(std::move(line));
        }
        cases.push_back(std::move(c));
    }
    return cases;
}

void write_case_manifest(const std::string& path, const std::vector<BenchCase>& cases) {
    nlohmann::json j;
    j["schema_version"] = kCaseSchemaVersion;
    auto& list = j["cases"] = nlohmann::json::array();
    for (const auto& c : cases) {
        nlohmann::json e;
        e["id"] = c.id;
        if (!c.input_path.empty()) e["inputs"]["image"] = c.input_path;
        auto& gt = e["gt"] = nlohmann::json::array();
        for (const auto& line : c.gt_lines)
            gt.push_back({{"text", line.text},
                          {"bbox", {line.bbox.left, line.bbox.top, line.bbox.right,
                                    line.bbox.bottom}}});
        list.push_back(std::move(e));
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot write case manifest: " + path);
    f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// OCR stubs

OracleOcr::OracleOcr(const std::vector<BenchCase>& cases) {
    for (const auto& c : cases) gt_[c.id] = c.gt_lines;
}

std::vector<OCRLine> OracleOcr::recognize(const Image&, const std::string& case_id) {
    const auto it = gt_.find(case_id);
    return it == gt_.end() ? std::vector<OCRLine>{} : it->second;
}

NoisyOcr::NoisyOcr(const std::vector<BenchCase>& cases, double char_error_rate, uint64_t seed)
    : rate_(char_error_rate), seed_(seed) {
    for (const auto& c : cases) gt_[c.id] = c.gt_lines;
}

std::vector<OCRLine> NoisyOcr::recognize(const Image&, const std::string& case_id) {
    const auto it = gt_.find(case_id);
    if (it == gt_.end()) return {};
    uint64_t h = seed_;
    for (char c : case_id) h = hash_combine(h, uint64_t(c));
    Rng rng(h);
    auto lines = it->second;
    const auto& alphabet = synth::charset_chars();
    for (auto& line : lines)
        for (auto& ch : line.text)
            if (rng.bernoulli(rate_)) ch = alphabet[size_t(rng.below(alphabet.size()))];
    return lines;
}

// ---------------------------------------------------------------------------
// runner

BenchRun run_benchmark(const std::vector<BenchCase>& cases, const BenchSystem& system,
                       OCRClient& ocr, double iou_thresh) {
    if (cases.empty()) throw ArgumentError("run_benchmark: no cases");
    BenchRun run;
    double p = 0, rcl = 0, f = 0, nd = 0, acc = 0;
    int n_pred = 0, n_gt = 0, n_matched = 0;
    for (const auto& c : cases) {
        try {
            Image out = system(c);
            auto pred = ocr.recognize(out, c.id);
            auto match = match_lines(pred, c.gt_lines, iou_thresh);
            auto rep = compute_metrics(match, pred, c.gt_lines);
            run.per_case.emplace_back(c.id, rep);
            p += rep.precision;
            rcl += rep.recall;
            f += rep.f_score;
            nd += rep.ned;
            acc += rep.accuracy;
            n_pred += rep.n_pred;
            n_gt += rep.n_gt;
            n_matched += rep.n_matched;
        } catch (const std::exception& e) {
            run.failures.emplace_back(c.id, e.what());
        }
    }
    if (run.per_case.empty())
        throw Error("run_benchmark: every case failed (" +
                    std::to_string(run.failures.size()) + " failures)");
    const double n = double(run.per_case.size());
    run.aggregate.precision = p / n;
    run.aggregate.recall = rcl / n;
    run.aggregate.f_score = f / n;
    run.aggregate.ned = nd / n;
    run.aggregate.accuracy = acc / n;
    run.aggregate.n_pred = n_pred;
    run.aggregate.n_gt = n_gt;
    run.aggregate.n_matched = n_matched;
    return run;
}

namespace {
nlohmann::json report_to_json(const MetricsReport& r) {
    return {{"precision", r.precision}, {"recall", r.recall},   {"f_score", r.f_score},
            {"ned", r.ned},             {"accuracy", r.accuracy}, {"n_pred", r.n_pred},
            {"n_gt", r.n_gt},           {"n_matched", r.n_matched}, {"empty_gt", r.empty_gt}};
}
}  // namespace

void write_report_json(const std::string& path, const BenchRun& run) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["aggregate"] = report_to_json(run.aggregate);
    auto& pc = j["per_case"] = nlohmann::json::array();
    for (const auto& [id, rep] : run.per_case) {
        nlohmann::json e = report_to_json(rep);
        e["id"] = id;
        pc.push_back(std::move(e));
    }
    auto& fl = j["failures"] = nlohmann::json::array();
    for (const auto& [id, err] : run.failures) fl.push_back({{"id", id}, {"error", err}});
    std::ofstream f(path);
    if (!f) throw IoError("cannot write report: " + path);
    f << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const BenchRun& run) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write report: " + path);
    f << "schema_version," << kReportSchemaVersion << "\n";
    f << "id,precision,recall,f_score,ned,accuracy,n_pred,n_gt,n_matched\n";
    for (const auto& [id, r] : run.per_case)
        f << id << "," << r.precision << "," << r.recall << "," << r.f_score << "," << r.ned << ","
          << r.accuracy << "," << r.n_pred << "," << r.n_gt << "," << r.n_matched << "\n";
}

}  // namespace gf::metrics
