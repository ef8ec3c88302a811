#include "spotid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "spotid/components.hpp"
#include "spotid/errors.hpp"
#include "spotid/parallel.hpp"

namespace spotid::evaluation {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pct(std::int64_t num, std::int64_t den) { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

ConfusionMatrix2x2 confusion(const BinaryMask& gt, const BinaryMask& seg) {
    if (!gt.same_shape(seg)) throw InvalidInput("confusion: mask dimensions differ");
    ConfusionMatrix2x2 c;
    const auto g = gt.data();
    const auto s = seg.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i]) {
            (s[i] ? c.tp : c.fn)++;
        } else {
            (s[i] ? c.fp : c.tn)++;
        }
    }
    if (const auto bg = c.tn + c.fp; bg > 0) {
        c.x11 = pct(c.tn, bg);
        c.x21 = pct(c.fp, bg);
    }
    if (const auto fg = c.fn + c.tp; fg > 0) {
        c.x12 = pct(c.fn, fg);
        c.x22 = pct(c.tp, fg);
    }
    return c;
}

Prf prf(const ConfusionMatrix2x2& c) {
    Prf out;
    if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (out.precision && out.recall && *out.precision + *out.recall > 0.0) {
        out.f_measure = 2.0 * *out.precision * *out.recall / (*out.precision + *out.recall);
    }
    return out;
}

namespace {

double frac(int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; }

}  // namespace

double HooverPoint::correct_fraction() const { return frac(correct, gt_regions); }
double HooverPoint::over_fraction() const { return frac(over, gt_regions); }
double HooverPoint::under_fraction() const { return frac(under, gt_regions); }
double HooverPoint::missed_fraction() const { return frac(missed, gt_regions); }
double HooverPoint::noise_fraction() const { return frac(noise, machine_regions); }

std::vector<double> default_hoover_tolerances() {
    std::vector<double> out{0.51};
    for (int k = 11; k <= 20; ++k) out.push_back(k * 0.05);
    return out;
}

HooverCurves hoover(const BinaryMask& gt, const BinaryMask& seg, const std::vector<double>& tolerances) {
    if (!gt.same_shape(seg)) throw InvalidInput("hoover: mask dimensions differ");
    for (double t : tolerances) {
        if (!(t > 0.5 && t <= 1.0)) throw InvalidParameter("hoover tolerance must lie in (0.5, 1]");
    }

    const auto gl = imaging::label_components(gt);
    const auto ml = imaging::label_components(seg);
    const int ng = gl.count();
    const int nm = ml.count();

    // overlap[g][m] in pixels, sparse per GT region.
    std::vector<std::map<int, std::int64_t>> overlap(static_cast<std::size_t>(ng));
    for (std::size_t i = 0; i < gl.labels.size(); ++i) {
        if (gl.labels[i] && ml.labels[i]) overlap[gl.labels[i] - 1][ml.labels[i] - 1]++;
    }
    std::vector<std::vector<std::pair<int, std::int64_t>>> by_machine(static_cast<std::size_t>(nm));
    for (int g = 0; g < ng; ++g) {
        for (const auto& [m, o] : overlap[g]) by_machine[m].emplace_back(g, o);
    }
    auto gsize = [&](int g) { return static_cast<double>(gl.areas[g]); };
    auto msize = [&](int m) { return static_cast<double>(ml.areas[m]); };

    enum Class : std::uint8_t { None, Correct, Over, Under };
    HooverCurves curves;
    for (double t : tolerances) {
        std::vector<Class> gc(static_cast<std::size_t>(ng), None);
        std::vector<Class> mc(static_cast<std::size_t>(nm), None);

        for (int g = 0; g < ng; ++g) {
            for (const auto& [m, o] : overlap[g]) {
                if (o >= t * gsize(g) && o >= t * msize(m) && mc[m] == None) {
                    gc[g] = Correct;
                    mc[m] = Correct;
                    break;
                }
            }
        }

        for (int g = 0; g < ng; ++g) {
            if (gc[g] != None) continue;
            std::vector<int> parts;
            double covered = 0.0;
            for (const auto& [m, o] : overlap[g]) {
                if (mc[m] == None && o >= t * msize(m)) {
                    parts.push_back(m);
                    covered += static_cast<double>(o);
                }
            }
            if (parts.size() >= 2 && covered >= t * gsize(g)) {
                gc[g] = Over;
                for (int m : parts) mc[m] = Over;
            }
        }

        for (int m = 0; m < nm; ++m) {
            if (mc[m] != None) continue;
            std::vector<int> parts;
            double covered = 0.0;
            for (const auto& [g, o] : by_machine[m]) {
                if (gc[g] == None && o >= t * gsize(g)) {
                    parts.push_back(g);
                    covered += static_cast<double>(o);
                }
            }
            if (parts.size() >= 2 && covered >= t * msize(m)) {
                mc[m] = Under;
                for (int g : parts) gc[g] = Under;
            }
        }

        HooverPoint p;
        p.tolerance = t;
        p.gt_regions = ng;
        p.machine_regions = nm;
        for (Class c : gc) {
            switch (c) {
                case Correct: ++p.correct; break;
                case Over: ++p.over; break;
                case Under: ++p.under; break;
                case None: ++p.missed; break;
            }
        }
        p.noise = static_cast<int>(std::count(mc.begin(), mc.end(), None));
        curves.points.push_back(p);
    }
    return curves;
}

bool DissimilarityMatrix::excluded(std::size_t i, std::size_t j) const {
    return i == j || !std::isfinite(at(i, j));
}

DissimilarityMatrix build_dissimilarity_matrix(const Gallery& source, const Gallery& target,
                                               matching::Method method, const MatrixOptions& options) {
    std::vector<ScaleKey> src_keys;
    std::vector<ScaleKey> tgt_keys;
    for (const auto& r : source.records) src_keys.push_back(r.key());
    for (const auto& r : target.records) tgt_keys.push_back(r.key());
    std::sort(src_keys.begin(), src_keys.end());
    std::sort(tgt_keys.begin(), tgt_keys.end());
    if (src_keys != tgt_keys) throw InvalidInput("source and target galleries hold different scale rosters");
    if (std::adjacent_find(src_keys.begin(), src_keys.end()) != src_keys.end()) {
        throw InvalidInput("gallery roster has duplicate keys");
    }

    DissimilarityMatrix m;
    m.labels = src_keys;
    const std::size_t n = m.labels.size();
    m.values.assign(n * n, kNaN);

    std::vector<const gallery::GalleryRecord*> src(n);
    std::vector<const gallery::GalleryRecord*> tgt(n);
    for (std::size_t i = 0; i < n; ++i) {
        src[i] = source.find(m.labels[i]);
        tgt[i] = target.find(m.labels[i]);
    }

    parallel_for(n * n, options.threads, [&](std::size_t cell) {
        const std::size_t i = cell / n;
        const std::size_t j = cell % n;
        if (i == j) return;
        try {
            m.values[cell] = matching::match(src[i]->mask, *tgt[j], method, options.match).score.dissimilarity;
        } catch (const UnmatchableRecord&) {
            m.values[cell] = kNaN;
        }
    });
    return m;
}

std::string matrix_to_csv(const DissimilarityMatrix& m) {
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& l : m.labels) os << ',' << l.label();
    os << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << m.labels[i].label();
        for (std::size_t j = 0; j < m.size(); ++j) {
            os << ',';
            if (!m.excluded(i, j)) os << m.at(i, j);
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

DissimilarityMatrix matrix_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("matrix CSV is empty");
    const auto header = split_csv_line(line);
    if (header.empty() || !header[0].empty()) throw InvalidInput("matrix CSV header must start with an empty cell");

    DissimilarityMatrix m;
    for (std::size_t k = 1; k < header.size(); ++k) m.labels.push_back(ScaleKey::parse_label(header[k]));
    const std::size_t n = m.labels.size();
    m.values.assign(n * n, kNaN);

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (row >= n) throw InvalidInput("matrix CSV has more rows than labels");
        if (cells.size() != n + 1) throw InvalidInput("matrix CSV row " + std::to_string(row + 1) + " has wrong width");
        if (ScaleKey::parse_label(cells[0]) != m.labels[row]) {
            throw InvalidInput("matrix CSV row label '" + cells[0] + "' does not match column order");
        }
        for (std::size_t j = 0; j < n; ++j) {
            const std::string& c = cells[j + 1];
            if (c.empty() || row == j) continue;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != c.size()) throw InvalidInput("matrix CSV cell '" + c + "' is not a number");
            if (std::isfinite(v) && v < 0.0) throw InvalidInput("matrix CSV holds a negative dissimilarity");
            m.at(row, j) = v;
        }
        ++row;
    }
    if (row != n) throw InvalidInput("matrix CSV has fewer rows than labels");
    return m;
}

ScoreSets split_scores(const DissimilarityMatrix& m) {
    ScoreSets s;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (m.excluded(i, j)) continue;
            if (m.labels[i].individual_id == m.labels[j].individual_id) {
                s.genuine.push_back(m.at(i, j));
            } else {
                s.impostor.push_back(m.at(i, j));
            }
        }
    }
    return s;
}

namespace {

RocCurves sweep(const ScoreSets& s, std::vector<double> thresholds) {
    if (s.genuine.empty() || s.impostor.empty()) {
        throw InvalidInput("FAR/FRR needs at least one genuine and one impostor score");
    }
    std::vector<double> gen = s.genuine;
    std::vector<double> imp = s.impostor;
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());

    RocCurves roc;
    roc.thresholds = std::move(thresholds);
    for (double t : roc.thresholds) {
        const auto acc_imp = std::upper_bound(imp.begin(), imp.end(), t) - imp.begin();
        const auto acc_gen = std::upper_bound(gen.begin(), gen.end(), t) - gen.begin();
        roc.far.push_back(static_cast<double>(acc_imp) / static_cast<double>(imp.size()));
        roc.frr.push_back(static_cast<double>(gen.size() - static_cast<std::size_t>(acc_gen)) /
                          static_cast<double>(gen.size()));
    }

    // First threshold where FAR reaches FRR; interpolate from the one before.
    std::size_t k = 0;
    while (k < roc.far.size() && roc.far[k] < roc.frr[k]) ++k;
    if (k == 0) {
        roc.eer = 0.5 * (roc.far[0] + roc.frr[0]);
        roc.eer_threshold = roc.thresholds[0];
    } else if (k == roc.far.size()) {
        roc.eer = 0.5 * (roc.far.back() + roc.frr.back());
        roc.eer_threshold = roc.thresholds.back();
    } else {
        const double d0 = roc.far[k - 1] - roc.frr[k - 1];
        const double d1 = roc.far[k] - roc.frr[k];
        const double a = -d0 / (d1 - d0);
        roc.eer = roc.far[k - 1] + a * (roc.far[k] - roc.far[k - 1]);
        roc.eer_threshold = roc.thresholds[k - 1] + a * (roc.thresholds[k] - roc.thresholds[k - 1]);
    }
    return roc;
}

}  // namespace

RocCurves far_frr(const ScoreSets& scores, int steps) {
    if (steps < 2) throw InvalidParameter("far_frr needs at least two threshold steps");
    double max_score = 0.0;
    for (double v : scores.genuine) max_score = std::max(max_score, v);
    for (double v : scores.impostor) max_score = std::max(max_score, v);
    std::vector<double> thresholds(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) thresholds[k] = max_score * k / (steps - 1);
    thresholds.back() = max_score;
    // The grid only samples the reported curves. A grid cell can hold several
    // distinct scores, so interpolating between grid points would move the
    // crossover by up to a score step; the EER comes from the exact sweep,
    // which is what the grid rule tends to as steps grows.
    auto roc = sweep(scores, std::move(thresholds));
    const auto exact = far_frr_exact(scores);
    roc.eer = exact.eer;
    roc.eer_threshold = exact.eer_threshold;
    return roc;
}

RocCurves far_frr(const DissimilarityMatrix& m, int steps) { return far_frr(split_scores(m), steps); }

RocCurves far_frr_exact(const ScoreSets& scores) {
    std::set<double> distinct{0.0};
    distinct.insert(scores.genuine.begin(), scores.genuine.end());
    distinct.insert(scores.impostor.begin(), scores.impostor.end());
    return sweep(scores, std::vector<double>(distinct.begin(), distinct.end()));
}

double n_rank(const DissimilarityMatrix& m, int n) {
    if (n < 1) throw InvalidParameter("n_rank: n must be >= 1");
    std::map<std::string, int> scales_per;
    for (const auto& l : m.labels) scales_per[l.individual_id]++;
    std::string offenders;
    for (const auto& [id, count] : scales_per) {
        if (count < 2) offenders += (offenders.empty() ? "" : ", ") + id;
    }
    if (!offenders.empty()) {
        throw InvalidInput("n_rank: individuals with fewer than two scales: " + offenders);
    }
    if (m.size() == 0) throw InvalidInput("n_rank: empty matrix");

    int hits = 0;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < m.size(); ++i) {
        order.clear();
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (!m.excluded(i, j)) order.push_back(j);
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (m.at(i, a) != m.at(i, b)) return m.at(i, a) < m.at(i, b);
            return m.labels[a] < m.labels[b];
        });
        const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(n), order.size());
        for (std::size_t r = 0; r < top; ++r) {
            if (m.labels[order[r]].individual_id == m.labels[i].individual_id) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(m.size());
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    out.count = static_cast<int>(values.size());
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        // Sample standard deviation (n - 1).
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

SegmentationSummary summarize_segmentation(const std::vector<MaskPair>& pairs, const std::vector<double>& tolerances) {
    SegmentationSummary s;
    s.images = static_cast<int>(pairs.size());
    s.tolerances = tolerances;
    std::vector<double> x11, x12, x21, x22, p, r, f;
    s.correct.assign(tolerances.size(), 0.0);
    s.over.assign(tolerances.size(), 0.0);
    s.under.assign(tolerances.size(), 0.0);
    s.missed.assign(tolerances.size(), 0.0);
    s.noise.assign(tolerances.size(), 0.0);

    for (const auto& pair : pairs) {
        const auto c = confusion(pair.gt, pair.seg);
        s.tn += c.tn;
        s.fn += c.fn;
        s.fp += c.fp;
        s.tp += c.tp;
        if (c.x11) x11.push_back(*c.x11);
        if (c.x12) x12.push_back(*c.x12);
        if (c.x21) x21.push_back(*c.x21);
        if (c.x22) x22.push_back(*c.x22);
        const auto m = prf(c);
        if (m.precision) p.push_back(*m.precision);
        if (m.recall) r.push_back(*m.recall);
        if (m.f_measure) f.push_back(*m.f_measure);
        const auto h = hoover(pair.gt, pair.seg, tolerances);
        for (std::size_t k = 0; k < tolerances.size(); ++k) {
            s.correct[k] += h.points[k].correct_fraction();
            s.over[k] += h.points[k].over_fraction();
            s.under[k] += h.points[k].under_fraction();
            s.missed[k] += h.points[k].missed_fraction();
            s.noise[k] += h.points[k].noise_fraction();
        }
    }
    if (!pairs.empty()) {
        const double inv = 1.0 / static_cast<double>(pairs.size());
        for (auto* v : {&s.correct, &s.over, &s.under, &s.missed, &s.noise}) {
            for (double& x : *v) x *= inv;
        }
    }
    s.x11 = mean_std(x11);
    s.x12 = mean_std(x12);
    s.x21 = mean_std(x21);
    s.x22 = mean_std(x22);
    s.precision = mean_std(p);
    s.recall = mean_std(r);
    s.f_measure = mean_std(f);
    return s;
}

}  // namespace spotid::evaluation
