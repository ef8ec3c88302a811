#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spotid/errors.hpp"
#include "spotid/evaluation.hpp"
#include "spotid/gallery.hpp"
#include "spotid/image_io.hpp"
#include "spotid/matching.hpp"
#include "spotid/report.hpp"
#include "spotid/segmentation.hpp"
#include "spotid/service.hpp"
#include "spotid/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spotid;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Segmented masks are matched to ground truth by file name.
std::vector<evaluation::MaskPair> collect_pairs(const fs::path& gt_dir, const fs::path& seg_dir) {
    std::set<std::string> gt_names;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") gt_names.insert(e.path().filename().string());
    }
    if (gt_names.empty()) throw InvalidInput("no .png masks in " + gt_dir.string());
    std::vector<std::string> missing;
    std::vector<evaluation::MaskPair> pairs;
    for (const auto& name : gt_names) {
        if (!fs::exists(seg_dir / name)) {
            missing.push_back(name);
            continue;
        }
        pairs.push_back({name, imaging::read_mask(gt_dir / name), imaging::read_mask(seg_dir / name)});
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw InvalidInput("no segmented mask for: " + list);
    }
    return pairs;
}

int cmd_segment(const std::string& input, const std::string& params_path, const std::string& out,
                bool emit_threads) {
    const auto params = params_path.empty() ? segmentation::SegmentationParams{} : segmentation::load_params(params_path);
    const auto image = imaging::read_rgb(input);
    const auto result = segmentation::segment_scale(image, params);
    imaging::write_mask_png(result.mask, out);

    json meta = {
        {"input", input},
        {"output", out},
        {"width", image.width()},
        {"height", image.height()},
        {"spots", matching::extract_centroids(result.mask).size()},
        {"foreground_pixels", result.mask.count()},
        {"median_window", result.params_used.median_window},
        {"gamma", result.params_used.gamma},
        {"params", report::params_json(result.params_used)},
    };
    if (emit_threads) {
        const fs::path o(out);
        const fs::path dark = o.parent_path() / (o.stem().string() + "_dark" + o.extension().string());
        const fs::path bright = o.parent_path() / (o.stem().string() + "_bright" + o.extension().string());
        imaging::write_mask_png(result.dark_thread_mask, dark);
        imaging::write_mask_png(result.bright_thread_mask, bright);
        meta["dark_thread"] = dark.string();
        meta["bright_thread"] = bright.string();
    }
    std::cout << meta.dump(2) << '\n';
    return 0;
}

int cmd_identify(const std::string& mask_path, const std::string& gallery_dir, const std::string& method,
                 std::size_t top, bool as_json, const std::string& exclude, unsigned threads) {
    const auto g = gallery::load_gallery(gallery_dir);
    matching::IdentifyOptions opts;
    opts.threads = threads;
    opts.query_id = fs::path(mask_path).filename().string();
    if (!exclude.empty()) opts.exclude = gallery::ScaleKey::parse_label(exclude);
    const auto ranked = matching::identify(imaging::read_mask(mask_path), g, matching::parse_method(method), opts);
    if (as_json) {
        std::cout << report::ranked_json(ranked, top).dump(2) << '\n';
        return 0;
    }
    const std::size_t n = std::min(top, ranked.scores.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = ranked.scores[i];
        std::printf("%2zu  %-12s %-8s %.9g\n", i + 1, s.individual_id.c_str(), s.scale_id.c_str(), s.dissimilarity);
    }
    for (const auto& k : ranked.unmatchable) std::printf("skipped %s (too few spots)\n", k.label().c_str());
    return 0;
}

int cmd_enroll(const std::string& mask_path, const std::string& gallery_dir, const std::string& individual,
               const std::string& scale, const std::string& light, const std::string& provenance) {
    if (!fs::exists(fs::path(gallery_dir) / gallery::kManifestName)) {
        gallery::save_gallery(gallery::Gallery{}, gallery_dir);
    }
    const auto g = gallery::load_gallery(gallery_dir);
    gallery::EnrollMetadata meta;
    if (!scale.empty()) meta.scale_id = scale;
    meta.light_condition = gallery::parse_light_condition(light);
    meta.provenance = gallery::parse_provenance(provenance);
    const auto next = gallery::enroll(g, individual, imaging::read_mask(mask_path), meta);
    const auto& r = next.records.back();
    std::cout << json{{"individual_id", r.individual_id}, {"scale_id", r.scale_id}, {"spots", r.cloud.size()},
                      {"manifest_version", next.manifest_version}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_matrix(const std::string& source, const std::string& target, const std::string& method,
               const std::string& out, unsigned threads) {
    const auto src = gallery::load_gallery(source);
    const auto tgt = target.empty() ? src : gallery::load_gallery(target);
    evaluation::MatrixOptions opts;
    opts.threads = threads;
    const auto m = evaluation::build_dissimilarity_matrix(src, tgt, matching::parse_method(method), opts);
    const std::string csv = evaluation::matrix_to_csv(m);
    if (out.empty()) {
        std::cout << csv;
    } else {
        write_text(out, csv);
    }
    return 0;
}

int cmd_eval_seg(const std::string& gt_dir, const std::string& seg_dir, const std::string& format) {
    const auto summary = evaluation::summarize_segmentation(collect_pairs(gt_dir, seg_dir));
    if (format == "csv") {
        std::cout << report::summary_csv(summary);
    } else {
        std::cout << report::summary_json(summary).dump(2) << '\n';
    }
    return 0;
}

int cmd_eval_id(const std::string& matrix_path, int steps, const std::string& method, const std::string& out) {
    const auto m = evaluation::matrix_from_csv(read_text(matrix_path));
    json doc = report::identification_json(m, steps);
    if (!method.empty()) doc["method"] = matching::to_string(matching::parse_method(method));
    if (!out.empty()) write_text(out, doc.dump(2) + "\n");
    std::cout << doc.dump(2) << '\n';
    return 0;
}

int cmd_synth(const std::string& out, int individuals, int samples, double sigma, std::uint64_t seed,
              bool photos, double photo_scale) {
    synthetic::CorpusParams p;
    p.individuals = individuals;
    p.samples_per = samples;
    p.jitter_sigma = sigma;
    p.seed = seed;
    const auto corpus = synthetic::generate_synthetic_corpus(p);
    const auto saved = gallery::save_gallery(corpus.gallery, out);
    if (photos) {
        std::uint64_t k = seed;
        for (const auto& r : saved.records) {
            const auto lighting = r.light_condition == gallery::LightCondition::HardExposed
                                      ? synthetic::Lighting::HalfExposed
                                      : synthetic::Lighting::Uniform;
            // Photos are rendered larger than the gallery frame so spots sit in
            // the size range the default area band expects.
            registration::SpotCloud centres = r.cloud;
            for (auto& c : centres.points) c *= photo_scale;
            const auto photo = synthetic::render_scale_photo(
                centres, p.spot_radius * photo_scale, static_cast<int>(std::lround(r.width * photo_scale)),
                static_cast<int>(std::lround(r.height * photo_scale)), lighting, ++k);
            const std::string stem = r.individual_id + "_" + r.scale_id + ".png";
            imaging::write_rgb_png(photo.image, fs::path(out) / "photos" / stem);
            imaging::write_mask_png(photo.ground_truth, fs::path(out) / "photo_gt" / stem);
        }
    }
    std::cout << json{{"gallery", out}, {"records", saved.size()}, {"individuals", individuals},
                      {"samples_per", samples}, {"jitter_sigma", sigma}, {"seed", seed}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_serve(const std::string& gallery_dir, const std::string& host, int port, unsigned threads) {
    service::ServiceOptions opts;
    opts.gallery_dir = gallery_dir;
    opts.match_threads = threads;
    service::Server server(opts);
    const int bound = server.bind(host, port);
    std::cerr << "serving " << gallery_dir << " on http://" << host << ":" << bound << '\n';
    return server.run() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spot-pattern segmentation and identification"};
    app.require_subcommand(1);

    std::string input, params_path, out;
    bool emit_threads = false;
    auto* segment = app.add_subcommand("segment", "Segment a scale photo into a spot mask");
    segment->add_option("input", input, "Input image")->required()->check(CLI::ExistingFile);
    segment->add_option("--params", params_path, "key = value parameter file")->check(CLI::ExistingFile);
    segment->add_option("--out", out, "Output mask PNG")->required();
    segment->add_flag("--emit-threads", emit_threads, "Also write the dark and bright thread masks");

    std::string mask_path, gallery_dir, method = "icp-procrustes", exclude;
    std::size_t top = 5;
    bool as_json = false;
    unsigned threads = 0;
    auto* identify = app.add_subcommand("identify", "Rank gallery scales against a query mask");
    identify->add_option("mask", mask_path, "Query mask PNG")->required()->check(CLI::ExistingFile);
    identify->add_option("--gallery", gallery_dir, "Gallery directory")->required();
    identify->add_option("--method", method, "icp | icp-procrustes")->capture_default_str();
    identify->add_option("--top", top, "Candidates to report")->capture_default_str();
    identify->add_option("--exclude", exclude, "individual:scale to leave out");
    identify->add_option("--threads", threads, "Worker threads (0 = all cores)");
    identify->add_flag("--json", as_json, "JSON output");

    std::string individual, scale, light = "normal", provenance = "ground_truth";
    auto* enroll = app.add_subcommand("enroll", "Add a mask to a gallery");
    enroll->add_option("mask", mask_path, "Mask PNG")->required()->check(CLI::ExistingFile);
    enroll->add_option("--gallery", gallery_dir, "Gallery directory (created when missing)")->required();
    enroll->add_option("--individual", individual, "Individual id")->required();
    enroll->add_option("--scale", scale, "Scale id (next free s<k> when omitted)");
    enroll->add_option("--light", light, "normal | ideal | hard_exposed")->capture_default_str();
    enroll->add_option("--provenance", provenance, "ground_truth | automatic")->capture_default_str();

    std::string source, target;
    auto* matrix = app.add_subcommand("matrix", "All-pairs dissimilarity matrix between two galleries");
    matrix->add_option("--source", source, "Query-side gallery")->required();
    matrix->add_option("--target", target, "Record-side gallery (defaults to the source)");
    matrix->add_option("--method", method, "icp | icp-procrustes")->capture_default_str();
    matrix->add_option("--out", out, "CSV output (stdout when omitted)");
    matrix->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::string gt_dir, seg_dir, format = "json";
    auto* eval_seg = app.add_subcommand("eval-seg", "Segmentation metrics over a directory of masks");
    eval_seg->add_option("gt_dir", gt_dir, "Ground-truth masks")->required()->check(CLI::ExistingDirectory);
    eval_seg->add_option("seg_dir", seg_dir, "Segmented masks")->required()->check(CLI::ExistingDirectory);
    eval_seg->add_option("--report", format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    std::string matrix_path, eval_method;
    int steps = 1000;
    auto* eval_id = app.add_subcommand("eval-id", "EER, FAR/FRR curves and Top-1/Top-5 from a matrix");
    eval_id->add_option("matrix", matrix_path, "Matrix CSV")->required()->check(CLI::ExistingFile);
    eval_id->add_option("--report", format, "json")->check(CLI::IsMember({"json"}))->capture_default_str();
    eval_id->add_option("--steps", steps, "Threshold steps")->capture_default_str();
    eval_id->add_option("--method", eval_method, "Method that produced the matrix (recorded in the report)");
    eval_id->add_option("--out", out, "Also write the report here (e.g. <gallery>/evaluation.json)");

    int individuals = 30, samples = 3;
    double sigma = 1.0;
    std::uint64_t seed = 1;
    bool photos = false;
    double photo_scale = 2.5;
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic gallery");
    synth->add_option("--out", out, "Gallery directory")->required();
    synth->add_option("--individuals", individuals)->capture_default_str();
    synth->add_option("--samples", samples)->capture_default_str();
    synth->add_option("--sigma", sigma, "Jitter sigma in pixels")->capture_default_str();
    synth->add_option("--seed", seed)->capture_default_str();
    synth->add_flag("--photos", photos, "Also render scale photos and their ground truth");
    synth->add_option("--photo-scale", photo_scale, "Photo size relative to the gallery frame")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP review service");
    serve->add_option("--gallery", gallery_dir, "Gallery directory")->required();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--threads", threads, "Matching threads per identify (0 = all cores)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*segment) return cmd_segment(input, params_path, out, emit_threads);
        if (*identify) return cmd_identify(mask_path, gallery_dir, method, top, as_json, exclude, threads);
        if (*enroll) return cmd_enroll(mask_path, gallery_dir, individual, scale, light, provenance);
        if (*matrix) return cmd_matrix(source, target, method, out, threads);
        if (*eval_seg) return cmd_eval_seg(gt_dir, seg_dir, format);
        if (*eval_id) return cmd_eval_id(matrix_path, steps, eval_method, out);
        if (*synth) return cmd_synth(out, individuals, samples, sigma, seed, photos, photo_scale);
        if (*serve) return cmd_serve(gallery_dir, host, port, threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
