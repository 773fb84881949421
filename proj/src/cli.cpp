// cli.cpp - subcommands binding the library to files.

#include "cxreg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "cxreg/diff_viz.hpp"
#include "cxreg/phantom.hpp"
#include "cxreg/stats.hpp"

namespace cxreg {

json to_json(const JobConfig &job) {
    return json{{"command", job.command},     {"paths", job.paths},   {"inputs", job.inputs},
                {"output_dir", job.output_dir}, {"registration", to_json(job.registration)},
                {"qc", to_json(job.qc)},       {"margin", job.margin}, {"alpha", job.alpha},
                {"seed", job.seed},            {"jobs", job.jobs},     {"options", job.options}};
}

JobConfig job_config_from_json(const json &j) {
    try {
        JobConfig job;
        job.command = j.at("command").get<std::string>();
        job.paths = j.value("paths", job.paths);
        job.inputs = j.value("inputs", job.inputs);
        job.output_dir = j.value("output_dir", job.output_dir);
        if (j.contains("registration")) job.registration = registration_config_from_json(j.at("registration"));
        if (j.contains("qc")) job.qc = qc_thresholds_from_json(j.at("qc"));
        job.margin = j.value("margin", job.margin);
        job.alpha = j.value("alpha", job.alpha);
        job.seed = j.value("seed", job.seed);
        job.jobs = j.value("jobs", job.jobs);
        job.options = j.value("options", job.options);
        return job;
    } catch (const json::exception &e) {
        throw InvalidInput("BadFormat", std::string("malformed job config: ") + e.what());
    }
}

std::string job_config_to_text(const JobConfig &job) { return to_json(job).dump(2) + "\n"; }

JobConfig job_config_from_text(const std::string &text) {
    try {
        return job_config_from_json(json::parse(text));
    } catch (const json::parse_error &e) {
        throw InvalidInput("BadFormat", std::string("job config is not valid JSON: ") + e.what());
    }
}

namespace {

bool has(const JobConfig &job, const std::string &key) {
    const auto it = job.paths.find(key);
    return it != job.paths.end() && !it->second.empty();
}

const std::string &path_of(const JobConfig &job, const std::string &key) {
    if (!has(job, key)) throw InvalidInput("MissingInput", "missing required input --" + key);
    return job.paths.at(key);
}

std::string option(const JobConfig &job, const std::string &key, const std::string &fallback) {
    const auto it = job.options.find(key);
    return it == job.options.end() || it->second.empty() ? fallback : it->second;
}

double parse_double(const std::string &s, const std::string &what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw InvalidInput("BadArgument", what + ": '" + s + "' is not a number");
    return v;
}

std::vector<double> parse_numbers(const std::string &s, const std::string &what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_double(item, what));
    return v;
}

fs::path out_path(const JobConfig &job, const std::string &name) { return fs::path(job.output_dir) / name; }

// Warped image from --warped, or from --moving warped by --field.
Image warped_input(const JobConfig &job, const DisplacementField *field) {
    if (has(job, "warped")) return read_image(path_of(job, "warped"));
    if (!has(job, "moving")) throw InvalidInput("MissingInput", "give --warped or --moving with --field");
    if (!field) throw InvalidInput("MissingInput", "--moving needs --field");
    return warp_image(read_image(path_of(job, "moving")), *field);
}

int cmd_register(const JobConfig &job, std::ostream &out) {
    const RegistrationConfig &cfg = job.registration;
    const Image moving = read_image(path_of(job, "moving"));
    const Image fixed = read_image(path_of(job, "fixed"));
    const auto need = required_semantics(cfg.mode);
    const bool masks = has(job, "moving_mask") || has(job, "fixed_mask");
    if (need.has_value() != masks) {
        throw InvalidInput("ModeMaskMismatch", need ? "mode " + to_string(cfg.mode) + " needs --moving-mask and --fixed-mask"
                                                    : "unsupervised mode takes no masks");
    }
    const ImagePair pair = need ? ImagePair(moving, fixed, read_mask(path_of(job, "moving_mask"), *need),
                                            read_mask(path_of(job, "fixed_mask"), *need))
                                : ImagePair(moving, fixed);
    const RegistrationResult res = register_multistage(pair, cfg);

    write_field(out_path(job, "field.dfld"), res.field_native);
    write_image(out_path(job, "warped.pgm"), res.warped);
    json trace = json::array();
    for (const auto &b : res.loss_trace) trace.push_back(to_json(b));
    write_json(out_path(job, "trace.json"), json{{"config", to_json(cfg)},
                                                 {"stage1_length", res.stage1_trace_length},
                                                 {"trace", trace},
                                                 {"diagnostic", res.diagnostic ? json(*res.diagnostic) : json(nullptr)}});
    out << "register: " << to_string(cfg.mode) << ", final loss " << res.loss_trace.back().total << "\n";
    if (res.diagnostic) throw NumericalFailure("NonFiniteLoss", *res.diagnostic);
    return kExitOk;
}

int cmd_diff(const JobConfig &job, std::ostream &out) {
    const Image fixed = read_image(path_of(job, "fixed"));
    std::optional<DisplacementField> field;
    if (has(job, "field")) field = read_field(path_of(job, "field"));
    const Image warped = warped_input(job, field ? &*field : nullptr);
    const LabelMask ribcage = read_mask(path_of(job, "ribcage"), LabelSemantics::Binary);
    const int k = static_cast<int>(parse_double(option(job, "components", "10"), "--components"));
    const DifferenceImage d = difference_pipeline(fixed, warped, ribcage, job.margin, k);

    write_rgb(out_path(job, "diff.ppm"), RgbImage{d.width, d.height, d.rgb});
    // Signed difference as a 16-bit raster: stored = 0.5 + value / (2 * range).
    const double scale = d.range > 0.0 ? 0.5 / d.range : 0.0;
    std::vector<double> enc(d.values.size());
    for (std::size_t i = 0; i < enc.size(); ++i) enc[i] = std::clamp(0.5 + scale * d.values[i], 0.0, 1.0);
    write_image(out_path(job, "diff_signed.pgm"), Image(d.width, d.height, std::move(enc)));
    write_json(out_path(job, "diff.json"), json{{"raw_mean", d.raw_mean},
                                                {"raw_std", d.raw_std},
                                                {"clip_low", d.clip_low},
                                                {"clip_high", d.clip_high},
                                                {"range", d.range},
                                                {"roi_pixels", d.roi.count()},
                                                {"margin", job.margin},
                                                {"signed_encoding", {{"offset", 0.5}, {"scale", scale}}}});
    out << "diff: roi " << d.roi.count() << " px, range " << d.range << "\n";
    return kExitOk;
}

int cmd_metrics(const JobConfig &job, std::ostream &out) {
    const Image fixed = read_image(path_of(job, "fixed"));
    const DisplacementField field = read_field(path_of(job, "field"));
    const Image warped = warped_input(job, &field);
    MaskSet warped_masks, fixed_masks;
    if (has(job, "moving_ribs") || has(job, "fixed_ribs")) {
        warped_masks.ribs = warp_mask_hard(read_mask(path_of(job, "moving_ribs"), LabelSemantics::RibPairs), field);
        fixed_masks.ribs = read_mask(path_of(job, "fixed_ribs"), LabelSemantics::RibPairs);
    }
    if (has(job, "moving_lungs") || has(job, "fixed_lungs")) {
        warped_masks.lungs = warp_mask_hard(read_mask(path_of(job, "moving_lungs"), LabelSemantics::LungPair), field);
        fixed_masks.lungs = read_mask(path_of(job, "fixed_lungs"), LabelSemantics::LungPair);
    }
    MetricsReport r = full_report(warped, fixed, warped_masks, fixed_masks, field);
    r.provenance["warped"] = has(job, "warped") ? "file" : "moving+field";
    write_json(out_path(job, option(job, "report", "metrics.json")), to_json(r));
    out << "metrics: mse " << r.mse << ", ssim " << r.ssim << ", negjac " << r.negjac;
    if (r.dcr) out << ", dcr " << *r.dcr;
    if (r.dcl) out << ", dcl " << *r.dcl;
    out << "\n";
    return kExitOk;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string> &inputs, const std::string &ext) {
    std::vector<fs::path> files;
    for (const auto &in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto &e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

int cmd_qc(const JobConfig &job, std::ostream &out) {
    const auto files = expand_inputs(job.inputs, ".pgm");
    if (files.empty()) throw InvalidInput("MissingInput", "no mask files given");

    if (option(job, "calibrate", "false") == "true") {
        std::vector<LabelMask> masks;
        for (const auto &f : files) masks.push_back(read_mask(f, LabelSemantics::RibPairs));
        const QcThresholds t = calibrate_thresholds(masks);
        write_json(out_path(job, "thresholds.json"), to_json(t));
        out << "qc: calibrated t_q1 " << t.t_q1 << ", t_q3 " << t.t_q3 << ", t_q4 " << t.t_q4 << "\n";
        return kExitOk;
    }

    std::vector<QcReport> reports(files.size());
    std::vector<std::exception_ptr> errors(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            try {
                reports[i] = qc_mask(read_mask(files[i], LabelSemantics::RibPairs), job.qc);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n_workers = std::clamp(job.jobs, 1, 64);
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    for (const auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }

    json per_file = json::array();
    json triage = json::array();
    std::size_t failed = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        per_file.push_back({{"file", files[i].string()}, {"report", to_json(reports[i])}});
        if (!reports[i].passed) {
            ++failed;
            triage.push_back({{"file", files[i].string()}, {"first_failing", *reports[i].first_failing}});
            out << "qc: FAIL " << files[i].string() << " first failing pair " << int(*reports[i].first_failing) << "\n";
        }
    }
    write_json(out_path(job, "qc.json"), json{{"thresholds", to_json(job.qc)},
                                              {"files", per_file},
                                              {"triage", triage},
                                              {"passed", files.size() - failed},
                                              {"failed", failed}});
    out << "qc: " << files.size() - failed << " passed, " << failed << " failed\n";
    return kExitOk;
}

int cmd_stats(const JobConfig &job, std::ostream &out) {
    if (job.inputs.size() < 2) throw InvalidInput("MissingInput", "give at least two --model name:dir entries");
    std::map<std::string, std::vector<MetricsReport>> reports;
    std::vector<std::string> subjects;
    for (const auto &spec : job.inputs) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos || colon == 0) throw InvalidInput("BadArgument", "model spec must be name:dir, got '" + spec + "'");
        const std::string name = spec.substr(0, colon);
        const auto files = expand_inputs({spec.substr(colon + 1)}, ".json");
        std::vector<std::string> names;
        for (const auto &f : files) names.push_back(f.filename().string());
        if (subjects.empty()) subjects = names;
        else if (names != subjects) throw InvalidInput("SubjectMismatch", "model " + name + " has a different set of report files");
        if (reports.count(name)) throw InvalidInput("BadArgument", "duplicate model name " + name);
        auto &list = reports[name];
        for (const auto &f : files) list.push_back(metrics_report_from_json(read_json(f)));
    }
    const std::string metric = option(job, "metric", "dcr");
    const ScoreMatrix m = score_matrix_from_reports(reports, metric);
    CompareOptions opt;
    opt.alpha_pairwise = job.alpha;
    opt.alpha_friedman = parse_double(option(job, "alpha_friedman", "0.005"), "--alpha-friedman");
    opt.alpha_nemenyi = parse_double(option(job, "alpha_nemenyi", "0.05"), "--alpha-nemenyi");
    if (job.options.count("reference") && !job.options.at("reference").empty()) opt.reference = job.options.at("reference");
    const ComparisonSummary s = compare_models(m, opt);
    write_json(out_path(job, "stats.json"), to_json(s));

    out << "stats: " << metric << " over " << s.subjects << " subjects, Friedman chi2 " << s.friedman.statistic << " p "
        << s.friedman.p_value << (s.friedman_significant ? " (significant)" : "") << ", CD " << s.nemenyi.critical_difference << "\n";
    for (std::size_t i = 0; i < s.models.size(); ++i) out << "  " << s.models[i] << " mean rank " << s.friedman.mean_ranks[i] << "\n";
    for (const auto &p : s.pairwise) {
        out << "  " << p.a << " vs " << p.b << ": W " << p.wilcoxon.statistic << " p " << p.wilcoxon.p_value << " adjusted "
            << p.p_adjusted << (p.significant ? " significant" : "") << "\n";
    }
    return kExitOk;
}

DeformationSpec parse_deformation(const std::string &spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const auto v = colon == std::string::npos ? std::vector<double>{} : parse_numbers(spec.substr(colon + 1), spec);
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (v.size() < lo || v.size() > hi) throw InvalidInput("BadArgument", "wrong number of values in '" + spec + "'");
    };
    if (kind == "shift") {
        need(2, 2);
        return Translation{v[0], v[1]};
    }
    if (kind == "scale") {
        need(1, 2);
        return AffineScaleRotate{v[0], v.size() > 1 ? v[1] : 0.0};
    }
    if (kind == "smooth") {
        need(1, 3);
        SmoothRandomField s{v[0]};
        if (v.size() > 1) s.spacing = v[1];
        if (v.size() > 2) s.seed = static_cast<std::uint64_t>(v[2]);
        return s;
    }
    if (kind == "heart") {
        need(1, 1);
        return HeartEnlargement{v[0]};
    }
    if (kind == "diaphragm") {
        need(1, 1);
        return DiaphragmRaise{v[0]};
    }
    if (kind == "blob") {
        need(4, 4);
        return OpacityBlob{v[0], v[1], v[2], v[3]};
    }
    throw InvalidInput("BadArgument", "unknown deformation '" + kind + "'");
}

int cmd_phantom(const JobConfig &job, std::ostream &out) {
    PhantomParams p;
    p.seed = job.seed;
    p.size = static_cast<int>(parse_double(option(job, "size", std::to_string(p.size)), "--size"));
    p.rib_pairs = static_cast<int>(parse_double(option(job, "rib_pairs", std::to_string(p.rib_pairs)), "--rib-pairs"));
    if (job.options.count("noise")) p.noise = parse_double(job.options.at("noise"), "--noise");
    const Phantom ph = generate_phantom(p);

    std::vector<DeformationSpec> ds;
    std::stringstream ss(option(job, "deform", ""));
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (!item.empty()) ds.push_back(parse_deformation(item));
    }
    const DeformedPhantom d = deform_phantom(ph, ds);

    write_image(out_path(job, "moving.pgm"), ph.image);
    write_mask(out_path(job, "moving_ribs.pgm"), ph.ribs);
    write_mask(out_path(job, "moving_lungs.pgm"), ph.lungs);
    write_mask(out_path(job, "moving_ribcage.pgm"), ph.ribcage);
    write_image(out_path(job, "fixed.pgm"), d.image);
    write_mask(out_path(job, "fixed_ribs.pgm"), d.ribs);
    write_mask(out_path(job, "fixed_lungs.pgm"), d.lungs);
    write_mask(out_path(job, "fixed_ribcage.pgm"), d.ribcage);
    write_field(out_path(job, "gt_field.dfld"), d.gt_field);
    out << "phantom: " << p.size << " px, seed " << p.seed << ", " << ds.size() << " deformation(s)\n";
    return kExitOk;
}

std::string default_out_dir() {
    const char *env = std::getenv(kOutDirEnv);
    return env && *env ? std::string(env) : std::string(".");
}

}  // namespace

int execute_job(const JobConfig &job, std::ostream &out) {
    job.registration.validate();
    job.qc.validate();
    std::error_code ec;
    fs::create_directories(job.output_dir, ec);
    if (!fs::is_directory(job.output_dir)) throw InvalidInput("IoError", "cannot create output directory " + job.output_dir);

    int rc = kExitOk;
    auto save_job = [&] { write_json(out_path(job, "job.json"), to_json(job)); };
    if (job.command == "register") {
        save_job();
        rc = cmd_register(job, out);
    } else if (job.command == "diff") {
        save_job();
        rc = cmd_diff(job, out);
    } else if (job.command == "metrics") {
        save_job();
        rc = cmd_metrics(job, out);
    } else if (job.command == "qc") {
        save_job();
        rc = cmd_qc(job, out);
    } else if (job.command == "stats") {
        save_job();
        rc = cmd_stats(job, out);
    } else if (job.command == "phantom") {
        save_job();
        rc = cmd_phantom(job, out);
    } else {
        throw InvalidInput("UnknownCommand", "unknown command '" + job.command + "'");
    }
    return rc;
}

namespace {

void add_registration_flags(CLI::App *cmd, RegistrationConfig &c, std::string &mode, std::string &optimizer) {
    cmd->add_option("--mode", mode, "penalization mode")->check(CLI::IsMember({"unsup", "lung", "ribcage", "ribpairs"}));
    cmd->add_option("--stage1-size", c.stage1_size, "stage-1 grid size");
    cmd->add_option("--stage2-size", c.stage2_size, "stage-2 grid size");
    cmd->add_option("--lr", c.lr, "learning rate");
    cmd->add_option("--lambda-seg", c.lambda_seg, "anatomy penalty weight");
    cmd->add_option("--lambda-r1", c.lambda_r_stage1, "smoothness weight, stage 1");
    cmd->add_option("--lambda-r2", c.lambda_r_stage2, "smoothness weight, stage 2");
    cmd->add_option("--iters1", c.iters_stage1, "iterations, stage 1");
    cmd->add_option("--iters2", c.iters_stage2, "iterations, stage 2");
    cmd->add_option("--optimizer", optimizer, "adam or gd")->check(CLI::IsMember({"adam", "gd"}));
    cmd->add_option("--gradient-sigma", c.gradient_sigma, "gradient smoothing width in stage-1 pixels");
    cmd->add_option("--update-sigma", c.update_sigma, "step smoothing width in stage-1 pixels");
    cmd->add_flag("!--additive", c.compose_updates, "add steps instead of composing them");
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"cxreg: anatomy-penalised registration of chest radiographs"};
    app.require_subcommand(1);

    JobConfig job;
    job.output_dir = default_out_dir();
    std::string mode = "unsup", optimizer = "adam", job_file;
    std::map<std::string, std::string> &paths = job.paths;
    auto &opts = job.options;

    auto *reg = app.add_subcommand("register", "register a moving image onto a fixed image");
    reg->add_option("--moving", paths["moving"], "moving image (PGM)")->required();
    reg->add_option("--fixed", paths["fixed"], "fixed image (PGM)")->required();
    reg->add_option("--moving-mask", paths["moving_mask"], "moving label mask");
    reg->add_option("--fixed-mask", paths["fixed_mask"], "fixed label mask");
    add_registration_flags(reg, job.registration, mode, optimizer);
    reg->add_option("--seed", job.seed, "seed");

    auto *diff = app.add_subcommand("diff", "render a difference image");
    diff->add_option("--fixed", paths["fixed"], "fixed image")->required();
    diff->add_option("--warped", paths["warped"], "registered moving image");
    diff->add_option("--moving", paths["moving"], "moving image, warped with --field");
    diff->add_option("--field", paths["field"], "displacement field (DFLD)");
    diff->add_option("--ribcage", paths["ribcage"], "binary rib cage mask of the fixed image")->required();
    diff->add_option("--margin", job.margin, "roi margin around the rib hull, pixels");
    diff->add_option("--components", opts["components"], "mixture components");

    auto *met = app.add_subcommand("metrics", "evaluate a registration");
    met->add_option("--fixed", paths["fixed"], "fixed image")->required();
    met->add_option("--field", paths["field"], "displacement field (DFLD)")->required();
    met->add_option("--warped", paths["warped"], "registered moving image");
    met->add_option("--moving", paths["moving"], "moving image, warped with --field");
    met->add_option("--moving-ribs", paths["moving_ribs"], "moving rib-pair mask");
    met->add_option("--fixed-ribs", paths["fixed_ribs"], "fixed rib-pair mask");
    met->add_option("--moving-lungs", paths["moving_lungs"], "moving lung mask");
    met->add_option("--fixed-lungs", paths["fixed_lungs"], "fixed lung mask");
    met->add_option("--report", opts["report"], "report file name inside the output directory");

    auto *qc = app.add_subcommand("qc", "quality control of rib-pair masks");
    qc->add_option("masks", job.inputs, "mask files or directories")->required();
    qc->add_option("--t-q1", job.qc.t_q1, "smallest rib component, pixels");
    qc->add_option("--t-q3", job.qc.t_q3, "allowed rib size excess, percent");
    qc->add_option("--t-q4", job.qc.t_q4, "allowed top row difference, pixels");
    qc->add_option("--jobs", job.jobs, "worker threads");
    bool calibrate = false;
    qc->add_flag("--calibrate", calibrate, "derive thresholds from ground-truth masks");

    auto *st = app.add_subcommand("stats", "compare models over metric reports");
    st->add_option("--model", job.inputs, "name:dir of metric reports (repeat)")->required();
    st->add_option("--metric", opts["metric"], "dcr, h95r, dcl, h95l, mse, ssim or negjac");
    st->add_option("--alpha", job.alpha, "significance level of the corrected pairwise tests");
    st->add_option("--alpha-friedman", opts["alpha_friedman"], "Friedman significance level");
    st->add_option("--alpha-nemenyi", opts["alpha_nemenyi"], "Nemenyi level, 0.05 or 0.005");
    st->add_option("--reference", opts["reference"], "only compare this model against the others");

    auto *ph = app.add_subcommand("phantom", "generate a synthetic phantom pair");
    ph->add_option("--seed", job.seed, "seed");
    ph->add_option("--size", opts["size"], "image size, pixels");
    ph->add_option("--rib-pairs", opts["rib_pairs"], "number of rib pairs (1..9)");
    ph->add_option("--noise", opts["noise"], "noise standard deviation");
    std::vector<std::string> deform;
    ph->add_option("--deform", deform,
                   "deformation, repeatable: shift:dx,dy scale:s[,deg] smooth:amp[,spacing[,seed]] heart:f "
                   "diaphragm:px blob:cx,cy,r,i");

    auto *run = app.add_subcommand("run", "replay a job.json");
    run->add_option("--job", job_file, "job file")->required();

    for (auto *cmd : {reg, diff, met, qc, st, ph}) cmd->add_option("--out", job.output_dir, "output directory");

    std::vector<std::string> argv_s{"cxreg"};
    argv_s.insert(argv_s.end(), args.begin(), args.end());
    std::vector<char *> argv;
    for (auto &s : argv_s) argv.push_back(s.data());

    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::Success &e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError &e) {
            err << "cxreg:error:UsageError: " << e.what() << "\n";
            return kExitInputError;
        }

        if (app.got_subcommand(run)) {
            return execute_job(job_config_from_json(read_json(job_file)), out);
        }
        for (auto *cmd : {reg, diff, met, qc, st, ph}) {
            if (app.got_subcommand(cmd)) job.command = cmd->get_name();
        }
        job.registration.mode = penalization_mode_from_string(mode);
        job.registration.optimizer = optimizer_kind_from_string(optimizer);
        job.registration.seed = static_cast<unsigned>(job.seed);
        if (calibrate) opts["calibrate"] = "true";
        if (!deform.empty()) {
            std::string joined;
            for (const auto &d : deform) joined += (joined.empty() ? "" : ";") + d;
            opts["deform"] = joined;
        }
        // Drop unset optional entries so job.json only lists what was given.
        std::erase_if(paths, [](const auto &kv) { return kv.second.empty(); });
        std::erase_if(opts, [](const auto &kv) { return kv.second.empty(); });
        return execute_job(job, out);
    } catch (const NumericalFailure &e) {
        err << "cxreg:error:" << e.kind() << ": " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const Error &e) {
        err << "cxreg:error:" << e.kind() << ": " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception &e) {
        err << "cxreg:error:IoError: " << e.what() << "\n";
        return kExitInputError;
    }
}

}  // namespace cxreg
