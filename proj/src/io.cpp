// io.cpp - raster, field and record files.

#include "cxreg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cxreg {

namespace {

[[noreturn]] void io_error(const fs::path &path, const std::string &what) {
    throw InvalidInput("IoError", path.string() + ": " + what);
}

[[noreturn]] void format_error(const fs::path &path, const std::string &what) {
    throw InvalidInput("BadFormat", path.string() + ": " + what);
}

std::ofstream open_out(const fs::path &path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) io_error(path, "cannot open for writing");
    return f;
}

void finish(std::ofstream &f, const fs::path &path) {
    f.flush();
    if (!f) io_error(path, "write failed");
}

struct Netpbm {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint8_t> payload;
};

Netpbm parse_netpbm(const fs::path &path) {
    const auto bytes = read_bytes(path);
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&]() -> std::string {
        skip_space();
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') t.push_back(static_cast<char>(bytes[pos++]));
        if (t.empty()) format_error(path, "truncated header");
        return t;
    };
    auto number = [&]() {
        const std::string t = token();
        int v = 0;
        for (char c : t) {
            if (c < '0' || c > '9') format_error(path, "bad header number '" + t + "'");
            v = v * 10 + (c - '0');
            if (v > 1'000'000) format_error(path, "header number too large");
        }
        return v;
    };
    Netpbm n;
    n.magic = token();
    if (n.magic != "P5" && n.magic != "P6") format_error(path, "expected binary PGM (P5) or PPM (P6)");
    n.width = number();
    n.height = number();
    n.maxval = number();
    if (n.width < 1 || n.height < 1) format_error(path, "empty raster");
    if (n.maxval < 1 || n.maxval > 65535) format_error(path, "maxval outside 1..65535");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) format_error(path, "missing header terminator");
    ++pos;
    const std::size_t channels = n.magic == "P6" ? 3 : 1;
    const std::size_t depth = n.maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(n.width) * n.height * channels * depth;
    if (bytes.size() - pos != need) format_error(path, "payload size does not match the header");
    n.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return n;
}

void write_header(std::ofstream &f, const char *magic, int w, int h, int maxval) {
    f << magic << "\n" << w << " " << h << "\n" << maxval << "\n";
}

void put_u16(std::vector<std::uint8_t> &b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t> &b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t> &b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const fs::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_error(path, "cannot open for reading");
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return out;
}

Image read_image(const fs::path &path) {
    const Netpbm n = parse_netpbm(path);
    if (n.magic != "P5") format_error(path, "expected a single-channel PGM");
    const std::size_t count = static_cast<std::size_t>(n.width) * n.height;
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned raw = n.maxval > 255 ? (static_cast<unsigned>(n.payload[2 * i]) << 8) | n.payload[2 * i + 1] : n.payload[i];
        if (raw > static_cast<unsigned>(n.maxval)) format_error(path, "sample exceeds maxval");
        v[i] = static_cast<double>(raw) / n.maxval;
    }
    return Image(n.width, n.height, std::move(v));
}

void write_image(const fs::path &path, const Image &img, int bits) {
    if (bits != 8 && bits != 16) throw InvalidInput("BadFormat", "image depth must be 8 or 16 bits");
    const int maxval = bits == 8 ? 255 : 65535;
    std::vector<std::uint8_t> payload;
    payload.reserve(img.size() * (bits / 8));
    for (double v : img.data()) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (bits == 16) payload.push_back(static_cast<std::uint8_t>(q >> 8));
        payload.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    auto f = open_out(path);
    write_header(f, "P5", img.width(), img.height(), maxval);
    f.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size()));
    finish(f, path);
}

LabelMask read_mask(const fs::path &path, LabelSemantics semantics) {
    const Netpbm n = parse_netpbm(path);
    if (n.magic != "P5" || n.maxval > 255) format_error(path, "masks must be 8-bit PGM");
    return LabelMask(n.width, n.height, semantics, n.payload);
}

void write_mask(const fs::path &path, const LabelMask &mask) {
    auto f = open_out(path);
    write_header(f, "P5", mask.width(), mask.height(), 255);
    f.write(reinterpret_cast<const char *>(mask.labels().data()), static_cast<std::streamsize>(mask.size()));
    finish(f, path);
}

RgbImage read_rgb(const fs::path &path) {
    const Netpbm n = parse_netpbm(path);
    if (n.magic != "P6" || n.maxval != 255) format_error(path, "expected an 8-bit PPM");
    return RgbImage{n.width, n.height, n.payload};
}

void write_rgb(const fs::path &path, const RgbImage &img) {
    if (img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw DimensionMismatch("write_rgb: pixel buffer does not match the dimensions");
    }
    auto f = open_out(path);
    write_header(f, "P6", img.width, img.height, 255);
    f.write(reinterpret_cast<const char *>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    finish(f, path);
}

std::vector<std::uint8_t> encode_field(const DisplacementField &field) {
    std::vector<std::uint8_t> b{'D', 'F', 'L', 'D'};
    put_u16(b, kFieldFormatVersion);
    put_u32(b, static_cast<std::uint32_t>(field.width()));
    put_u32(b, static_cast<std::uint32_t>(field.height()));
    b.reserve(b.size() + field.size() * 8);
    for (const Vec2 &v : field.data()) {
        put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v.x)));
        put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v.y)));
    }
    return b;
}

DisplacementField decode_field(const std::vector<std::uint8_t> &b) {
    if (b.size() < 14 || std::memcmp(b.data(), "DFLD", 4) != 0) throw InvalidInput("BadFormat", "not a DFLD field file");
    const std::uint16_t version = static_cast<std::uint16_t>(b[4] | (b[5] << 8));
    if (version != kFieldFormatVersion) throw InvalidInput("BadFormat", "unsupported DFLD version " + std::to_string(version));
    const std::uint32_t w = get_u32(b, 6);
    const std::uint32_t h = get_u32(b, 10);
    if (w == 0 || h == 0 || w > 65536 || h > 65536) throw InvalidInput("BadFormat", "DFLD dimensions out of range");
    if (b.size() != 14 + static_cast<std::size_t>(w) * h * 8) throw InvalidInput("BadFormat", "DFLD payload size mismatch");
    std::vector<Vec2> u(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i].x = std::bit_cast<float>(get_u32(b, 14 + 8 * i));
        u[i].y = std::bit_cast<float>(get_u32(b, 18 + 8 * i));
    }
    DisplacementField f(static_cast<int>(w), static_cast<int>(h), std::move(u));
    if (!f.all_finite()) throw InvalidInput("BadFormat", "DFLD contains non-finite values");
    return f;
}

DisplacementField read_field(const fs::path &path) {
    try {
        return decode_field(read_bytes(path));
    } catch (const InvalidInput &e) {
        if (e.kind() == "BadFormat") format_error(path, e.what());
        throw;
    }
}

void write_field(const fs::path &path, const DisplacementField &field) {
    const auto b = encode_field(field);
    auto f = open_out(path);
    f.write(reinterpret_cast<const char *>(b.data()), static_cast<std::streamsize>(b.size()));
    finish(f, path);
}

json read_json(const fs::path &path) {
    const auto bytes = read_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception &e) {
        format_error(path, e.what());
    }
}

void write_json(const fs::path &path, const json &j) {
    auto f = open_out(path);
    f << j.dump(2) << "\n";
    finish(f, path);
}

// ---------------------------------------------------------------------------
// Records

namespace {

json opt(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json &j, const char *key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string dice_flag_name(DiceFlag f) {
    switch (f) {
        case DiceFlag::None: return "none";
        case DiceFlag::BothEmpty: return "both_empty";
        case DiceFlag::OneEmpty: return "one_empty";
    }
    return "none";
}

DiceFlag dice_flag_from(const std::string &s) {
    if (s == "none") return DiceFlag::None;
    if (s == "both_empty") return DiceFlag::BothEmpty;
    if (s == "one_empty") return DiceFlag::OneEmpty;
    throw InvalidInput("BadFormat", "unknown dice flag '" + s + "'");
}

json labels_json(const std::vector<LabelScore> &v) {
    json a = json::array();
    for (const auto &s : v) {
        a.push_back({{"label", s.label}, {"dice", s.dice}, {"dice_flag", dice_flag_name(s.dice_flag)}, {"h95", opt(s.h95)}});
    }
    return a;
}

std::vector<LabelScore> labels_from(const json &a) {
    std::vector<LabelScore> v;
    for (const auto &e : a) {
        LabelScore s;
        s.label = e.at("label").get<std::uint8_t>();
        s.dice = e.at("dice").get<double>();
        s.dice_flag = dice_flag_from(e.at("dice_flag").get<std::string>());
        s.h95 = opt_double(e, "h95");
        v.push_back(s);
    }
    return v;
}

template <typename F>
auto guarded(F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const json::exception &e) {
        throw InvalidInput("BadFormat", std::string("malformed record: ") + e.what());
    }
}

}  // namespace

json to_json(const MetricsReport &r) {
    json j;
    j["dcr"] = opt(r.dcr);
    j["h95r"] = opt(r.h95r);
    j["dcl"] = opt(r.dcl);
    j["h95l"] = opt(r.h95l);
    j["mse"] = r.mse;
    j["ssim"] = r.ssim;
    j["negjac"] = r.negjac;
    j["rib_labels"] = labels_json(r.rib_labels);
    j["lung_labels"] = labels_json(r.lung_labels);
    j["provenance"] = r.provenance;
    return j;
}

MetricsReport metrics_report_from_json(const json &j) {
    return guarded([&] {
        MetricsReport r;
        r.dcr = opt_double(j, "dcr");
        r.h95r = opt_double(j, "h95r");
        r.dcl = opt_double(j, "dcl");
        r.h95l = opt_double(j, "h95l");
        r.mse = j.at("mse").get<double>();
        r.ssim = j.at("ssim").get<double>();
        r.negjac = j.at("negjac").get<double>();
        r.rib_labels = labels_from(j.at("rib_labels"));
        r.lung_labels = labels_from(j.at("lung_labels"));
        r.provenance = j.value("provenance", std::map<std::string, std::string>{});
        return r;
    });
}

json to_json(const RegistrationConfig &c) {
    return json{{"mode", to_string(c.mode)},
                {"stage1_size", c.stage1_size},
                {"stage2_size", c.stage2_size},
                {"lr", c.lr},
                {"lambda_seg", c.lambda_seg},
                {"lambda_r_stage1", c.lambda_r_stage1},
                {"lambda_r_stage2", c.lambda_r_stage2},
                {"iters_stage1", c.iters_stage1},
                {"iters_stage2", c.iters_stage2},
                {"optimizer", to_string(c.optimizer)},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"gradient_sigma", c.gradient_sigma},
                {"update_sigma", c.update_sigma},
                {"compose_updates", c.compose_updates},
                {"seed", c.seed}};
}

RegistrationConfig registration_config_from_json(const json &j) {
    return guarded([&] {
        RegistrationConfig c;
        c.mode = penalization_mode_from_string(j.value("mode", to_string(c.mode)));
        c.stage1_size = j.value("stage1_size", c.stage1_size);
        c.stage2_size = j.value("stage2_size", c.stage2_size);
        c.lr = j.value("lr", c.lr);
        c.lambda_seg = j.value("lambda_seg", c.lambda_seg);
        c.lambda_r_stage1 = j.value("lambda_r_stage1", c.lambda_r_stage1);
        c.lambda_r_stage2 = j.value("lambda_r_stage2", c.lambda_r_stage2);
        c.iters_stage1 = j.value("iters_stage1", c.iters_stage1);
        c.iters_stage2 = j.value("iters_stage2", c.iters_stage2);
        c.optimizer = optimizer_kind_from_string(j.value("optimizer", to_string(c.optimizer)));
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.gradient_sigma = j.value("gradient_sigma", c.gradient_sigma);
        c.update_sigma = j.value("update_sigma", c.update_sigma);
        c.compose_updates = j.value("compose_updates", c.compose_updates);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    });
}

json to_json(const QcThresholds &t) { return json{{"t_q1", t.t_q1}, {"t_q3", t.t_q3}, {"t_q4", t.t_q4}}; }

QcThresholds qc_thresholds_from_json(const json &j) {
    return guarded([&] {
        QcThresholds t;
        t.t_q1 = j.value("t_q1", t.t_q1);
        t.t_q3 = j.value("t_q3", t.t_q3);
        t.t_q4 = j.value("t_q4", t.t_q4);
        t.validate();
        return t;
    });
}

json to_json(const QcReport &r) {
    json pairs = json::array();
    for (const auto &p : r.pairs) {
        pairs.push_back({{"label", p.label},
                         {"q1", p.q1},
                         {"q2", p.q2},
                         {"q3", p.q3},
                         {"q4", p.q4},
                         {"passed", p.passed()},
                         {"component_count", p.component_count},
                         {"sizable_count", p.sizable_count},
                         {"rib_sizes", p.rib_sizes},
                         {"rib_tops", p.rib_tops},
                         {"diagnostic", p.diagnostic ? json(*p.diagnostic) : json(nullptr)}});
    }
    return json{{"passed", r.passed},
                {"first_failing", r.first_failing ? json(*r.first_failing) : json(nullptr)},
                {"pairs", pairs}};
}

QcReport qc_report_from_json(const json &j) {
    return guarded([&] {
        QcReport r;
        r.passed = j.at("passed").get<bool>();
        if (!j.at("first_failing").is_null()) r.first_failing = j.at("first_failing").get<std::uint8_t>();
        for (const auto &e : j.at("pairs")) {
            PairQc p;
            p.label = e.at("label").get<std::uint8_t>();
            p.q1 = e.at("q1").get<bool>();
            p.q2 = e.at("q2").get<bool>();
            p.q3 = e.at("q3").get<bool>();
            p.q4 = e.at("q4").get<bool>();
            p.component_count = e.at("component_count").get<std::size_t>();
            p.sizable_count = e.at("sizable_count").get<std::size_t>();
            p.rib_sizes = e.at("rib_sizes").get<std::vector<std::size_t>>();
            p.rib_tops = e.at("rib_tops").get<std::vector<int>>();
            if (!e.at("diagnostic").is_null()) p.diagnostic = e.at("diagnostic").get<std::string>();
            r.pairs.push_back(std::move(p));
        }
        return r;
    });
}

json to_json(const LossBreakdown &b) {
    return json{{"ncc", b.ncc_term}, {"tv", b.tv_term}, {"ce", b.ce_term}, {"total", b.total}, {"degenerate", b.degenerate}};
}

LossBreakdown loss_breakdown_from_json(const json &j) {
    return guarded([&] {
        LossBreakdown b;
        b.ncc_term = j.at("ncc").get<double>();
        b.tv_term = j.at("tv").get<double>();
        b.ce_term = j.at("ce").get<double>();
        b.total = j.at("total").get<double>();
        b.degenerate = j.value("degenerate", false);
        return b;
    });
}

json to_json(const ComparisonSummary &s) {
    json pairwise = json::array();
    for (const auto &p : s.pairwise) {
        pairwise.push_back({{"a", p.a},
                            {"b", p.b},
                            {"w_plus", p.wilcoxon.w_plus},
                            {"w_minus", p.wilcoxon.w_minus},
                            {"statistic", p.wilcoxon.statistic},
                            {"n", p.wilcoxon.n},
                            {"exact", p.wilcoxon.exact},
                            {"p", p.wilcoxon.p_value},
                            {"p_adjusted", p.p_adjusted},
                            {"significant", p.significant},
                            {"mean_difference", p.mean_difference},
                            {"note", p.note ? json(*p.note) : json(nullptr)}});
    }
    json nem = json::array();
    for (const auto &row : s.nemenyi.significant) nem.push_back(row);
    return json{{"metric", s.metric},
                {"higher_is_better", s.higher_is_better},
                {"models", s.models},
                {"subjects", s.subjects},
                {"friedman",
                 {{"statistic", s.friedman.statistic},
                  {"p", s.friedman.p_value},
                  {"alpha", s.options.alpha_friedman},
                  {"significant", s.friedman_significant},
                  {"mean_ranks", s.friedman.mean_ranks},
                  {"degenerate", s.friedman.degenerate}}},
                {"nemenyi",
                 {{"alpha", s.nemenyi.alpha},
                  {"q", s.nemenyi.q},
                  {"critical_difference", s.nemenyi.critical_difference},
                  {"significant", nem}}},
                {"pairwise_alpha", s.options.alpha_pairwise},
                {"reference", s.options.reference ? json(*s.options.reference) : json(nullptr)},
                {"comparisons", s.comparisons},
                {"pairwise", pairwise}};
}

}  // namespace cxreg
