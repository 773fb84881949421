// io.hpp - file formats.
//
// Images:   binary PGM (P5), 8 or 16 bit, normalised by maxval on load.
// Masks:    8-bit binary PGM, pixel value = label.
// Colour:   binary PPM (P6), 8 bit.
// Fields:   "DFLD", u16 version (1), u32 width, u32 height, then width*height pairs
//           of little-endian float32 (dx, dy), row-major.
// Records:  JSON, one document per file (schemas in README.md).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxreg/diff_viz.hpp"
#include "cxreg/grid.hpp"
#include "cxreg/losses.hpp"
#include "cxreg/mask_qc.hpp"
#include "cxreg/metrics.hpp"
#include "cxreg/registration.hpp"
#include "cxreg/stats.hpp"

namespace cxreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::uint16_t kFieldFormatVersion = 1;

Image read_image(const fs::path &path);
void write_image(const fs::path &path, const Image &img, int bits = 16);

LabelMask read_mask(const fs::path &path, LabelSemantics semantics);
void write_mask(const fs::path &path, const LabelMask &mask);

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
    friend bool operator==(const RgbImage &, const RgbImage &) = default;
};
RgbImage read_rgb(const fs::path &path);
void write_rgb(const fs::path &path, const RgbImage &img);

DisplacementField read_field(const fs::path &path);
// Components are stored as float32; values are rounded on write.
void write_field(const fs::path &path, const DisplacementField &field);

std::vector<std::uint8_t> encode_field(const DisplacementField &field);
DisplacementField decode_field(const std::vector<std::uint8_t> &bytes);

json read_json(const fs::path &path);
void write_json(const fs::path &path, const json &j);
std::vector<std::uint8_t> read_bytes(const fs::path &path);

json to_json(const MetricsReport &r);
MetricsReport metrics_report_from_json(const json &j);

json to_json(const RegistrationConfig &c);
RegistrationConfig registration_config_from_json(const json &j);

json to_json(const QcThresholds &t);
QcThresholds qc_thresholds_from_json(const json &j);

json to_json(const QcReport &r);
QcReport qc_report_from_json(const json &j);

json to_json(const LossBreakdown &b);
LossBreakdown loss_breakdown_from_json(const json &j);

json to_json(const ComparisonSummary &s);

}  // namespace cxreg
