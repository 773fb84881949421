// grid.cpp - grid containers and bilinear resampling.

#include "cxreg/grid.hpp"

#include <algorithm>
#include <cmath>

namespace cxreg {

namespace {

void require_dims(int width, int height, const char *what) {
    if (width < 2 || height < 2) {
        throw InvalidInput("InvalidDimensions", std::string(what) + " must be at least 2x2, got " +
                                                    std::to_string(width) + "x" + std::to_string(height));
    }
}

template <class A, class B>
void require_same_dims(const A &a, const B &b, const char *what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()));
    }
}

bool label_allowed(LabelSemantics s, std::uint8_t v) {
    if (v == 0) return true;
    switch (s) {
        case LabelSemantics::LungPair: return v == 1 || v == 2;
        case LabelSemantics::RibPairs: return v >= 2 && v <= 10;
        case LabelSemantics::Binary: return v == 1;
    }
    return false;
}

// Clamped axis lookup: lower index, interpolation fraction and whether the
// coordinate was clamped.
struct AxisCell {
    int i0;
    double frac;
    bool clamped;
};

AxisCell axis_cell(double c, int n) {
    AxisCell cell{0, 0.0, false};
    const double hi = static_cast<double>(n - 1);
    if (!(c > 0.0)) {  // also catches NaN
        cell.clamped = c < 0.0 || std::isnan(c);
        return cell;
    }
    if (c >= hi) {
        cell.clamped = c > hi;
        cell.i0 = n - 2;
        cell.frac = 1.0;
        return cell;
    }
    const double f = std::floor(c);
    cell.i0 = static_cast<int>(f);
    cell.frac = c - f;
    return cell;
}

// Linear interpolation with extrapolation past the outermost sample.
AxisCell axis_cell_extrapolate(double c, int n) {
    int i0 = static_cast<int>(std::floor(c));
    i0 = std::clamp(i0, 0, n - 2);
    return AxisCell{i0, c - static_cast<double>(i0), false};
}

}  // namespace

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
    require_dims(width, height, "Image");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    require_dims(width, height, "Image");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionMismatch("Image data size does not match dimensions");
    }
    for (double v : data_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidInput("IntensityOutOfRange", "Image intensities must be finite and within [0,1]");
        }
    }
}

double Image::min_value() const { return *std::min_element(data_.begin(), data_.end()); }
double Image::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

std::string to_string(LabelSemantics s) {
    switch (s) {
        case LabelSemantics::LungPair: return "lungpair";
        case LabelSemantics::RibPairs: return "ribpairs";
        case LabelSemantics::Binary: return "binary";
    }
    return "binary";
}

LabelSemantics label_semantics_from_string(const std::string &s) {
    if (s == "lungpair") return LabelSemantics::LungPair;
    if (s == "ribpairs") return LabelSemantics::RibPairs;
    if (s == "binary") return LabelSemantics::Binary;
    throw InvalidInput("UnknownSemantics", "unknown label semantics '" + s + "'");
}

std::vector<std::uint8_t> label_set(LabelSemantics s) {
    switch (s) {
        case LabelSemantics::LungPair: return {0, 1, 2};
        case LabelSemantics::RibPairs: return {0, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        case LabelSemantics::Binary: return {0, 1};
    }
    return {0};
}

LabelMask::LabelMask(int width, int height, LabelSemantics semantics)
    : width_(width), height_(height), semantics_(semantics) {
    require_dims(width, height, "LabelMask");
    labels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

LabelMask::LabelMask(int width, int height, LabelSemantics semantics, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), semantics_(semantics), labels_(std::move(labels)) {
    require_dims(width, height, "LabelMask");
    if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionMismatch("LabelMask data size does not match dimensions");
    }
    for (auto v : labels_) {
        if (!label_allowed(semantics_, v)) {
            throw InvalidInput("LabelOutOfSet", "label " + std::to_string(v) + " is not valid for " +
                                                    to_string(semantics_) + " masks");
        }
    }
}

void LabelMask::set(int x, int y, std::uint8_t label) {
    if (!label_allowed(semantics_, label)) {
        throw InvalidInput("LabelOutOfSet", "label " + std::to_string(label) + " is not valid for " +
                                                to_string(semantics_) + " masks");
    }
    labels_[index(x, y)] = label;
}

std::vector<std::uint8_t> LabelMask::indicator(std::uint8_t label) const {
    std::vector<std::uint8_t> out(labels_.size());
    std::transform(labels_.begin(), labels_.end(), out.begin(),
                   [label](std::uint8_t v) { return static_cast<std::uint8_t>(v == label); });
    return out;
}

std::size_t LabelMask::count(std::uint8_t label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

DisplacementField::DisplacementField(int width, int height, Vec2 fill) : width_(width), height_(height) {
    require_dims(width, height, "DisplacementField");
    u_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

DisplacementField::DisplacementField(int width, int height, std::vector<Vec2> u)
    : width_(width), height_(height), u_(std::move(u)) {
    require_dims(width, height, "DisplacementField");
    if (u_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionMismatch("DisplacementField data size does not match dimensions");
    }
    if (!all_finite()) throw InvalidInput("NonFiniteField", "displacement components must be finite");
}

bool DisplacementField::all_finite() const {
    return std::all_of(u_.begin(), u_.end(), [](const Vec2 &v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

BilinearStencil bilinear_stencil(int width, int height, double x, double y) {
    const AxisCell cx = axis_cell(x, width);
    const AxisCell cy = axis_cell(y, height);
    const double fx = cx.frac;
    const double fy = cy.frac;
    const double gx = cx.clamped ? 0.0 : 1.0;
    const double gy = cy.clamped ? 0.0 : 1.0;
    const auto row0 = static_cast<std::size_t>(cy.i0) * static_cast<std::size_t>(width);
    const auto row1 = row0 + static_cast<std::size_t>(width);
    const auto c0 = static_cast<std::size_t>(cx.i0);

    BilinearStencil s{};
    s.idx[0] = row0 + c0;
    s.idx[1] = row0 + c0 + 1;
    s.idx[2] = row1 + c0;
    s.idx[3] = row1 + c0 + 1;
    s.w[0] = (1.0 - fx) * (1.0 - fy);
    s.w[1] = fx * (1.0 - fy);
    s.w[2] = (1.0 - fx) * fy;
    s.w[3] = fx * fy;
    s.wdx[0] = -gx * (1.0 - fy);
    s.wdx[1] = gx * (1.0 - fy);
    s.wdx[2] = -gx * fy;
    s.wdx[3] = gx * fy;
    s.wdy[0] = -gy * (1.0 - fx);
    s.wdy[1] = -gy * fx;
    s.wdy[2] = gy * (1.0 - fx);
    s.wdy[3] = gy * fx;
    return s;
}

double bilinear_sample(const Image &img, double x, double y) {
    const auto s = bilinear_stencil(img.width(), img.height(), x, y);
    const auto d = img.data();
    return s.w[0] * d[s.idx[0]] + s.w[1] * d[s.idx[1]] + s.w[2] * d[s.idx[2]] + s.w[3] * d[s.idx[3]];
}

Sample bilinear_sample_with_gradient(const Image &img, double x, double y) {
    const auto s = bilinear_stencil(img.width(), img.height(), x, y);
    const auto d = img.data();
    Sample out;
    for (int k = 0; k < 4; ++k) {
        const double v = d[s.idx[k]];
        out.value += s.w[k] * v;
        out.dx += s.wdx[k] * v;
        out.dy += s.wdy[k] * v;
    }
    return out;
}

Image warp_image(const Image &img, const DisplacementField &field) {
    require_same_dims(img, field, "warp_image");
    const int w = img.width();
    const int h = img.height();
    std::vector<double> out(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 &u = field.at(x, y);
            const double v = bilinear_sample(img, x + u.x, y + u.y);
            // Convex combination of in-range values; clamp only guards the last ulp.
            out[img.index(x, y)] = std::clamp(v, 0.0, 1.0);
        }
    }
    return Image(w, h, std::move(out));
}

const std::vector<double> &OccupancyStack::grid_for(std::uint8_t label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return grids[i];
    }
    throw InvalidInput("LabelSetMismatch", "label " + std::to_string(label) + " not present in occupancy stack");
}

OccupancyStack warp_mask_soft(const LabelMask &mask, const DisplacementField &field) {
    require_same_dims(mask, field, "warp_mask_soft");
    OccupancyStack occ;
    occ.width = mask.width();
    occ.height = mask.height();
    occ.semantics = mask.semantics();
    occ.labels = label_set(mask.semantics());
    occ.grids.assign(occ.labels.size(), std::vector<double>(mask.size(), 0.0));

    std::uint8_t slot_of[256];
    std::fill(std::begin(slot_of), std::end(slot_of), std::uint8_t{0});
    for (std::size_t i = 0; i < occ.labels.size(); ++i) slot_of[occ.labels[i]] = static_cast<std::uint8_t>(i);

    const auto labels = mask.labels();
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const Vec2 &u = field.at(x, y);
            const auto s = bilinear_stencil(mask.width(), mask.height(), x + u.x, y + u.y);
            const std::size_t p = mask.index(x, y);
            for (int k = 0; k < 4; ++k) {
                occ.grids[slot_of[labels[s.idx[k]]]][p] += s.w[k];
            }
        }
    }
    return occ;
}

LabelMask warp_mask_hard(const LabelMask &mask, const DisplacementField &field) {
    require_same_dims(mask, field, "warp_mask_hard");
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::uint8_t> out(mask.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 &u = field.at(x, y);
            const int sx = std::clamp(static_cast<int>(std::lround(x + u.x)), 0, w - 1);
            const int sy = std::clamp(static_cast<int>(std::lround(y + u.y)), 0, h - 1);
            out[mask.index(x, y)] = mask.at(sx, sy);
        }
    }
    return LabelMask(w, h, mask.semantics(), std::move(out));
}

namespace {

// Source coordinate of destination pixel centre i when resizing n_src -> n_dst.
double source_coord(int i, int n_src, int n_dst) {
    return (static_cast<double>(i) + 0.5) * static_cast<double>(n_src) / static_cast<double>(n_dst) - 0.5;
}

}  // namespace

Image resample_image(const Image &img, int new_width, int new_height) {
    require_dims(new_width, new_height, "resample_image target");
    if (new_width == img.width() && new_height == img.height()) return img;
    std::vector<double> out(static_cast<std::size_t>(new_width) * static_cast<std::size_t>(new_height));
    for (int y = 0; y < new_height; ++y) {
        const double sy = source_coord(y, img.height(), new_height);
        for (int x = 0; x < new_width; ++x) {
            const double sx = source_coord(x, img.width(), new_width);
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(new_width) + static_cast<std::size_t>(x)] =
                std::clamp(bilinear_sample(img, sx, sy), 0.0, 1.0);
        }
    }
    return Image(new_width, new_height, std::move(out));
}

LabelMask resample_mask(const LabelMask &mask, int new_width, int new_height) {
    require_dims(new_width, new_height, "resample_mask target");
    if (new_width == mask.width() && new_height == mask.height()) return mask;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(new_width) * static_cast<std::size_t>(new_height));
    for (int y = 0; y < new_height; ++y) {
        const double sy = source_coord(y, mask.height(), new_height);
        const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, mask.height() - 1);
        for (int x = 0; x < new_width; ++x) {
            const double sx = source_coord(x, mask.width(), new_width);
            const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, mask.width() - 1);
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(new_width) + static_cast<std::size_t>(x)] =
                mask.at(ix, iy);
        }
    }
    return LabelMask(new_width, new_height, mask.semantics(), std::move(out));
}

DisplacementField upsample_field(const DisplacementField &field, int new_width, int new_height) {
    if (new_width < field.width() || new_height < field.height()) {
        throw DimensionMismatch("upsample_field cannot shrink a field");
    }
    if (new_width == field.width() && new_height == field.height()) return field;
    const double scale_x = static_cast<double>(new_width) / field.width();
    const double scale_y = static_cast<double>(new_height) / field.height();
    const int w = field.width();
    std::vector<Vec2> out(static_cast<std::size_t>(new_width) * static_cast<std::size_t>(new_height));
    const auto u = field.data();
    for (int y = 0; y < new_height; ++y) {
        const AxisCell cy = axis_cell_extrapolate(source_coord(y, field.height(), new_height), field.height());
        for (int x = 0; x < new_width; ++x) {
            const AxisCell cx = axis_cell_extrapolate(source_coord(x, field.width(), new_width), field.width());
            const std::size_t i00 = static_cast<std::size_t>(cy.i0) * w + cx.i0;
            const std::size_t i10 = i00 + 1;
            const std::size_t i01 = i00 + w;
            const std::size_t i11 = i01 + 1;
            const double fx = cx.frac;
            const double fy = cy.frac;
            const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
            Vec2 v;
            v.x = (w00 * u[i00].x + w10 * u[i10].x + w01 * u[i01].x + w11 * u[i11].x) * scale_x;
            v.y = (w00 * u[i00].y + w10 * u[i10].y + w01 * u[i01].y + w11 * u[i11].y) * scale_y;
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(new_width) + static_cast<std::size_t>(x)] = v;
        }
    }
    return DisplacementField(new_width, new_height, std::move(out));
}

DisplacementField compose_fields(const DisplacementField &first, const DisplacementField &second) {
    require_same_dims(first, second, "compose_fields");
    const int w = first.width();
    const int h = first.height();
    DisplacementField out(w, h);
    const auto u1 = first.data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 &s = second.at(x, y);
            const auto st = bilinear_stencil(w, h, x + s.x, y + s.y);
            Vec2 f;
            for (int k = 0; k < 4; ++k) {
                f.x += st.w[k] * u1[st.idx[k]].x;
                f.y += st.w[k] * u1[st.idx[k]].y;
            }
            out.at(x, y) = Vec2{s.x + f.x, s.y + f.y};
        }
    }
    return out;
}

}  // namespace cxreg
