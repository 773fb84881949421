// grid.hpp - grid containers and bilinear resampling for cxreg.
//
// Coordinates are pixel centres: x is the column, y is the row, pixel (0,0) sits at
// the origin. Warps use the pull-back convention, out(x) = in(x + u(x)), and every
// sample outside the grid is clamped to the border pixel.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cxreg {

// Base for every error raised by the library. The kind string is stable and used by
// the command line front end for its machine-parsable diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string &what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string &kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string &what) : Error("DimensionMismatch", what) {}
};

class InvalidInput : public Error {
public:
    InvalidInput(std::string kind, const std::string &what) : Error(std::move(kind), what) {}
};

class NumericalFailure : public Error {
public:
    NumericalFailure(std::string kind, const std::string &what) : Error(std::move(kind), what) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

// Single channel image with intensities in [0,1].
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0);
    Image(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    double at(int x, int y) const { return data_[index(x, y)]; }
    double &at(int x, int y) { return data_[index(x, y)]; }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double min_value() const;
    double max_value() const;

    friend bool operator==(const Image &, const Image &) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

enum class LabelSemantics {
    LungPair,  // 1 = left lung, 2 = right lung
    RibPairs,  // 2..10, one label per rib pair
    Binary,    // 1 = foreground
};

std::string to_string(LabelSemantics s);
LabelSemantics label_semantics_from_string(const std::string &s);

// Every label admitted by the semantics, background (0) first.
std::vector<std::uint8_t> label_set(LabelSemantics s);

class LabelMask {
public:
    LabelMask() = default;
    LabelMask(int width, int height, LabelSemantics semantics);
    LabelMask(int width, int height, LabelSemantics semantics, std::vector<std::uint8_t> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return labels_.size(); }
    LabelSemantics semantics() const noexcept { return semantics_; }

    std::uint8_t at(int x, int y) const { return labels_[index(x, y)]; }
    // Throws InvalidInput when the label is outside the declared set.
    void set(int x, int y, std::uint8_t label);
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::span<const std::uint8_t> labels() const noexcept { return labels_; }

    // Binary grid of pixels carrying `label`.
    std::vector<std::uint8_t> indicator(std::uint8_t label) const;
    std::size_t count(std::uint8_t label) const;

    friend bool operator==(const LabelMask &, const LabelMask &) = default;

private:
    int width_ = 0;
    int height_ = 0;
    LabelSemantics semantics_ = LabelSemantics::Binary;
    std::vector<std::uint8_t> labels_;
};

// Per-pixel displacement u(x) in pixels of this grid; T(x) = x + u(x).
class DisplacementField {
public:
    DisplacementField() = default;
    DisplacementField(int width, int height, Vec2 fill = {});
    DisplacementField(int width, int height, std::vector<Vec2> u);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return u_.size(); }

    const Vec2 &at(int x, int y) const { return u_[index(x, y)]; }
    Vec2 &at(int x, int y) { return u_[index(x, y)]; }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::span<const Vec2> data() const noexcept { return u_; }
    std::span<Vec2> data() noexcept { return u_; }

    bool all_finite() const;

    friend bool operator==(const DisplacementField &, const DisplacementField &) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec2> u_;
};

// Bilinear sample together with its partial derivatives in x and y. The derivative
// along an axis is zero where that coordinate was clamped to the border.
struct Sample {
    double value = 0.0;
    double dx = 0.0;
    double dy = 0.0;
};

double bilinear_sample(const Image &img, double x, double y);
Sample bilinear_sample_with_gradient(const Image &img, double x, double y);

// The four neighbours used by a clamped bilinear sample and their weights.
struct BilinearStencil {
    std::size_t idx[4];
    double w[4];
    // d(weight)/dx and d(weight)/dy for each neighbour.
    double wdx[4];
    double wdy[4];
};
BilinearStencil bilinear_stencil(int width, int height, double x, double y);

Image warp_image(const Image &img, const DisplacementField &field);

// Occupancy of every label in the mask's semantic set after a bilinear warp of its
// indicator. Grids are stored in the order of `labels`.
struct OccupancyStack {
    int width = 0;
    int height = 0;
    LabelSemantics semantics = LabelSemantics::Binary;
    std::vector<std::uint8_t> labels;
    std::vector<std::vector<double>> grids;

    const std::vector<double> &grid_for(std::uint8_t label) const;
};

OccupancyStack warp_mask_soft(const LabelMask &mask, const DisplacementField &field);
LabelMask warp_mask_hard(const LabelMask &mask, const DisplacementField &field);

Image resample_image(const Image &img, int new_width, int new_height);
LabelMask resample_mask(const LabelMask &mask, int new_width, int new_height);

// Bilinear upsampling with displacement components scaled by the per-axis size ratio.
// The outer half pixel is extrapolated linearly from the border cell so that linear
// fields are reproduced exactly.
DisplacementField upsample_field(const DisplacementField &field, int new_width, int new_height);

// Composition of pull-back warps: warping by `first` and then by `second` equals
// warping once by the returned field, u(x) = second(x) + first(x + second(x)).
DisplacementField compose_fields(const DisplacementField &first, const DisplacementField &second);

}  // namespace cxreg
