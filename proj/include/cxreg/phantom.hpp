// phantom.hpp - deterministic synthetic chest phantoms with known deformations.
//
// A phantom is a stylised frontal chest image: two elliptical lung fields cut by an
// elliptical heart shadow and a domed diaphragm, crossed by bright curved rib bands.
// Every phantom comes with rib-pair, lung and rib-cage label masks. Intensities are
// quantised to 16-bit levels so that phantoms survive a raster round trip unchanged.

#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "cxreg/grid.hpp"

namespace cxreg {

// Geometry is expressed in fractions of the image size unless noted otherwise.
struct PhantomParams {
    int size = 256;
    int rib_pairs = 9;  // labels 2 .. rib_pairs + 1
    double rib_top = 0.12;
    double rib_spacing = 0.062;
    double rib_thickness = 0.030;
    double rib_inner = 0.035;   // start of a rib, lateral distance from the midline
    double rib_outer = 0.37;    // end of a rib, lateral distance from the midline
    double rib_rise = 0.10;     // upward bow near the spine
    double rib_drop = 0.30;     // downward curvature towards the lateral end
    double lung_offset = 0.19;  // lung centre distance from the midline
    double lung_center_y = 0.50;
    double lung_rx = 0.165;
    double lung_ry = 0.33;
    double heart_cx = 0.54;
    double heart_cy = 0.66;
    double heart_rx = 0.13;
    double heart_ry = 0.11;
    double diaphragm = 0.80;    // diaphragm level at the lung edges
    double diaphragm_dome = 0.05;
    double body_rx = 0.46;
    double body_ry = 0.49;
    double background_level = 0.05;
    double tissue_level = 0.55;
    double lung_level = 0.22;
    double rib_contrast = 0.28;
    double noise = 0.01;  // std of additive Gaussian noise, intensity units
    std::uint64_t seed = 1;
};

struct Phantom {
    PhantomParams params;
    Image image;
    LabelMask ribs;     // RibPairs
    LabelMask lungs;    // LungPair: 1 = lung at smaller x, 2 = lung at larger x
    LabelMask ribcage;  // Binary union of all ribs
};

// Throws InvalidInput("GeometryOverflow") when the anatomy does not fit the grid.
Phantom generate_phantom(const PhantomParams &p);

struct Translation {
    double dx = 0.0;
    double dy = 0.0;
};

// Scaling about the image centre followed by a rotation, in the forward sense:
// image content grows by `scale` and turns by `angle_deg`.
struct AffineScaleRotate {
    double scale = 1.0;
    double angle_deg = 0.0;
};

// Seeded uniform noise on a coarse lattice with `spacing` pixel pitch, bilinearly
// interpolated and scaled so that the largest displacement has norm `amplitude`.
struct SmoothRandomField {
    double amplitude = 3.0;
    double spacing = 64.0;
    std::uint64_t seed = 1;
};

// Radial growth of the heart shadow by `factor`, vanishing beyond twice its radius.
struct HeartEnlargement {
    double factor = 1.2;
};

// Lifts everything below mid-chest by up to `pixels`, tapering smoothly upwards.
struct DiaphragmRaise {
    double pixels = 8.0;
};

// Adds a bright disc to the image; the geometry is unchanged.
struct OpacityBlob {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 10.0;
    double intensity = 0.3;
};

using DeformationSpec =
    std::variant<Translation, AffineScaleRotate, SmoothRandomField, HeartEnlargement, DiaphragmRaise, OpacityBlob>;

struct DeformedPhantom {
    Image image;
    LabelMask ribs;
    LabelMask lungs;
    LabelMask ribcage;
    DisplacementField gt_field;  // deformed = warp(original, gt_field)
};

// Pull-back field realising a deformation spec on the phantom's grid.
DisplacementField deformation_field(const Phantom &ph, const DeformationSpec &d);

DeformedPhantom deform_phantom(const Phantom &ph, const DeformationSpec &d);
// Applies the specs in order; fields compose and the image is resampled once.
DeformedPhantom deform_phantom(const Phantom &ph, const std::vector<DeformationSpec> &ds);

// Adds seeded Gaussian noise, clamps to [0,1] and requantises to 16-bit levels.
Image add_noise(const Image &img, double sigma, std::uint64_t seed);
Image quantize16(const Image &img);

}  // namespace cxreg
