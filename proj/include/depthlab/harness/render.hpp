#pragma once

#include <array>
#include <string>

#include "depthlab/core/grid.hpp"

namespace depthlab::harness {

// Heatmap ramp control points, evenly spaced over [0, 1] (index k sits at
// k/8). Linear interpolation between neighbors; this table is the reference
// the render tests index into.
inline constexpr std::array<std::array<double, 3>, 9> kMagmaRamp = {{
    {0.001, 0.000, 0.014},
    {0.113, 0.065, 0.277},
    {0.317, 0.072, 0.485},
    {0.513, 0.148, 0.508},
    {0.716, 0.215, 0.475},
    {0.904, 0.320, 0.388},
    {0.987, 0.536, 0.382},
    {0.997, 0.770, 0.507},
    {0.987, 0.991, 0.750},
}};

std::array<double, 3> palette_lookup(double t, const std::string& palette);

// Min-max normalizes the valid pixels and maps them through the palette
// ("magma" or "gray"); invalid pixels render black. A constant map renders
// at mid palette.
ImageGrid render_depth_map(const DepthGrid& depth, const std::string& palette = "magma");

}  // namespace depthlab::harness
