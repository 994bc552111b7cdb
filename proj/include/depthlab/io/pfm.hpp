#pragma once

#include <string>

#include "depthlab/core/grid.hpp"

namespace depthlab::io {

// Portable Float Map, grayscale variant. Header "Pf\n<w> <h>\n<scale>\n";
// a negative scale marks little-endian sample order. Rows are stored
// bottom-to-top per the PFM convention. Invalid pixels are encoded as NaN.
// Samples are 32-bit floats, so a write->read round trip reproduces the
// float-precision values bit-exactly.
void write_pfm(const DepthGrid& grid, const std::string& path);
DepthGrid read_pfm(const std::string& path);

}  // namespace depthlab::io
