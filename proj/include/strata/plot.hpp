#pragma once

#include <string>

#include "strata/dataio.hpp"

namespace strata {

/// Binary PPM (P6) heat map. Continuous rasters use a diverging palette
/// centered at 0 cm (red = thaw, blue = heave, white = 0) scaled by the
/// largest |value|; class rasters use a fixed 7-color ordinal palette.
/// Voids render gray. Cells are upscaled to a readable pixel size.
void plot_raster(const Raster& raster, bool classes, const std::string& path);

/// Truth and prediction side by side with a shared color scale.
void plot_pair(const Raster& truth, const Raster& pred, bool classes,
               const std::string& path);

} // namespace strata
