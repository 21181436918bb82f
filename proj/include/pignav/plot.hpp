// Minimal line-chart rendering for curve artifacts; no plotting dependency.
#pragma once

#include <string>
#include <vector>

#include "pignav/image.hpp"

namespace pignav {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::array<uint8_t, 3> color{0, 0, 0};
};

Image render_line_chart(const std::vector<PlotSeries>& series, int width = 640,
                        int height = 480);

void save_line_chart(const std::filesystem::path& file, const std::vector<PlotSeries>& series,
                     int width = 640, int height = 480);

}  // namespace pignav
