#include "pignav/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pignav {

namespace {

void draw_line(Image& img, double x0, double y0, double x1, double y1,
               std::array<uint8_t, 3> c) {
    const int steps = std::max(
        2, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) * 2);
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int px = static_cast<int>(std::lround(x0 + (x1 - x0) * t));
        const int py = static_cast<int>(std::lround(y0 + (y1 - y0) * t));
        if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
        uint8_t* p = img.px(px, py);
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }
}

void draw_marker(Image& img, int cx, int cy, std::array<uint8_t, 3> c) {
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const int px = cx + dx, py = cy + dy;
            if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
            uint8_t* p = img.px(px, py);
            p[0] = c[0];
            p[1] = c[1];
            p[2] = c[2];
        }
}

}  // namespace

Image render_line_chart(const std::vector<PlotSeries>& series, int width, int height) {
    if (width < 64 || height < 64) throw std::invalid_argument("render_line_chart: too small");
    Image img(width, height, {255, 255, 255});

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const PlotSeries& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("render_line_chart: x/y length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

    const int ml = 48, mr = 16, mt = 16, mb = 32;  // margins
    auto sx = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    };
    auto sy = [&](double y) {
        return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
    };

    const std::array<uint8_t, 3> axis{40, 40, 40};
    draw_line(img, ml, mt, ml, height - mb, axis);
    draw_line(img, ml, height - mb, width - mr, height - mb, axis);
    for (int i = 0; i <= 4; ++i) {  // light horizontal grid
        const double gy = sy(ymin + (ymax - ymin) * i / 4.0);
        draw_line(img, ml, gy, width - mr, gy, {225, 225, 225});
    }

    for (const PlotSeries& s : series) {
        for (size_t i = 0; i + 1 < s.x.size(); ++i)
            draw_line(img, sx(s.x[i]), sy(s.y[i]), sx(s.x[i + 1]), sy(s.y[i + 1]), s.color);
        for (size_t i = 0; i < s.x.size(); ++i)
            draw_marker(img, static_cast<int>(std::lround(sx(s.x[i]))),
                        static_cast<int>(std::lround(sy(s.y[i]))), s.color);
    }
    return img;
}

void save_line_chart(const std::filesystem::path& file, const std::vector<PlotSeries>& series,
                     int width, int height) {
    write_png(file, render_line_chart(series, width, height));
}

}  // namespace pignav
