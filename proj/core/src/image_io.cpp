#include "rsim/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <png.h>

#include "rsim/errors.hpp"

namespace rsim {

Tensor read_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());

    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError(path.string() + ": " + msg);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError(path.string() + ": " + msg);
    }

    const int h = static_cast<int>(image.height);
    const int w = static_cast<int>(image.width);
    Tensor out({h, w, 3});
    for (std::size_t i = 0; i < buffer.size(); ++i)
        out.data[i] = static_cast<double>(buffer[i]) / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw ShapeError("write_png: expected [H,W,3], got " + shape_str(img.shape));

    std::vector<std::uint8_t> buffer(img.data.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        buffer[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }

    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.dim(1));
    image.height = static_cast<png_uint_32>(img.dim(0));
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw IoError("write_png " + path.string() + ": " + msg);
    }
}

bool looks_like_png(const std::filesystem::path& path) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::uint8_t head[8];
    in.read(reinterpret_cast<char*>(head), 8);
    return in.gcount() == 8 && std::memcmp(head, sig, 8) == 0;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (img.rank() != 3) throw ShapeError("resize: expected [H,W,C], got " + shape_str(img.shape));
    if (out_h < 1 || out_w < 1) throw ValueError("resize: output dims must be positive");
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (h == out_h && w == out_w) return img;

    Tensor out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y1 = std::clamp(y0 + 1, 0, h - 1);
        y0 = std::clamp(y0, 0, h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x1 = std::clamp(x0 + 1, 0, w - 1);
            x0 = std::clamp(x0, 0, w - 1);
            for (int ch = 0; ch < c; ++ch) {
                const double top = (1.0 - wx) * img.at3(y0, x0, ch) + wx * img.at3(y0, x1, ch);
                const double bot = (1.0 - wx) * img.at3(y1, x0, ch) + wx * img.at3(y1, x1, ch);
                out.at3(oy, ox, ch) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

} // namespace rsim
