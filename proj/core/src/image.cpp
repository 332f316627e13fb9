#include "ovg/image.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <cmath>
#include <fstream>

#include "ovg/errors.hpp"

namespace ovg {

Image resize_bilinear(const Image& src, int width, int height) {
    if (width <= 0 || height <= 0) throw DimensionError("resize target must be positive");
    if (src.width <= 0 || src.height <= 0) throw DimensionError("cannot resize an empty image");
    if (src.width == width && src.height == height) return src;
    Image dst(width, height, src.channels);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
                const double bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
                dst.at(y, x, c) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return dst;
}

ad::Matrix to_pixel_matrix(const Image& img) {
    ad::Matrix m(static_cast<Eigen::Index>(img.width) * img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                m(static_cast<Eigen::Index>(y) * img.width + x, c) = img.at(y, x, c);
    return m;
}

namespace {

void skip_ws_and_comments(std::istream& in) {
    while (in) {
        const int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ParseError(path.string() + ": not a binary PPM (P6) file");
    int w = 0, h = 0, maxval = 0;
    skip_ws_and_comments(in);
    in >> w;
    skip_ws_and_comments(in);
    in >> h;
    skip_ws_and_comments(in);
    in >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError(path.string() + ": bad PPM header");
    in.get();
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError(path.string() + ": truncated PPM payload");
    Image img(w, h, 3);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / static_cast<double>(maxval);
    return img;
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3) throw InputError("PPM output requires 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write image " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace ovg
