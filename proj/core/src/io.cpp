// Copyright 2026 The dwarf-sceneflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dwarf/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "dwarf/params.hpp"

namespace dwarf {

namespace fs = std::filesystem;

namespace {

void require_map(const Tensor<float>& t, int64_t channels, const char* what) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != channels)
        throw ShapeError(std::string(what) + ": expected (1, " + std::to_string(channels) + ", H, W), got " + s.str());
}

void require_mask(const Tensor<float>& mask, const Tensor<float>& map, const char* what) {
    require_map(mask, 1, what);
    if (!mask.shape().spatially_equal(map.shape()))
        throw ShapeError(std::string(what) + ": mask " + mask.shape().str() + " does not match " + map.shape().str());
}

// --- PFM -------------------------------------------------------------------

class HeaderReader {
   public:
    explicit HeaderReader(const std::vector<uint8_t>& b) : bytes_(b) {}
    std::string token() {
        while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
        const size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
        if (start == pos_) throw FormatError("pfm: unexpected end of header", pos_);
        return std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                           bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
    }
    size_t pos() const { return pos_; }
    void skip_one_space() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("pfm: malformed header", pos_);
        ++pos_;
    }

   private:
    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

int parse_dimension(const std::string& s, size_t offset) {
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9' || v > 1'000'000) throw FormatError("pfm: bad dimension '" + s + "'", offset);
        v = v * 10 + (c - '0');
    }
    if (v <= 0) throw FormatError("pfm: bad dimension '" + s + "'", offset);
    return v;
}

// --- PNG -------------------------------------------------------------------

[[noreturn]] void png_throw(png_structp, png_const_charp message) { throw std::runtime_error(std::string("png: ") + message); }
void png_quiet(png_structp, png_const_charp) {}

struct ByteSource {
    const std::vector<uint8_t>* bytes;
    size_t pos;
};

void png_read_bytes(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<ByteSource*>(png_get_io_ptr(png));
    if (src->pos + n > src->bytes->size()) png_error(png, "truncated stream");
    std::memcpy(out, src->bytes->data() + src->pos, n);
    src->pos += n;
}

void png_write_bytes(png_structp png, png_bytep in, png_size_t n) {
    auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), in, in + n);
}

void png_flush(png_structp) {}

uint16_t to_u16(double v) { return static_cast<uint16_t>(std::clamp(v, 0.0, 65535.0)); }

std::string pixel_list(const std::vector<std::pair<int64_t, int64_t>>& px) {
    std::ostringstream out;
    for (size_t i = 0; i < px.size() && i < 8; ++i) out << (i ? ", " : "") << "(" << px[i].first << ", " << px[i].second << ")";
    if (px.size() > 8) out << " and " << px.size() - 8 << " more";
    return out.str();
}

std::string lower_extension(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

}  // namespace

// --- PFM -------------------------------------------------------------------

std::vector<uint8_t> encode_pfm(const PfmImage& image) {
    if (image.channels != 1 && image.channels != 3) throw ShapeError("pfm: 1 or 3 channels required");
    if (image.data.size() != static_cast<size_t>(image.width) * image.height * image.channels)
        throw ShapeError("pfm: data size does not match dimensions");
    const std::string header = std::string(image.channels == 1 ? "Pf" : "PF") + "\n" + std::to_string(image.width) +
                               " " + std::to_string(image.height) + "\n-1\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    const size_t row = static_cast<size_t>(image.width) * image.channels;
    for (int y = image.height - 1; y >= 0; --y)
        for (size_t i = 0; i < row; ++i) {
            const uint32_t bits = std::bit_cast<uint32_t>(image.data[static_cast<size_t>(y) * row + i]);
            for (int b = 0; b < 4; ++b) out.push_back(static_cast<uint8_t>(bits >> (8 * b)));
        }
    return out;
}

PfmImage decode_pfm(const std::vector<uint8_t>& bytes) {
    HeaderReader r(bytes);
    const std::string magic = r.token();
    PfmImage img;
    if (magic == "Pf")
        img.channels = 1;
    else if (magic == "PF")
        img.channels = 3;
    else
        throw FormatError("pfm: bad magic '" + magic + "'", 0);
    size_t at = r.pos();
    img.width = parse_dimension(r.token(), at);
    at = r.pos();
    img.height = parse_dimension(r.token(), at);
    at = r.pos();
    const std::string scale_text = r.token();
    double scale = 0;
    try {
        scale = std::stod(scale_text);
    } catch (const std::exception&) {
        throw FormatError("pfm: bad scale '" + scale_text + "'", at);
    }
    if (scale == 0 || !std::isfinite(scale)) throw FormatError("pfm: scale must be non-zero", at);
    r.skip_one_space();
    const bool little = scale < 0;
    const size_t row = static_cast<size_t>(img.width) * img.channels;
    const size_t need = row * img.height * 4;
    if (bytes.size() - r.pos() != need)
        throw FormatError("pfm: expected " + std::to_string(need) + " data bytes, found " +
                              std::to_string(bytes.size() - r.pos()),
                          r.pos());
    img.data.resize(row * img.height);
    size_t p = r.pos();
    for (int y = img.height - 1; y >= 0; --y)
        for (size_t i = 0; i < row; ++i, p += 4) {
            uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                const uint32_t byte = bytes[p + static_cast<size_t>(b)];
                bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
            }
            img.data[static_cast<size_t>(y) * row + i] = std::bit_cast<float>(bits);
        }
    return img;
}

std::vector<uint8_t> encode_disparity_pfm(const Tensor<float>& disparity, const Tensor<float>& mask) {
    require_map(disparity, 1, "encode_disparity_pfm");
    require_mask(mask, disparity, "encode_disparity_pfm");
    PfmImage img{static_cast<int>(disparity.shape().w), static_cast<int>(disparity.shape().h), 1, {}};
    img.data.resize(static_cast<size_t>(disparity.numel()));
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = mask.data()[i] != 0 ? disparity.data()[i] : std::numeric_limits<float>::quiet_NaN();
    return encode_pfm(img);
}

std::pair<Tensor<float>, Tensor<float>> decode_disparity_pfm(const std::vector<uint8_t>& bytes) {
    const auto img = decode_pfm(bytes);
    if (img.channels != 1) throw FormatError("pfm: disparity must be single-channel", 0);
    auto d = Tensor<float>::zeros({1, 1, img.height, img.width});
    auto m = Tensor<float>::zeros({1, 1, img.height, img.width});
    for (size_t i = 0; i < img.data.size(); ++i) {
        const bool ok = std::isfinite(img.data[i]);
        d.data()[i] = ok ? img.data[i] : 0.0f;
        m.data()[i] = ok ? 1.0f : 0.0f;
    }
    return {d, m};
}

std::vector<uint8_t> encode_flow_pfm(const Tensor<float>& flow, const Tensor<float>& mask) {
    require_map(flow, 2, "encode_flow_pfm");
    require_mask(mask, flow, "encode_flow_pfm");
    const int64_t H = flow.shape().h, W = flow.shape().w;
    PfmImage img{static_cast<int>(W), static_cast<int>(H), 3, std::vector<float>(static_cast<size_t>(H * W * 3))};
    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const bool ok = mask.at(0, 0, y, x) != 0;
            float* px = img.data.data() + (y * W + x) * 3;
            px[0] = ok ? flow.at(0, 0, y, x) : nan;
            px[1] = ok ? flow.at(0, 1, y, x) : nan;
            px[2] = 0.0f;
        }
    return encode_pfm(img);
}

std::pair<Tensor<float>, Tensor<float>> decode_flow_pfm(const std::vector<uint8_t>& bytes) {
    const auto img = decode_pfm(bytes);
    if (img.channels != 3) throw FormatError("pfm: flow must have 3 channels", 0);
    auto f = Tensor<float>::zeros({1, 2, img.height, img.width});
    auto m = Tensor<float>::zeros({1, 1, img.height, img.width});
    for (int64_t y = 0; y < img.height; ++y)
        for (int64_t x = 0; x < img.width; ++x) {
            const float* px = img.data.data() + (y * img.width + x) * 3;
            const bool ok = std::isfinite(px[0]) && std::isfinite(px[1]);
            f.at(0, 0, y, x) = ok ? px[0] : 0.0f;
            f.at(0, 1, y, x) = ok ? px[1] : 0.0f;
            m.at(0, 0, y, x) = ok ? 1.0f : 0.0f;
        }
    return {f, m};
}

// --- PNG -------------------------------------------------------------------

std::vector<uint8_t> encode_png(const PngImage& image) {
    if (image.channels < 1 || image.channels > 4) throw ShapeError("png: 1 to 4 channels required");
    if (image.bit_depth != 8 && image.bit_depth != 16) throw ShapeError("png: bit depth must be 8 or 16");
    if (image.samples.size() != static_cast<size_t>(image.width) * image.height * image.channels)
        throw ShapeError("png: sample count does not match dimensions");
    static constexpr int kColorTypes[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                          PNG_COLOR_TYPE_RGB_ALPHA};
    std::vector<uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_quiet);
    if (!png) throw std::runtime_error("png: cannot create writer");
    png_infop info = png_create_info_struct(png);
    const size_t bytes_per = image.bit_depth / 8;
    const size_t stride = static_cast<size_t>(image.width) * image.channels * bytes_per;
    std::vector<uint8_t> rows(stride * image.height);
    for (size_t i = 0; i < image.samples.size(); ++i) {
        const uint16_t v = image.samples[i];
        if (bytes_per == 2) {
            rows[2 * i] = static_cast<uint8_t>(v >> 8);  // PNG stores big-endian samples
            rows[2 * i + 1] = static_cast<uint8_t>(v & 0xff);
        } else {
            rows[i] = static_cast<uint8_t>(std::min<uint16_t>(v, 255));
        }
    }
    std::vector<png_bytep> row_ptrs(static_cast<size_t>(image.height));
    for (int y = 0; y < image.height; ++y) row_ptrs[static_cast<size_t>(y)] = rows.data() + stride * y;
    try {
        png_set_write_fn(png, &out, png_write_bytes, png_flush);
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
                     image.bit_depth, kColorTypes[image.channels - 1], PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 6);
        png_write_info(png, info);
        png_write_image(png, row_ptrs.data());
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

PngImage decode_png(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("png: bad signature", 0);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_quiet);
    if (!png) throw std::runtime_error("png: cannot create reader");
    png_infop info = png_create_info_struct(png);
    ByteSource src{&bytes, 0};
    PngImage img;
    try {
        png_set_read_fn(png, &src, png_read_bytes);
        png_read_info(png, info);
        const int color = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        img.bit_depth = png_get_bit_depth(png, info);
        const size_t stride = png_get_rowbytes(png, info);
        std::vector<uint8_t> rows(stride * img.height);
        std::vector<png_bytep> row_ptrs(static_cast<size_t>(img.height));
        for (int y = 0; y < img.height; ++y) row_ptrs[static_cast<size_t>(y)] = rows.data() + stride * y;
        png_read_image(png, row_ptrs.data());
        png_read_end(png, nullptr);
        const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
        img.samples.resize(n);
        for (int y = 0; y < img.height; ++y) {
            const uint8_t* row = rows.data() + stride * y;
            const size_t per_row = static_cast<size_t>(img.width) * img.channels;
            for (size_t i = 0; i < per_row; ++i)
                img.samples[y * per_row + i] =
                    img.bit_depth == 16 ? static_cast<uint16_t>(row[2 * i] << 8 | row[2 * i + 1]) : row[i];
        }
    } catch (const FormatError&) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    } catch (const std::exception& e) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(e.what(), src.pos);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::vector<uint8_t> encode_flow_png(const Tensor<float>& flow, const Tensor<float>& mask) {
    require_map(flow, 2, "encode_flow_png");
    require_mask(mask, flow, "encode_flow_png");
    const int64_t H = flow.shape().h, W = flow.shape().w;
    PngImage img{static_cast<int>(W), static_cast<int>(H), 3, 16, std::vector<uint16_t>(static_cast<size_t>(H * W * 3))};
    std::vector<std::pair<int64_t, int64_t>> bad;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            uint16_t* px = img.samples.data() + (y * W + x) * 3;
            if (mask.at(0, 0, y, x) == 0) {
                px[0] = px[1] = px[2] = 0;
                continue;
            }
            const double u = flow.at(0, 0, y, x), v = flow.at(0, 1, y, x);
            if (!(std::abs(u) < 512.0 && std::abs(v) < 512.0)) {
                bad.emplace_back(x, y);
                continue;
            }
            px[0] = to_u16(std::round(u * kFlowPngScale + kFlowPngZero));
            px[1] = to_u16(std::round(v * kFlowPngScale + kFlowPngZero));
            px[2] = 1;
        }
    if (!bad.empty())
        throw std::out_of_range("flow png: |u| or |v| >= 512 at " + std::to_string(bad.size()) + " pixel(s) (x, y): " +
                                pixel_list(bad));
    return encode_png(img);
}

std::pair<Tensor<float>, Tensor<float>> decode_flow_png(const std::vector<uint8_t>& bytes) {
    const auto img = decode_png(bytes);
    if (img.channels != 3 || img.bit_depth != 16) throw FormatError("flow png: expected 16-bit RGB", 0);
    auto f = Tensor<float>::zeros({1, 2, img.height, img.width});
    auto m = Tensor<float>::zeros({1, 1, img.height, img.width});
    for (int64_t y = 0; y < img.height; ++y)
        for (int64_t x = 0; x < img.width; ++x) {
            const uint16_t* px = img.samples.data() + (y * img.width + x) * 3;
            if (px[2] == 0) continue;
            f.at(0, 0, y, x) = static_cast<float>((px[0] - kFlowPngZero) / kFlowPngScale);
            f.at(0, 1, y, x) = static_cast<float>((px[1] - kFlowPngZero) / kFlowPngScale);
            m.at(0, 0, y, x) = 1.0f;
        }
    return {f, m};
}

std::vector<uint8_t> encode_disparity_png(const Tensor<float>& disparity, const Tensor<float>& mask) {
    require_map(disparity, 1, "encode_disparity_png");
    require_mask(mask, disparity, "encode_disparity_png");
    const int64_t H = disparity.shape().h, W = disparity.shape().w;
    PngImage img{static_cast<int>(W), static_cast<int>(H), 1, 16, std::vector<uint16_t>(static_cast<size_t>(H * W))};
    std::vector<std::pair<int64_t, int64_t>> bad;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            if (mask.at(0, 0, y, x) == 0) continue;
            const double d = disparity.at(0, 0, y, x);
            if (!(d >= 0.0 && d < 256.0)) {
                bad.emplace_back(x, y);
                continue;
            }
            img.samples[static_cast<size_t>(y * W + x)] =
                std::max<uint16_t>(1, to_u16(std::round(d * kDispPngScale)));
        }
    if (!bad.empty())
        throw std::out_of_range("disparity png: value outside [0, 256) at " + std::to_string(bad.size()) +
                                " pixel(s) (x, y): " + pixel_list(bad));
    return encode_png(img);
}

std::pair<Tensor<float>, Tensor<float>> decode_disparity_png(const std::vector<uint8_t>& bytes) {
    const auto img = decode_png(bytes);
    if (img.channels != 1 || img.bit_depth != 16) throw FormatError("disparity png: expected 16-bit grey", 0);
    auto d = Tensor<float>::zeros({1, 1, img.height, img.width});
    auto m = Tensor<float>::zeros({1, 1, img.height, img.width});
    for (size_t i = 0; i < img.samples.size(); ++i) {
        if (img.samples[i] == 0) continue;
        d.data()[i] = static_cast<float>(img.samples[i] / kDispPngScale);
        m.data()[i] = 1.0f;
    }
    return {d, m};
}

std::vector<uint8_t> encode_rgb_png(const Tensor<float>& image) {
    require_map(image, 3, "encode_rgb_png");
    const int64_t H = image.shape().h, W = image.shape().w;
    PngImage img{static_cast<int>(W), static_cast<int>(H), 3, 8, std::vector<uint16_t>(static_cast<size_t>(H * W * 3))};
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(image.at(0, c, y, x)), 0.0, 1.0);
                img.samples[static_cast<size_t>((y * W + x) * 3 + c)] = static_cast<uint16_t>(std::lround(v * 255.0));
            }
    return encode_png(img);
}

Tensor<float> decode_rgb_png(const std::vector<uint8_t>& bytes) {
    const auto img = decode_png(bytes);
    const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
    auto t = Tensor<float>::zeros({1, 3, img.height, img.width});
    const bool grey = img.channels <= 2;
    for (int64_t y = 0; y < img.height; ++y)
        for (int64_t x = 0; x < img.width; ++x) {
            const uint16_t* px = img.samples.data() + (y * img.width + x) * img.channels;
            for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = static_cast<float>(px[grey ? 0 : c] / scale);
        }
    return t;
}

std::vector<uint8_t> encode_mask_png(const Tensor<float>& mask) {
    require_map(mask, 1, "encode_mask_png");
    PngImage img{static_cast<int>(mask.shape().w), static_cast<int>(mask.shape().h), 1, 8,
                 std::vector<uint16_t>(static_cast<size_t>(mask.numel()))};
    for (size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = mask.data()[i] != 0 ? 255 : 0;
    return encode_png(img);
}

Tensor<float> decode_mask_png(const std::vector<uint8_t>& bytes) {
    const auto img = decode_png(bytes);
    auto m = Tensor<float>::zeros({1, 1, img.height, img.width});
    for (int64_t i = 0; i < m.numel(); ++i)
        m.data()[static_cast<size_t>(i)] = img.samples[static_cast<size_t>(i * img.channels)] != 0 ? 1.0f : 0.0f;
    return m;
}

Tensor<float> read_image(const fs::path& path) { return decode_rgb_png(read_file_bytes(path)); }
void write_image(const fs::path& path, const Tensor<float>& image) { write_file_bytes(path, encode_rgb_png(image)); }

// --- samples and manifests ------------------------------------------------

GtFormat parse_gt_format(const std::string& name) {
    if (name == "kitti") return GtFormat::Kitti;
    if (name == "pfm") return GtFormat::Pfm;
    throw std::invalid_argument("unknown format '" + name + "' (use kitti or pfm)");
}

std::pair<Tensor<float>, Tensor<float>> read_disparity(const fs::path& path) {
    const auto ext = lower_extension(path);
    const auto bytes = read_file_bytes(path);
    try {
        if (ext == ".pfm") return decode_disparity_pfm(bytes);
        if (ext == ".png") return decode_disparity_png(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    throw std::runtime_error(path.string() + ": unsupported disparity extension");
}

void write_disparity(const fs::path& path, const Tensor<float>& disparity, const Tensor<float>& mask) {
    const auto ext = lower_extension(path);
    if (ext == ".pfm")
        write_file_bytes(path, encode_disparity_pfm(disparity, mask));
    else if (ext == ".png")
        write_file_bytes(path, encode_disparity_png(disparity, mask));
    else
        throw std::runtime_error(path.string() + ": unsupported disparity extension");
}

std::pair<Tensor<float>, Tensor<float>> read_flow(const fs::path& path) {
    const auto ext = lower_extension(path);
    const auto bytes = read_file_bytes(path);
    try {
        if (ext == ".pfm") return decode_flow_pfm(bytes);
        if (ext == ".png") return decode_flow_png(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    throw std::runtime_error(path.string() + ": unsupported flow extension");
}

void write_flow(const fs::path& path, const Tensor<float>& flow, const Tensor<float>& mask) {
    const auto ext = lower_extension(path);
    if (ext == ".pfm")
        write_file_bytes(path, encode_flow_pfm(flow, mask));
    else if (ext == ".png")
        write_file_bytes(path, encode_flow_png(flow, mask));
    else
        throw std::runtime_error(path.string() + ": unsupported flow extension");
}

std::vector<size_t> Manifest::pool(Provenance p) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].provenance == p) out.push_back(i);
    return out;
}

Manifest load_manifest(const fs::path& path, bool require_truth) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();
    Manifest m;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, '\t')) fields.push_back(f);
        const std::string where = path.string() + ":" + std::to_string(number) + ": ";
        if (fields.size() != 5 && fields.size() != 8 && fields.size() != 9)
            throw std::runtime_error(where + "expected 5, 8 or 9 tab-separated fields, found " +
                                     std::to_string(fields.size()));
        ManifestEntry e;
        e.line = number;
        const std::string& token = fields.back();
        if (token == "gt")
            e.provenance = Provenance::Gt;
        else if (token == "px")
            e.provenance = Provenance::Px;
        else
            throw std::runtime_error(where + "provenance must be gt or px, found '" + token + "'");
        auto resolve = [&](const std::string& p) {
            fs::path r = fs::path(p).is_absolute() ? fs::path(p) : base / p;
            if (!fs::exists(r)) throw std::runtime_error(where + "missing file " + r.string());
            return r;
        };
        for (size_t i = 0; i < 4; ++i) e.images[i] = resolve(fields[i]);
        if (fields.size() >= 8) e.truth = std::array<fs::path, 3>{resolve(fields[4]), resolve(fields[5]), resolve(fields[6])};
        if (fields.size() == 9) e.noc = resolve(fields[7]);
        if (require_truth && !e.truth) throw std::runtime_error(where + "ground truth paths are required here");
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    std::ostringstream out;
    out << "# L1\tR1\tL2\tR2\tD1\tF1\tD2\t[NOC]\tprovenance\n";
    auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
    for (const auto& e : entries) {
        for (const auto& p : e.images) out << rel(p) << '\t';
        if (e.truth)
            for (const auto& p : *e.truth) out << rel(p) << '\t';
        if (e.truth && e.noc) out << rel(*e.noc) << '\t';
        out << provenance_token(e.provenance) << '\n';
    }
    const std::string text = out.str();
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

SceneSample load_sample(const ManifestEntry& entry) {
    SceneSample s;
    s.l1 = read_image(entry.images[0]);
    s.r1 = read_image(entry.images[1]);
    s.l2 = read_image(entry.images[2]);
    s.r2 = read_image(entry.images[3]);
    for (const auto* im : {&s.r1, &s.l2, &s.r2})
        if (!(im->shape() == s.l1.shape()))
            throw std::runtime_error("manifest line " + std::to_string(entry.line) + ": images differ in size");
    s.provenance = entry.provenance;
    if (entry.truth) {
        auto [d1, m1] = read_disparity((*entry.truth)[0]);
        auto [f1, mf] = read_flow((*entry.truth)[1]);
        auto [d2, m2] = read_disparity((*entry.truth)[2]);
        for (const auto* t : {&d1, &f1, &d2})
            if (!t->shape().spatially_equal(s.l1.shape()))
                throw std::runtime_error("manifest line " + std::to_string(entry.line) +
                                         ": ground truth size differs from the images");
        auto mask = Tensor<float>::zeros(m1.shape());
        for (int64_t i = 0; i < mask.numel(); ++i) {
            const size_t k = static_cast<size_t>(i);
            mask.data()[k] = (m1.data()[k] != 0 && mf.data()[k] != 0 && m2.data()[k] != 0) ? 1.0f : 0.0f;
        }
        s.gt = SceneFlowField{f1, d1, d2, mask, Tensor<float>()};
        if (entry.noc) {
            auto noc = decode_mask_png(read_file_bytes(*entry.noc));
            for (int64_t i = 0; i < noc.numel(); ++i) noc.data()[static_cast<size_t>(i)] *= mask.data()[static_cast<size_t>(i)];
            s.gt.noc = noc;
        }
    }
    return s;
}

ManifestEntry write_sample(const fs::path& dir, const std::string& stem, const SceneSample& sample, GtFormat format) {
    fs::create_directories(dir);
    ManifestEntry e;
    const char* names[] = {"l1", "r1", "l2", "r2"};
    const Tensor<float>* views[] = {&sample.l1, &sample.r1, &sample.l2, &sample.r2};
    for (size_t i = 0; i < 4; ++i) {
        e.images[i] = dir / (stem + "_" + names[i] + ".png");
        write_image(e.images[i], *views[i]);
    }
    e.provenance = sample.provenance;
    if (sample.gt.disparity.defined()) {
        const std::string ext = format == GtFormat::Kitti ? ".png" : ".pfm";
        std::array<fs::path, 3> t{dir / (stem + "_d1" + ext), dir / (stem + "_f1" + ext), dir / (stem + "_d2" + ext)};
        write_disparity(t[0], sample.gt.disparity, sample.gt.mask);
        write_flow(t[1], sample.gt.flow, sample.gt.mask);
        write_disparity(t[2], sample.gt.change, sample.gt.mask);
        e.truth = t;
        if (sample.gt.noc.defined()) {
            e.noc = dir / (stem + "_noc.png");
            write_file_bytes(*e.noc, encode_mask_png(sample.gt.noc));
        }
    }
    return e;
}

}  // namespace dwarf
