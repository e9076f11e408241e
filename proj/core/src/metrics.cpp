// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/metrics.hpp"

#include "nlfv/error.hpp"

#include <algorithm>
#include <cmath>

namespace nlfv {
namespace {

void require_same_size(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
        throw UsageError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + ")");
    }
    if (a.data.empty()) {
        throw UsageError(std::string(what) + ": empty image");
    }
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
            const double v = std::exp(-d2 / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(y) * size + x] = v;
            total += v;
        }
    }
    for (auto& v : w) {
        v /= total;
    }
    return w;
}

} // namespace

double mse(const Image& a, const Image& b) {
    require_same_size(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double mean_abs_error(const Image& a, const Image& b) {
    require_same_size(a, b, "mean_abs_error");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        acc += std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr_from_mse(double mse_value) {
    if (!(mse_value > 0.0)) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, -10.0 * std::log10(mse_value));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double masked_mse(const Image& a, const Image& b, const std::vector<unsigned char>& mask) {
    require_same_size(a, b, "masked_mse");
    if (mask.size() != a.pixel_count()) {
        throw UsageError("masked_mse: mask size mismatch");
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < Image::kChannels; ++c) {
        for (std::size_t p = 0; p < a.pixel_count(); ++p) {
            if (mask[p] == 0) {
                continue;
            }
            const std::size_t i = c * a.pixel_count() + p;
            const double d = static_cast<double>(a.data[i]) - b.data[i];
            acc += d * d;
            ++count;
        }
    }
    if (count == 0) {
        throw UsageError("masked_mse: mask selects no pixels");
    }
    return acc / static_cast<double>(count);
}

double dssim(const Image& a, const Image& b) {
    require_same_size(a, b, "dssim");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    int size = std::min({11, a.width, a.height});
    if (size % 2 == 0) {
        --size;
    }
    const auto window = gaussian_window(size, 1.5);
    const int out_h = a.height - size + 1;
    const int out_w = a.width - size + 1;

    double ssim_total = 0.0;
    for (int c = 0; c < Image::kChannels; ++c) {
        double channel = 0.0;
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int wy = 0; wy < size; ++wy) {
                    for (int wx = 0; wx < size; ++wx) {
                        const double w = window[static_cast<std::size_t>(wy) * size + wx];
                        const double pa = a.at(c, y + wy, x + wx);
                        const double pb = b.at(c, y + wy, x + wx);
                        ma += w * pa;
                        mb += w * pb;
                        saa += w * pa * pa;
                        sbb += w * pb * pb;
                        sab += w * (pa * pb);
                    }
                }
                const double va = saa - ma * ma;
                const double vb = sbb - mb * mb;
                const double cov = sab - ma * mb;
                channel += ((2 * (ma * mb) + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        ssim_total += channel / (static_cast<double>(out_h) * out_w);
    }
    const double ssim = ssim_total / Image::kChannels;
    return std::clamp((1.0 - ssim) / 2.0, 0.0, 1.0);
}

} // namespace nlfv
