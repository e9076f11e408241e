// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/image.hpp"

namespace nlfv {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error over all channels and pixels ("L2" in reports).
double mse(const Image& a, const Image& b);
/// Mean absolute error over all channels and pixels.
double mean_abs_error(const Image& a, const Image& b);
/// Peak signal-to-noise ratio for unit peak, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse_value);

/// (1 - SSIM) / 2. SSIM uses an 11x11 Gaussian window (sigma 1.5) over the
/// valid region, C1 = 0.01^2, C2 = 0.03^2, and is averaged over channels.
/// Images smaller than the window use the largest odd window that fits.
double dssim(const Image& a, const Image& b);

/// Mean squared error restricted to pixels where mask != 0.
double masked_mse(const Image& a, const Image& b, const std::vector<unsigned char>& mask);

} // namespace nlfv
