// Shared test helper: an independent finite-difference oracle for the smoothed
// second derivatives. Smooths with a sampled truncated Gaussian (same published
// per-axis normalization, written separately from the library code), then takes
// 4th-order central differences.
#ifndef CRACKSCAN_TESTS_FD_ORACLE_HPP
#define CRACKSCAN_TESTS_FD_ORACLE_HPP

#include <cmath>
#include <vector>

#include "crackscan/volume.hpp"

namespace crackscan_tests {

inline crackscan::ScalarVolume smooth_test_volume(int n) {
    crackscan::ScalarVolume v(n, n, n);
    const double w = 2.0 * M_PI / n;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                v(x, y, z) = static_cast<float>(
                    0.5 + 0.18 * std::sin(w * x) * std::sin(w * y) +
                    0.12 * std::sin(w * y) * std::cos(w * z) +
                    0.1 * std::cos(w * x) * std::sin(w * z) + 0.08 * std::sin(w * z));
    return v;
}

struct FdOracle {
    int n, radius;
    std::vector<double> smooth;

    FdOracle(const crackscan::ScalarVolume& I, double sigma) : n(I.nx()) {
        radius = static_cast<int>(std::ceil(3.0 * sigma));
        std::vector<double> k(2 * radius + 1);
        const double norm = std::pow(2.0 * M_PI * sigma, -0.5);
        for (int t = -radius; t <= radius; ++t)
            k[t + radius] = norm * std::exp(-0.5 * t * t / (sigma * sigma));

        auto reflect = [this](int i) {
            while (i < 0 || i >= n) {
                if (i < 0) i = -i - 1;
                if (i >= n) i = 2 * n - 1 - i;
            }
            return i;
        };
        auto idx = [this](int x, int y, int z) {
            return static_cast<std::size_t>(x) +
                   static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z);
        };

        std::vector<double> a(I.size()), b(I.size());
        for (std::size_t i = 0; i < I.size(); ++i) a[i] = I[i];
        for (int z = 0; z < n; ++z)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    double acc = 0;
                    for (int r = -radius; r <= radius; ++r)
                        acc += k[r + radius] * a[idx(reflect(x - r), y, z)];
                    b[idx(x, y, z)] = acc;
                }
        for (int z = 0; z < n; ++z)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    double acc = 0;
                    for (int r = -radius; r <= radius; ++r)
                        acc += k[r + radius] * b[idx(x, reflect(y - r), z)];
                    a[idx(x, y, z)] = acc;
                }
        smooth.assign(I.size(), 0.0);
        for (int z = 0; z < n; ++z)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    double acc = 0;
                    for (int r = -radius; r <= radius; ++r)
                        acc += k[r + radius] * a[idx(x, y, reflect(z - r))];
                    smooth[idx(x, y, z)] = acc;
                }
    }

    double at(int x, int y, int z) const {
        return smooth[static_cast<std::size_t>(x) +
                      static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z)];
    }

    double second(int x, int y, int z, int axis) const {
        auto f = [&](int d) {
            return at(x + (axis == 0 ? d : 0), y + (axis == 1 ? d : 0),
                      z + (axis == 2 ? d : 0));
        };
        return (-f(-2) + 16 * f(-1) - 30 * f(0) + 16 * f(1) - f(2)) / 12.0;
    }

    double first(int x, int y, int z, int axis) const {
        auto f = [&](int d) {
            return at(x + (axis == 0 ? d : 0), y + (axis == 1 ? d : 0),
                      z + (axis == 2 ? d : 0));
        };
        return (f(-2) - 8 * f(-1) + 8 * f(1) - f(2)) / 12.0;
    }

    double cross(int x, int y, int z, int ax1, int ax2) const {
        auto g = [&](int d) {
            return first(x + (ax1 == 0 ? d : 0), y + (ax1 == 1 ? d : 0),
                         z + (ax1 == 2 ? d : 0), ax2);
        };
        return (g(-2) - 8 * g(-1) + 8 * g(1) - g(2)) / 12.0;
    }
};

/// Max relative (to the channel's max magnitude) interior error of each channel
/// against the oracle. Returns the worst channel error.
inline double hessian_fd_max_relative_error(const crackscan::ScalarVolume& I,
                                            const crackscan::HessianVolume& hv,
                                            double sigma) {
    FdOracle oracle(I, sigma);
    const int n = I.nx();
    const int margin = oracle.radius + 3;
    const int pair[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    double worst = 0.0;
    for (int c = 0; c < 6; ++c) {
        double max_err = 0.0, max_ref = 0.0;
        for (int z = margin; z < n - margin; ++z)
            for (int y = margin; y < n - margin; ++y)
                for (int x = margin; x < n - margin; ++x) {
                    const double ref =
                        sigma * (pair[c][0] == pair[c][1]
                                     ? oracle.second(x, y, z, pair[c][0])
                                     : oracle.cross(x, y, z, pair[c][0], pair[c][1]));
                    const double got =
                        hv.ch[c][static_cast<std::size_t>(x) +
                                 static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z)];
                    max_ref = std::max(max_ref, std::fabs(ref));
                    max_err = std::max(max_err, std::fabs(got - ref));
                }
        if (max_ref > 0)
            worst = std::max(worst, max_err / max_ref);
    }
    return worst;
}

} // namespace crackscan_tests

#endif
