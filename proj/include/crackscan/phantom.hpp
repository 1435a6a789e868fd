#ifndef CRACKSCAN_PHANTOM_HPP
#define CRACKSCAN_PHANTOM_HPP

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "crackscan/errors.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

/// Synthetic concrete-like volume: Gaussian background noise, optional digital
/// ball pores (confounders, truth 0), and one planar crack slab (truth 1).
/// Identical spec and seed give bit-identical output.
struct PhantomSpec {
    int nx = 128, ny = 128, nz = 128;
    std::uint64_t seed = 1;

    double bg_mean = 0.6;
    double bg_sd = 0.05;

    bool crack = false;
    double normal[3] = {0, 0, 1};
    double offset = 0.0;      // plane is {p : dot(unit normal, p) = offset}
    double width = 3.0;       // slab thickness in voxels
    double crack_mean = 0.2;
    double crack_sd = 0.05;

    int pore_count = 0;
    double pore_rmin = 2.0, pore_rmax = 5.0;
    double pore_mean = 0.2;
    double pore_sd = 0.05;
};

inline std::pair<ScalarVolume, BinaryVolume> generate_phantom(const PhantomSpec& spec) {
    if (spec.width < 1)
        throw ParamError("crack width must be >= 1");
    double nlen = 0.0;
    if (spec.crack) {
        nlen = std::sqrt(spec.normal[0] * spec.normal[0] + spec.normal[1] * spec.normal[1] +
                         spec.normal[2] * spec.normal[2]);
        if (nlen < 1e-12)
            throw ParamError("crack plane normal is degenerate");
    }

    ScalarVolume vol(spec.nx, spec.ny, spec.nz);
    BinaryVolume truth(spec.nx, spec.ny, spec.nz);
    std::mt19937_64 rng(spec.seed);
    auto clamp01 = [](double v) {
        return static_cast<float>(std::clamp(v, 0.0, 1.0));
    };
    // normal_distribution requires sd > 0; sd = 0 means a deterministic value
    auto noise = [&rng, clamp01](double mean, double sd) {
        if (sd <= 0) return clamp01(mean);
        std::normal_distribution<double> d(mean, sd);
        return clamp01(d(rng));
    };

    for (std::size_t i = 0; i < vol.size(); ++i)
        vol[i] = noise(spec.bg_mean, spec.bg_sd);

    if (spec.pore_count > 0) {
        std::uniform_real_distribution<double> ux(0, spec.nx), uy(0, spec.ny), uz(0, spec.nz);
        std::uniform_real_distribution<double> ur(spec.pore_rmin, spec.pore_rmax);
        for (int p = 0; p < spec.pore_count; ++p) {
            const double px = ux(rng), py = uy(rng), pz = uz(rng), rad = ur(rng);
            const int x0 = std::max(0, static_cast<int>(std::floor(px - rad)));
            const int x1 = std::min(spec.nx - 1, static_cast<int>(std::ceil(px + rad)));
            const int y0 = std::max(0, static_cast<int>(std::floor(py - rad)));
            const int y1 = std::min(spec.ny - 1, static_cast<int>(std::ceil(py + rad)));
            const int z0 = std::max(0, static_cast<int>(std::floor(pz - rad)));
            const int z1 = std::min(spec.nz - 1, static_cast<int>(std::ceil(pz + rad)));
            for (int z = z0; z <= z1; ++z)
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        const double dx = x - px, dy = y - py, dz = z - pz;
                        if (dx * dx + dy * dy + dz * dz <= rad * rad)
                            vol(x, y, z) = noise(spec.pore_mean, spec.pore_sd);
                    }
        }
    }

    if (spec.crack) {
        const double ux = spec.normal[0] / nlen, uy = spec.normal[1] / nlen,
                     uz = spec.normal[2] / nlen;
        const double half = spec.width / 2.0;
        for (int z = 0; z < spec.nz; ++z)
            for (int y = 0; y < spec.ny; ++y)
                for (int x = 0; x < spec.nx; ++x) {
                    const double d = std::fabs(ux * x + uy * y + uz * z - spec.offset);
                    if (d <= half) {
                        vol(x, y, z) = noise(spec.crack_mean, spec.crack_sd);
                        truth(x, y, z) = 1;
                    }
                }
    }

    return {std::move(vol), std::move(truth)};
}

/// Pure background noise volume, clamped to [0,1].
inline ScalarVolume generate_homogeneous(int nx, int ny, int nz, std::uint64_t seed,
                                         double mean, double sd) {
    PhantomSpec spec;
    spec.nx = nx; spec.ny = ny; spec.nz = nz;
    spec.seed = seed;
    spec.bg_mean = mean;
    spec.bg_sd = sd;
    return generate_phantom(spec).first;
}

} // namespace crackscan

#endif
