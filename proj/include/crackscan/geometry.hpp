#ifndef CRACKSCAN_GEOMETRY_HPP
#define CRACKSCAN_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "crackscan/errors.hpp"
#include "crackscan/parallel.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

/// The 13 pairwise non-antiparallel lattice directions, each with a fixed
/// integer basis pair spanning its orthogonal plane. Projected voxel centers
/// land on integer cells (dot products with the basis), so counting distinct
/// cells is exact.
struct Direction {
    std::array<int, 3> dir;
    std::array<int, 3> e1;
    std::array<int, 3> e2;
};

inline const std::array<Direction, 13>& direction_set() {
    static const std::array<Direction, 13> dirs = {{
        {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
        {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}},
        {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},
        {{1, 1, 0}, {1, -1, 0}, {0, 0, 1}},
        {{1, -1, 0}, {1, 1, 0}, {0, 0, 1}},
        {{1, 0, 1}, {1, 0, -1}, {0, 1, 0}},
        {{1, 0, -1}, {1, 0, 1}, {0, 1, 0}},
        {{0, 1, 1}, {0, 1, -1}, {1, 0, 0}},
        {{0, 1, -1}, {0, 1, 1}, {1, 0, 0}},
        {{1, 1, 1}, {1, -1, 0}, {1, 1, -2}},
        {{1, 1, -1}, {1, -1, 0}, {1, 1, 2}},
        {{1, -1, 1}, {1, 1, 0}, {1, -1, -2}},
        {{-1, 1, 1}, {1, 1, 0}, {-1, 1, -2}},
    }};
    return dirs;
}

struct CubePartition {
    int g = 0;
    int cx = 0, cy = 0, cz = 0; // voxels per cube along each axis
    int trim_x = 0, trim_y = 0, trim_z = 0; // trailing voxels excluded

    std::size_t cube_voxels() const {
        return static_cast<std::size_t>(cx) * cy * cz;
    }
    bool size_in_recommended_range() const {
        return cube_voxels() >= 15 * 15 * 15 && cube_voxels() <= 30 * 30 * 30;
    }
};

inline CubePartition make_partition(int nx, int ny, int nz, int g) {
    if (g < 2)
        throw ParamError("partition g must be >= 2");
    if (g > std::min({nx, ny, nz}))
        throw ParamError("partition g=" + std::to_string(g) + " exceeds min dim " +
                         std::to_string(std::min({nx, ny, nz})));
    CubePartition p;
    p.g = g;
    p.cx = nx / g; p.cy = ny / g; p.cz = nz / g;
    p.trim_x = nx - g * p.cx;
    p.trim_y = ny - g * p.cy;
    p.trim_z = nz - g * p.cz;
    return p;
}

template <typename T>
CubePartition make_partition(const Volume<T>& vol, int g) {
    return make_partition(vol.nx(), vol.ny(), vol.nz(), g);
}

/// Extracts cube (qx,qy,qz) of the partition as its own small volume.
inline BinaryVolume extract_cube(const BinaryVolume& vol, const CubePartition& p,
                                 int qx, int qy, int qz) {
    BinaryVolume cube(p.cx, p.cy, p.cz);
    const int x0 = qx * p.cx, y0 = qy * p.cy, z0 = qz * p.cz;
    for (int z = 0; z < p.cz; ++z)
        for (int y = 0; y < p.cy; ++y)
            for (int x = 0; x < p.cx; ++x)
                cube(x, y, z) = vol(x0 + x, y0 + y, z0 + z);
    return cube;
}

/// Exposed-face count: foreground faces whose 6-neighbor is background or
/// outside the cube. Cube-boundary faces count as exposed.
inline double surface_area(const BinaryVolume& cube) {
    static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                  {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::size_t faces = 0;
    for (int z = 0; z < cube.nz(); ++z)
        for (int y = 0; y < cube.ny(); ++y)
            for (int x = 0; x < cube.nx(); ++x) {
                if (!cube(x, y, z)) continue;
                for (const auto& d : off) {
                    const int ox = x + d[0], oy = y + d[1], oz = z + d[2];
                    if (!cube.in_bounds(ox, oy, oz) || !cube(ox, oy, oz))
                        ++faces;
                }
            }
    return static_cast<double>(faces);
}

inline double foreground_volume(const BinaryVolume& cube) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < cube.size(); ++i)
        if (cube[i]) ++n;
    return static_cast<double>(n);
}

/// Number of distinct occupied cells after projecting foreground voxel centers
/// onto the plane orthogonal to the given lattice direction, discretized by the
/// direction's fixed integer basis.
inline double projection_area(const BinaryVolume& cube, const Direction& dir) {
    std::unordered_set<std::int64_t> cells;
    for (int z = 0; z < cube.nz(); ++z)
        for (int y = 0; y < cube.ny(); ++y)
            for (int x = 0; x < cube.nx(); ++x) {
                if (!cube(x, y, z)) continue;
                const std::int64_t s1 = static_cast<std::int64_t>(x) * dir.e1[0] +
                                        static_cast<std::int64_t>(y) * dir.e1[1] +
                                        static_cast<std::int64_t>(z) * dir.e1[2];
                const std::int64_t s2 = static_cast<std::int64_t>(x) * dir.e2[0] +
                                        static_cast<std::int64_t>(y) * dir.e2[1] +
                                        static_cast<std::int64_t>(z) * dir.e2[2];
                cells.insert((s1 << 24) ^ (s2 & 0xffffff));
            }
    return static_cast<double>(cells.size());
}

inline double projection_area(const BinaryVolume& cube, const std::array<int, 3>& d) {
    for (const auto& entry : direction_set())
        if (entry.dir == d)
            return projection_area(cube, entry);
    throw ParamError("direction is not one of the 13 lattice directions");
}

/// Per-cube raw triples (a,b,c) and standardized triples. Standardization
/// divides each channel by its grid-wide sample sd without centering; a
/// constant-zero-sd channel standardizes to all-zero.
struct FeatureGrid {
    int g = 0;
    std::vector<double> a, b, c;          // raw
    std::vector<double> a_std, b_std, c_std;

    std::size_t cells() const { return static_cast<std::size_t>(g) * g * g; }
    std::size_t index(int qx, int qy, int qz) const {
        return static_cast<std::size_t>(qx) + static_cast<std::size_t>(g) * (qy + static_cast<std::size_t>(g) * qz);
    }
};

namespace detail {

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        const double d = x - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline void standardize(const std::vector<double>& raw, std::vector<double>& out) {
    const double sd = sample_sd(raw);
    out.assign(raw.size(), 0.0);
    if (sd == 0.0) return;
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = raw[i] / sd;
}

} // namespace detail

inline FeatureGrid feature_grid(const BinaryVolume& vol, int g) {
    const CubePartition p = make_partition(vol, g);
    FeatureGrid f;
    f.g = g;
    f.a.resize(f.cells());
    f.b.resize(f.cells());
    f.c.resize(f.cells());

    parallel_for(f.cells(), [&](std::size_t q) {
        const int qx = static_cast<int>(q % g);
        const int qy = static_cast<int>((q / g) % g);
        const int qz = static_cast<int>(q / (static_cast<std::size_t>(g) * g));
        const BinaryVolume cube = extract_cube(vol, p, qx, qy, qz);
        const double V = foreground_volume(cube);
        f.b[q] = V;
        f.a[q] = V > 0 ? surface_area(cube) / V : 0.0;
        std::vector<double> proj(13);
        for (int d = 0; d < 13; ++d)
            proj[d] = projection_area(cube, direction_set()[d]);
        f.c[q] = detail::sample_sd(proj);
    });

    detail::standardize(f.a, f.a_std);
    detail::standardize(f.b, f.b_std);
    detail::standardize(f.c, f.c_std);
    return f;
}

inline void save_feature_grid(const FeatureGrid& f, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out << "# g=" << f.g << "\n";
    out << "qx,qy,qz,a,b,c,a_std,b_std,c_std\n";
    char buf[256];
    for (int qz = 0; qz < f.g; ++qz)
        for (int qy = 0; qy < f.g; ++qy)
            for (int qx = 0; qx < f.g; ++qx) {
                const std::size_t q = f.index(qx, qy, qz);
                std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              qx, qy, qz, f.a[q], f.b[q], f.c[q],
                              f.a_std[q], f.b_std[q], f.c_std[q]);
                out << buf;
            }
}

inline FeatureGrid load_feature_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "' for reading");
    std::string line;
    FeatureGrid f;
    while (std::getline(in, line)) {
        if (line.rfind("# g=", 0) == 0) {
            f.g = std::stoi(line.substr(4));
            f.a.assign(f.cells(), 0.0);
            f.b.assign(f.cells(), 0.0);
            f.c.assign(f.cells(), 0.0);
            f.a_std.assign(f.cells(), 0.0);
            f.b_std.assign(f.cells(), 0.0);
            f.c_std.assign(f.cells(), 0.0);
            continue;
        }
        if (line.empty() || line[0] == '#' || line.rfind("qx", 0) == 0) continue;
        if (f.g == 0)
            throw DataError("feature grid file missing '# g=' header");
        std::istringstream ss(line);
        std::string tok;
        std::array<double, 9> vals{};
        for (int i = 0; i < 9; ++i) {
            if (!std::getline(ss, tok, ','))
                throw DataError("malformed feature grid row: " + line);
            vals[i] = std::stod(tok);
        }
        const std::size_t q = f.index(static_cast<int>(vals[0]),
                                      static_cast<int>(vals[1]),
                                      static_cast<int>(vals[2]));
        f.a[q] = vals[3]; f.b[q] = vals[4]; f.c[q] = vals[5];
        f.a_std[q] = vals[6]; f.b_std[q] = vals[7]; f.c_std[q] = vals[8];
    }
    if (f.g == 0)
        throw DataError("empty feature grid file '" + path + "'");
    return f;
}

} // namespace crackscan

#endif
