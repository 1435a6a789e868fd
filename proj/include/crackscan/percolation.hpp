#ifndef CRACKSCAN_PERCOLATION_HPP
#define CRACKSCAN_PERCOLATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "crackscan/errors.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

struct PercolationParams {
    double epsilon = 0.01; // gray threshold increment, in the volume's own units
    int M = 3;             // half-width of the boundary window
    double r = 0.6;        // acceptance ratio
    int tau_max = 4;       // visit-count cutoff, kept for diagnostics
    int connectivity = 26; // 6 or 26

    void validate() const {
        if (M < 1) throw ParamError("percolation M must be >= 1");
        if (r <= 0 || r > 1) throw ParamError("percolation r must be in (0,1]");
        if (tau_max < 1) throw ParamError("percolation tau_max must be >= 1");
        if (connectivity != 6 && connectivity != 26)
            throw ParamError("percolation connectivity must be 6 or 26");
    }
};

struct ClusterTrace {
    std::size_t seed_voxels = 0;
    std::size_t grown_voxels = 0;
    std::size_t low_visit_voxels = 0; // tau(p) <= tau_max at termination
    double acceptance_ratio = 0.0;
    int sweeps = 0;
    bool reached_boundary = false;
    bool accepted = false;
    std::vector<double> thresholds; // nondecreasing by construction
};

struct PercolationResult {
    BinaryVolume mask;
    std::vector<ClusterTrace> clusters;
};

namespace detail {

inline int neighbor_offsets(int connectivity, std::array<std::array<int, 3>, 26>& out) {
    int n = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1)
                    continue;
                out[n++] = {dx, dy, dz};
            }
    return n;
}

} // namespace detail

/// Region growing seeded from each connected component of the candidate mask H.
///
/// Per component: the window E is the M-cube around the rounded component
/// centroid, clipped to the volume; the volume surface counts as boundary.
/// Starting from P = component with t = max seed gray + epsilon, each sweep
/// admits window voxels adjacent to P with I(q) < t, then updates
/// t <- max(t, max(max_{q in P} I(q), t) + epsilon), which keeps the threshold
/// sequence nondecreasing also for negative epsilon. Growth stops once P
/// touches the window boundary, or stalls with the threshold frozen.
///
/// A cluster is labeled crack iff it reached the boundary and the fraction of
/// its voxels that are seeds or lie below the initial threshold t0 is >= r.
/// The output is the union of accepted clusters; rejected clusters stay
/// material (their visit counts are reported in the trace).
inline PercolationResult hessian_percolation_traced(const ScalarVolume& I,
                                                    const BinaryVolume& H,
                                                    const PercolationParams& prm) {
    prm.validate();
    if (I.nx() != H.nx() || I.ny() != H.ny() || I.nz() != H.nz())
        throw DataError("percolation: image dims " + I.dims_str() +
                        " != mask dims " + H.dims_str());

    const int nx = I.nx(), ny = I.ny(), nz = I.nz();
    std::array<std::array<int, 3>, 26> nbr;
    const int nn = detail::neighbor_offsets(prm.connectivity, nbr);

    PercolationResult res;
    res.mask = BinaryVolume(nx, ny, nz);

    std::vector<std::uint8_t> seen(H.size(), 0); // component labeling, shared

    for (int cz = 0; cz < nz; ++cz)
        for (int cy = 0; cy < ny; ++cy)
            for (int cx = 0; cx < nx; ++cx) {
                const std::size_t ci = H.index(cx, cy, cz);
                if (!H[ci] || seen[ci]) continue;

                // connected component of H
                std::vector<std::array<int, 3>> comp;
                comp.push_back({cx, cy, cz});
                seen[ci] = 1;
                for (std::size_t head = 0; head < comp.size(); ++head) {
                    const auto [x, y, z] = comp[head];
                    for (int k = 0; k < nn; ++k) {
                        const int qx = x + nbr[k][0], qy = y + nbr[k][1], qz = z + nbr[k][2];
                        if (!H.in_bounds(qx, qy, qz)) continue;
                        const std::size_t qi = H.index(qx, qy, qz);
                        if (H[qi] && !seen[qi]) {
                            seen[qi] = 1;
                            comp.push_back({qx, qy, qz});
                        }
                    }
                }

                // window around the rounded component centroid
                double sx = 0, sy = 0, sz = 0;
                for (const auto& p : comp) { sx += p[0]; sy += p[1]; sz += p[2]; }
                const int ox = static_cast<int>(std::lround(sx / comp.size()));
                const int oy = static_cast<int>(std::lround(sy / comp.size()));
                const int oz = static_cast<int>(std::lround(sz / comp.size()));

                auto in_window = [&](int x, int y, int z) {
                    return std::abs(x - ox) <= prm.M && std::abs(y - oy) <= prm.M &&
                           std::abs(z - oz) <= prm.M && I.in_bounds(x, y, z);
                };
                auto on_boundary = [&](int x, int y, int z) {
                    const int d = std::max({std::abs(x - ox), std::abs(y - oy), std::abs(z - oz)});
                    return d == prm.M || x == 0 || y == 0 || z == 0 ||
                           x == nx - 1 || y == ny - 1 || z == nz - 1;
                };

                ClusterTrace trace;
                trace.seed_voxels = comp.size();

                std::vector<std::array<int, 3>> P = comp;
                std::unordered_set<std::size_t> in_p;
                std::unordered_map<std::size_t, int> tau;
                double max_gray = -1.0;
                bool touched = false;
                for (const auto& p : P) {
                    in_p.insert(I.index(p[0], p[1], p[2]));
                    max_gray = std::max(max_gray, static_cast<double>(I(p[0], p[1], p[2])));
                    touched = touched || on_boundary(p[0], p[1], p[2]);
                }
                const double t0 = max_gray + prm.epsilon;
                double t = t0;
                trace.thresholds.push_back(t);

                // candidates adjacent to P inside the window, kept in insertion order
                std::vector<std::array<int, 3>> cand;
                std::unordered_set<std::size_t> in_cand;
                auto push_candidates_of = [&](const std::array<int, 3>& p) {
                    for (int k = 0; k < nn; ++k) {
                        const int qx = p[0] + nbr[k][0], qy = p[1] + nbr[k][1], qz = p[2] + nbr[k][2];
                        if (!in_window(qx, qy, qz)) continue;
                        const std::size_t qi = I.index(qx, qy, qz);
                        if (!in_p.count(qi) && in_cand.insert(qi).second)
                            cand.push_back({qx, qy, qz});
                    }
                };
                for (const auto& p : P) push_candidates_of(p);

                while (!touched && !cand.empty()) {
                    ++trace.sweeps;
                    std::vector<std::array<int, 3>> admitted;
                    std::vector<std::array<int, 3>> still;
                    for (const auto& q : cand) {
                        const std::size_t qi = I.index(q[0], q[1], q[2]);
                        ++tau[qi];
                        if (I(q[0], q[1], q[2]) < t) {
                            in_p.insert(qi);
                            in_cand.erase(qi);
                            admitted.push_back(q);
                        } else {
                            still.push_back(q);
                        }
                    }
                    cand.swap(still);
                    for (const auto& q : admitted) {
                        P.push_back(q);
                        max_gray = std::max(max_gray, static_cast<double>(I(q[0], q[1], q[2])));
                        if (on_boundary(q[0], q[1], q[2])) touched = true;
                        push_candidates_of(q);
                    }
                    const double t_next = std::max(t, std::max(max_gray, t) + prm.epsilon);
                    if (admitted.empty() && t_next == t)
                        break; // stalled: threshold frozen and nothing admissible
                    t = t_next;
                    trace.thresholds.push_back(t);
                }

                trace.grown_voxels = P.size();
                trace.reached_boundary = touched;
                for (const auto& [idx, visits] : tau)
                    if (visits <= prm.tau_max) ++trace.low_visit_voxels;

                // acceptance: seeds plus voxels at crack-level gray (below t0)
                std::size_t cracklike = 0;
                for (const auto& p : P) {
                    const std::size_t pi = I.index(p[0], p[1], p[2]);
                    if (H[pi] || I(p[0], p[1], p[2]) < t0) ++cracklike;
                }
                trace.acceptance_ratio =
                    static_cast<double>(cracklike) / static_cast<double>(P.size());
                trace.accepted = touched && trace.acceptance_ratio >= prm.r;

                if (trace.accepted)
                    for (const auto& p : P)
                        res.mask(p[0], p[1], p[2]) = 1;
                res.clusters.push_back(std::move(trace));
            }
    return res;
}

inline BinaryVolume hessian_percolation(const ScalarVolume& I, const BinaryVolume& H,
                                        const PercolationParams& prm) {
    return hessian_percolation_traced(I, H, prm).mask;
}

} // namespace crackscan

#endif
