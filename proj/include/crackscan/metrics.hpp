#ifndef CRACKSCAN_METRICS_HPP
#define CRACKSCAN_METRICS_HPP

#include <string>
#include <tuple>

#include "crackscan/errors.hpp"
#include "crackscan/geometry.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(const BinaryVolume& pred, const BinaryVolume& truth) {
    if (pred.nx() != truth.nx() || pred.ny() != truth.ny() || pred.nz() != truth.nz())
        throw DataError("confusion: prediction dims " + pred.dims_str() +
                        " != truth dims " + truth.dims_str());
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++c.tp;
        else if (pred[i] && !truth[i]) ++c.fp;
        else if (!pred[i] && truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Precision, recall and F1. Undefined ratios (empty denominators) are 0.
inline std::tuple<double, double, double> prf1(const ConfusionCounts& c) {
    const double P = c.tp + c.fp ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    const double R = c.tp + c.fn ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    const double F1 = P + R > 0 ? 2.0 * P * R / (P + R) : 0.0;
    return {P, R, F1};
}

/// Cube-level ground truth: a cube counts as crack if it contains at least
/// min_voxels truth voxels.
inline BinaryVolume cube_truth(const BinaryVolume& truth, int g, std::size_t min_voxels = 1) {
    const CubePartition p = make_partition(truth, g);
    BinaryVolume out(g, g, g);
    for (int qz = 0; qz < g; ++qz)
        for (int qy = 0; qy < g; ++qy)
            for (int qx = 0; qx < g; ++qx) {
                std::size_t count = 0;
                const int x0 = qx * p.cx, y0 = qy * p.cy, z0 = qz * p.cz;
                for (int z = 0; z < p.cz && count < min_voxels; ++z)
                    for (int y = 0; y < p.cy && count < min_voxels; ++y)
                        for (int x = 0; x < p.cx; ++x)
                            if (truth(x0 + x, y0 + y, z0 + z) && ++count >= min_voxels)
                                break;
                out(qx, qy, qz) = count >= min_voxels ? 1 : 0;
            }
    return out;
}

inline std::string metrics_csv_row(const std::string& stage, const std::string& level,
                                   const ConfusionCounts& c) {
    auto [P, R, F1] = prf1(c);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%.7f,%.7f,%.7f", stage.c_str(), level.c_str(),
                  P, R, F1);
    return buf;
}

} // namespace crackscan

#endif
