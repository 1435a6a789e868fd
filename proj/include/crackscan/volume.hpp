#ifndef CRACKSCAN_VOLUME_HPP
#define CRACKSCAN_VOLUME_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crackscan/errors.hpp"

namespace crackscan {

/// Dense 3D grid, row-major with x fastest: data[x + nx*(y + ny*z)].
/// The layout is part of the raw file format, do not change it.
template <typename T>
class Volume {
public:
    Volume() = default;

    Volume(int nx, int ny, int nz, T fill = T{})
        : nx_(nx), ny_(ny), nz_(nz) {
        if (nx <= 0 || ny <= 0 || nz <= 0)
            throw ParamError("Volume dims must be positive, got " + dims_str(nx, ny, nz));
        data_.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(nx_) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny_) * z);
    }

    T operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
    T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }

    T operator[](std::size_t i) const { return data_[i]; }
    T& operator[](std::size_t i) { return data_[i]; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx_ && y >= 0 && y < ny_ && z >= 0 && z < nz_;
    }

    bool same_dims(const Volume& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_;
    }

    std::string dims_str() const { return dims_str(nx_, ny_, nz_); }

    static std::string dims_str(int nx, int ny, int nz) {
        return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
    }

private:
    int nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using BinaryVolume = Volume<std::uint8_t>;

/// Affine min-max rescale to [0,1]. A constant volume maps to all-zero.
inline ScalarVolume normalize(const ScalarVolume& v) {
    auto [mn_it, mx_it] = std::minmax_element(v.data().begin(), v.data().end());
    const float mn = *mn_it, mx = *mx_it;
    ScalarVolume out(v.nx(), v.ny(), v.nz());
    if (mx > mn) {
        const float scale = 1.0f / (mx - mn);
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i] = (v[i] - mn) * scale;
    }
    return out;
}

} // namespace crackscan

#endif
