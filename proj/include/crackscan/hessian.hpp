#ifndef CRACKSCAN_HESSIAN_HPP
#define CRACKSCAN_HESSIAN_HPP

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "crackscan/errors.hpp"
#include "crackscan/parallel.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

/// Six unique channels of the symmetric per-voxel Hessian at scale sigma.
/// Channel order: H11, H12, H13, H22, H23, H33.
struct HessianVolume {
    int nx = 0, ny = 0, nz = 0;
    double sigma = 0.0;
    std::array<std::vector<float>, 6> ch;

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
};

struct FrangiParams {
    double a = 0.3;
    double b = 0.3;
    double c = 0.0; // <= 0: pick 0.5 * max K over the response volume
};

struct SheetParams {
    double delta = 1.0;
    double rho = 1.0;
};

struct ScaleSet {
    std::vector<double> sigmas;

    explicit ScaleSet(std::vector<double> s) : sigmas(std::move(s)) {
        if (sigmas.empty())
            throw ParamError("scale set must be nonempty");
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            if (sigmas[i] <= 0)
                throw ParamError("scales must be positive");
            if (i > 0 && sigmas[i] <= sigmas[i - 1])
                throw ParamError("scales must be strictly ascending");
        }
    }
};

namespace detail {

/// Sampled 1D Gaussian and discrete first/second derivative kernels, truncated
/// at ceil(3*sigma). The normalization (2*pi*sigma)^(-1/2) per axis is kept as
/// published; the constant cancels in the 3-sigma threshold.
///
/// Naively sampling the continuous Gaussian derivatives leaks truncation error
/// into the kernel moments (the sampled second derivative does not sum to zero,
/// so constants map to nonzero output, and its second moment is off by several
/// percent at this radius). Instead the derivative kernels are built as
/// polynomial-weighted Gaussians q(t) = p(t) * g0(t) whose coefficients are
/// solved so that convolution is exact on monomials up to degree 5 relative to
/// the truncated smoothing kernel (the same moment-correction idea used by
/// scipy.ndimage's Gaussian derivative filters).
struct GaussKernels {
    int radius;
    std::vector<float> g0, g1, g2;

    explicit GaussKernels(double sigma) {
        radius = static_cast<int>(std::ceil(3.0 * sigma));
        const double s2 = sigma * sigma;
        const double norm = std::pow(2.0 * M_PI * sigma, -0.5);
        const int m = 2 * radius + 1;
        g0.resize(m);
        g1.resize(m);
        g2.resize(m);
        std::vector<double> g(m);
        std::array<double, 11> S{};
        for (int t = -radius; t <= radius; ++t) {
            g[t + radius] = norm * std::exp(-0.5 * t * t / s2);
            double tk = 1.0;
            for (int k = 0; k <= 10; ++k) {
                S[k] += tk * g[t + radius];
                tk *= t;
            }
        }
        // Second derivative: q2(t) = (c0 + c2 t^2 + c4 t^4) g0(t) with
        // moments m0 = 0, m2 = 2 S0, m4 = 12 S2 (exact on x^0, x^2, x^4).
        Eigen::Matrix3d A2;
        A2 << S[0], S[2], S[4], S[2], S[4], S[6], S[4], S[6], S[8];
        const Eigen::Vector3d c = A2.fullPivLu().solve(Eigen::Vector3d(0.0, 2.0 * S[0], 12.0 * S[2]));
        // First derivative (true convolution): q1(t) = (c1 t + c3 t^3 + c5 t^5) g0(t)
        // with moments m1 = -S0, m3 = -3 S2, m5 = -5 S4 (exact on x^1, x^3, x^5).
        Eigen::Matrix3d A1;
        A1 << S[2], S[4], S[6], S[4], S[6], S[8], S[6], S[8], S[10];
        const Eigen::Vector3d d =
            A1.fullPivLu().solve(Eigen::Vector3d(-S[0], -3.0 * S[2], -5.0 * S[4]));
        for (int t = -radius; t <= radius; ++t) {
            const double e = g[t + radius];
            const double t2 = static_cast<double>(t) * t;
            g0[t + radius] = static_cast<float>(e);
            g1[t + radius] = static_cast<float>((d[0] + t2 * (d[1] + t2 * d[2])) * t * e);
            g2[t + radius] = static_cast<float>((c[0] + t2 * (c[1] + t2 * c[2])) * e);
        }
    }
};

inline int reflect_index(int i, int n) {
    // symmetric reflection with edge repeat: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

/// True convolution along one axis: out(x) = sum_r k(r) * in(x - r), reflect
/// padding. axis: 0=x, 1=y, 2=z.
inline void conv_axis(const std::vector<float>& in, std::vector<float>& out,
                      int nx, int ny, int nz, const std::vector<float>& kernel,
                      int radius, int axis) {
    const int n = axis == 0 ? nx : axis == 1 ? ny : nz;
    const std::size_t stride = axis == 0 ? 1
                              : axis == 1 ? static_cast<std::size_t>(nx)
                                          : static_cast<std::size_t>(nx) * ny;
    // lines orthogonal to the axis
    const int la = axis == 0 ? ny : nx;
    const int lb = axis == 2 ? ny : nz;
    const std::size_t stride_a = axis == 0 ? static_cast<std::size_t>(nx) : 1;
    const std::size_t stride_b = axis == 2 ? static_cast<std::size_t>(nx)
                                           : static_cast<std::size_t>(nx) * ny;
    out.resize(in.size());

    parallel_for(static_cast<std::size_t>(la) * lb, [&](std::size_t line) {
        const int ia = static_cast<int>(line % la);
        const int ib = static_cast<int>(line / la);
        const std::size_t base = ia * stride_a + ib * stride_b;
        std::vector<float> padded(static_cast<std::size_t>(n) + 2 * radius);
        for (int i = -radius; i < n + radius; ++i)
            padded[i + radius] = in[base + static_cast<std::size_t>(reflect_index(i, n)) * stride];
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            // convolution: flip the kernel against the padded window
            for (int r = -radius; r <= radius; ++r)
                acc += kernel[r + radius] * padded[i - r + radius];
            out[base + static_cast<std::size_t>(i) * stride] = static_cast<float>(acc);
        }
    });
}

} // namespace detail

/// Smoothed second derivatives sigma * (I convolved with d2G/dpi dpj), computed
/// separably per axis with reflect padding, truncation radius ceil(3*sigma).
inline HessianVolume gaussian_hessian(const ScalarVolume& I, double sigma) {
    if (sigma <= 0)
        throw ParamError("sigma must be positive");
    detail::GaussKernels k(sigma);
    const int nx = I.nx(), ny = I.ny(), nz = I.nz();

    HessianVolume hv;
    hv.nx = nx; hv.ny = ny; hv.nz = nz; hv.sigma = sigma;

    auto conv = [&](const std::vector<float>& in, const std::vector<float>& kern,
                    int axis) {
        std::vector<float> out;
        detail::conv_axis(in, out, nx, ny, nz, kern, k.radius, axis);
        return out;
    };

    // z pass, shared across channels
    std::vector<float> z0 = conv(I.data(), k.g0, 2);
    std::vector<float> z1 = conv(I.data(), k.g1, 2);
    std::vector<float> z2 = conv(I.data(), k.g2, 2);

    // y pass
    std::vector<float> z0y0 = conv(z0, k.g0, 1);
    std::vector<float> z0y1 = conv(z0, k.g1, 1);
    std::vector<float> z0y2 = conv(z0, k.g2, 1);
    std::vector<float> z1y0 = conv(z1, k.g0, 1);
    std::vector<float> z1y1 = conv(z1, k.g1, 1);
    std::vector<float> z2y0 = conv(z2, k.g0, 1);
    z0.clear(); z1.clear(); z2.clear();

    // x pass; channel order H11 H12 H13 H22 H23 H33
    hv.ch[0] = conv(z0y0, k.g2, 0);
    hv.ch[1] = conv(z0y1, k.g1, 0);
    hv.ch[2] = conv(z1y0, k.g1, 0);
    hv.ch[3] = conv(z0y2, k.g0, 0);
    hv.ch[4] = conv(z1y1, k.g0, 0);
    hv.ch[5] = conv(z2y0, k.g0, 0);

    const float lead = static_cast<float>(sigma);
    for (auto& c : hv.ch)
        for (float& v : c) v *= lead;
    return hv;
}

/// Eigenvalues of a symmetric 3x3 matrix given as (h11,h12,h13,h22,h23,h33),
/// sorted by ascending absolute value; ties broken by ascending signed value.
inline std::array<double, 3> eigenvalues_sym3(const std::array<double, 6>& h) {
    for (double v : h)
        if (!std::isfinite(v))
            throw DataError("non-finite entry in symmetric 3x3 matrix");
    Eigen::Matrix3d m;
    m << h[0], h[1], h[2],
         h[1], h[3], h[4],
         h[2], h[4], h[5];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
    std::array<double, 3> l{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
    std::sort(l.begin(), l.end(), [](double x, double y) {
        const double ax = std::fabs(x), ay = std::fabs(y);
        return ax != ay ? ax < ay : x < y;
    });
    return l;
}

namespace detail {

inline std::array<double, 6> hessian_at(const HessianVolume& hv, std::size_t i) {
    return {hv.ch[0][i], hv.ch[1][i], hv.ch[2][i], hv.ch[3][i], hv.ch[4][i], hv.ch[5][i]};
}

inline double frobenius(const std::array<double, 6>& h) {
    return std::sqrt(h[0] * h[0] + h[3] * h[3] + h[5] * h[5] +
                     2.0 * (h[1] * h[1] + h[2] * h[2] + h[4] * h[4]));
}

} // namespace detail

inline ScalarVolume frangi_response(const HessianVolume& hv, const FrangiParams& prm) {
    if (prm.a <= 0 || prm.b <= 0)
        throw ParamError("Frangi a and b must be positive");
    double c = prm.c;
    if (c <= 0) {
        // K equals the Frobenius norm of H, so the max is available cheaply
        double kmax = 0.0;
        for (std::size_t i = 0; i < hv.size(); ++i)
            kmax = std::max(kmax, detail::frobenius(detail::hessian_at(hv, i)));
        c = 0.5 * kmax;
        if (c <= 0) c = 1.0; // zero Hessian everywhere, response is 0 anyway
    }

    ScalarVolume out(hv.nx, hv.ny, hv.nz);
    const double cc = c;
    parallel_for(static_cast<std::size_t>(hv.nz), [&](std::size_t z) {
        for (std::size_t i = z * hv.nx * hv.ny, e = (z + 1) * hv.nx * hv.ny; i < e; ++i) {
            const auto h = detail::hessian_at(hv, i);
            const auto l = eigenvalues_sym3(h);
            const double l1 = l[0], l2 = l[1], l3 = l[2];
            if (l3 <= 0) { out[i] = 0; continue; }
            const double K2 = l1 * l1 + l2 * l2 + l3 * l3;
            const double blob = 1.0 - std::exp(-K2 / cc);
            const double tol = 1e-12 * (1.0 + detail::frobenius(h));
            if (std::fabs(l2) <= tol) {
                const double qa = std::fabs(l2 / l3);
                out[i] = static_cast<float>(std::exp(-qa * qa / prm.a) * blob);
            } else {
                const double qa = std::fabs(l2 / l3);
                const double qb = std::fabs(l1) / std::sqrt(std::fabs(l2 * l3));
                out[i] = static_cast<float>(std::exp(-qa * qa / prm.a) *
                                            std::exp(-qb * qb / prm.b) * blob);
            }
        }
    });
    return out;
}

namespace detail {

/// The Sheet filter factor g(ls, lt); branches checked top-down, falling
/// through to 0.
inline double sheet_g(double ls, double lt, double delta, double rho) {
    const double at = std::fabs(lt);
    if (ls <= 0 && at >= std::fabs(ls))
        return std::pow(1.0 + ls / at, delta);
    if (ls > 0 && at >= rho * ls)
        return std::pow(1.0 - rho * ls / at, delta);
    return 0.0;
}

} // namespace detail

inline ScalarVolume sheet_response(const HessianVolume& hv, const SheetParams& prm) {
    if (prm.rho <= 0 || prm.rho > 1)
        throw ParamError("Sheet rho must be in (0,1]");
    if (prm.delta < 0)
        throw ParamError("Sheet delta must be >= 0");
    ScalarVolume out(hv.nx, hv.ny, hv.nz);
    parallel_for(static_cast<std::size_t>(hv.nz), [&](std::size_t z) {
        for (std::size_t i = z * hv.nx * hv.ny, e = (z + 1) * hv.nx * hv.ny; i < e; ++i) {
            const auto l = eigenvalues_sym3(detail::hessian_at(hv, i));
            if (l[2] <= 0) { out[i] = 0; continue; }
            out[i] = static_cast<float>(l[2] *
                                        detail::sheet_g(l[0], l[2], prm.delta, prm.rho) *
                                        detail::sheet_g(l[1], l[2], prm.delta, prm.rho));
        }
    });
    return out;
}

/// Maximal Hessian Entry: per voxel max over the six unique entries and 0.
inline ScalarVolume mhe_response(const HessianVolume& hv) {
    ScalarVolume out(hv.nx, hv.ny, hv.nz);
    for (std::size_t i = 0; i < hv.size(); ++i) {
        float m = 0.0f;
        for (int c = 0; c < 6; ++c)
            m = std::max(m, hv.ch[c][i]);
        out[i] = m;
    }
    return out;
}

/// Marks voxels with r >= mean + 3 * sample sd (denominator N-1). A constant
/// volume yields an all-zero mask.
inline BinaryVolume three_sigma_binarize(const ScalarVolume& r) {
    const std::size_t n = r.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += r[i];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = r[i] - mean;
        ss += d * d;
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    BinaryVolume out(r.nx(), r.ny(), r.nz());
    if (sd == 0.0)
        return out;
    const double thresh = mean + 3.0 * sd;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = r[i] >= thresh ? 1 : 0;
    return out;
}

/// Voxelwise union of the per-scale binarized MHE masks.
inline BinaryVolume multiscale_mhe(const ScalarVolume& I, const ScaleSet& scales) {
    BinaryVolume out(I.nx(), I.ny(), I.nz());
    for (double sigma : scales.sigmas) {
        BinaryVolume mask = three_sigma_binarize(mhe_response(gaussian_hessian(I, sigma)));
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = out[i] | mask[i];
    }
    return out;
}

/// Voxelwise maximum of per-scale Frangi responses.
inline ScalarVolume multiscale_frangi(const ScalarVolume& I, const ScaleSet& scales,
                                      const FrangiParams& prm) {
    ScalarVolume out(I.nx(), I.ny(), I.nz());
    for (double sigma : scales.sigmas) {
        ScalarVolume resp = frangi_response(gaussian_hessian(I, sigma), prm);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::max(out[i], resp[i]);
    }
    return out;
}

} // namespace crackscan

#endif
