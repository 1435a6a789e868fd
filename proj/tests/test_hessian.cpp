#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crackscan/hessian.hpp"
#include "fd_oracle.hpp"
#include "crackscan/phantom.hpp"

namespace cs = crackscan;

namespace {

cs::HessianVolume single_voxel_hessian(double h11, double h12, double h13,
                                       double h22, double h23, double h33) {
    cs::HessianVolume hv;
    hv.nx = hv.ny = hv.nz = 1;
    hv.sigma = 1.0;
    const double vals[6] = {h11, h12, h13, h22, h23, h33};
    for (int c = 0; c < 6; ++c)
        hv.ch[c] = {static_cast<float>(vals[c])};
    return hv;
}

} // namespace

TEST_CASE("constant volume has a vanishing Hessian") {
    cs::ScalarVolume I(16, 16, 16, 0.7f);
    cs::HessianVolume hv = cs::gaussian_hessian(I, 1.5);
    for (int c = 0; c < 6; ++c)
        for (float v : hv.ch[c])
            CHECK(std::fabs(v) < 1e-6);
}

TEST_CASE("sigma must be positive") {
    cs::ScalarVolume I(4, 4, 4);
    CHECK_THROWS_AS(cs::gaussian_hessian(I, 0.0), cs::ParamError);
    CHECK_THROWS_AS(cs::gaussian_hessian(I, -1.0), cs::ParamError);
}

TEST_CASE("H12 is symmetric under x-y transposition") {
    const int n = 20;
    cs::ScalarVolume I(n, n, n);
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(0, 1);
    for (std::size_t i = 0; i < I.size(); ++i) I[i] = u(rng);
    cs::ScalarVolume T(n, n, n);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                T(x, y, z) = I(y, x, z);

    cs::HessianVolume h1 = cs::gaussian_hessian(I, 1.0);
    cs::HessianVolume h2 = cs::gaussian_hessian(T, 1.0);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double a = h1.ch[1][h1.nx * (h1.ny * z + y) + x];
                const double b = h2.ch[1][h2.nx * (h2.ny * z + x) + y];
                CHECK(std::fabs(a - b) < 1e-5);
            }
}

TEST_CASE("Hessian channels match a finite-difference oracle") {
    cs::ScalarVolume I = crackscan_tests::smooth_test_volume(40);
    cs::HessianVolume hv = cs::gaussian_hessian(I, 2.0);
    CHECK(crackscan_tests::hessian_fd_max_relative_error(I, hv, 2.0) < 1e-3);
}

TEST_CASE("eigenvalues of diagonal and zero matrices") {
    auto l = cs::eigenvalues_sym3({3, 0, 0, -2, 0, 1});
    CHECK(l[0] == doctest::Approx(1).epsilon(1e-12));
    CHECK(l[1] == doctest::Approx(-2).epsilon(1e-12));
    CHECK(l[2] == doctest::Approx(3).epsilon(1e-12));

    l = cs::eigenvalues_sym3({0, 0, 0, 0, 0, 0});
    CHECK(l[0] == 0);
    CHECK(l[1] == 0);
    CHECK(l[2] == 0);
}

TEST_CASE("eigenvalues reject non-finite input") {
    CHECK_THROWS_AS(cs::eigenvalues_sym3(
                        {std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, 0}),
                    cs::DataError);
}

TEST_CASE("random eigenvalues satisfy the characteristic polynomial") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int it = 0; it < 1000; ++it) {
        std::array<double, 6> h;
        for (double& v : h) v = u(rng);
        const auto l = cs::eigenvalues_sym3(h);
        CHECK(std::fabs(l[0]) <= std::fabs(l[1]) + 1e-15);
        CHECK(std::fabs(l[1]) <= std::fabs(l[2]) + 1e-15);

        const double fro = std::sqrt(h[0] * h[0] + h[3] * h[3] + h[5] * h[5] +
                                     2 * (h[1] * h[1] + h[2] * h[2] + h[4] * h[4]));
        const double trace_err = std::fabs(l[0] + l[1] + l[2] - (h[0] + h[3] + h[5]));
        CHECK(trace_err <= 1e-8 * (1 + fro));
        for (double lam : l) {
            const double a = h[0] - lam, d = h[3] - lam, f = h[5] - lam;
            const double det = a * (d * f - h[4] * h[4]) - h[1] * (h[1] * f - h[4] * h[2]) +
                               h[2] * (h[1] * h[4] - d * h[2]);
            CHECK(std::fabs(det) <= 1e-8 * (1 + fro * fro * fro));
        }
    }
}

TEST_CASE("Frangi hand cases") {
    cs::FrangiParams prm{0.5, 0.5, 0.5};
    // l3 <= 0 branch
    auto r = cs::frangi_response(single_voxel_hessian(0, 0, 0, 0, 0, -1), prm);
    CHECK(r[0] == 0.0f);
    r = cs::frangi_response(single_voxel_hessian(-3, 0, 0, -2, 0, -1), prm);
    CHECK(r[0] == 0.0f);
    // l = (0,0,1): second branch, 1 - exp(-2)
    r = cs::frangi_response(single_voxel_hessian(0, 0, 0, 0, 0, 1), prm);
    CHECK(r[0] == doctest::Approx(0.864665).epsilon(1e-4));
    // l = (0,1,1): exp(-2) * (1 - exp(-4))
    r = cs::frangi_response(single_voxel_hessian(0, 0, 0, 1, 0, 1), prm);
    CHECK(r[0] == doctest::Approx(0.132857).epsilon(1e-4));
}

TEST_CASE("Frangi responses lie in [0,1)") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    cs::FrangiParams prm{0.3, 0.3, 1.0};
    for (int it = 0; it < 200; ++it) {
        auto hv = single_voxel_hessian(u(rng), u(rng), u(rng), u(rng), u(rng), u(rng));
        auto r = cs::frangi_response(hv, prm);
        CHECK(r[0] >= 0.0f);
        CHECK(r[0] < 1.0f);
    }
}

TEST_CASE("Frangi parameter validation") {
    auto hv = single_voxel_hessian(0, 0, 0, 0, 0, 1);
    CHECK_THROWS_AS(cs::frangi_response(hv, cs::FrangiParams{0, 0.3, 0.5}), cs::ParamError);
    CHECK_THROWS_AS(cs::frangi_response(hv, cs::FrangiParams{0.3, -1, 0.5}), cs::ParamError);
}

TEST_CASE("Sheet hand cases") {
    cs::SheetParams prm{1.0, 1.0};
    auto r = cs::sheet_response(single_voxel_hessian(0, 0, 0, 0, 0, -1), prm);
    CHECK(r[0] == 0.0f);
    r = cs::sheet_response(single_voxel_hessian(0, 0, 0, 0, 0, 1), prm);
    CHECK(r[0] == doctest::Approx(1.0));
    r = cs::sheet_response(single_voxel_hessian(-1, 0, 0, -1, 0, 1), prm);
    CHECK(r[0] == 0.0f);
}

TEST_CASE("Sheet parameter validation") {
    auto hv = single_voxel_hessian(0, 0, 0, 0, 0, 1);
    CHECK_THROWS_AS(cs::sheet_response(hv, cs::SheetParams{1.0, 0.0}), cs::ParamError);
    CHECK_THROWS_AS(cs::sheet_response(hv, cs::SheetParams{1.0, 1.5}), cs::ParamError);
    CHECK_THROWS_AS(cs::sheet_response(hv, cs::SheetParams{-1.0, 1.0}), cs::ParamError);
}

TEST_CASE("MHE takes the max entry floored at zero") {
    auto r = cs::mhe_response(single_voxel_hessian(-1, 0.2, 0.5, -3, 0.1, 0));
    CHECK(r[0] == doctest::Approx(0.5));
    r = cs::mhe_response(single_voxel_hessian(-1, -2, -0.5, -3, -0.1, -4));
    CHECK(r[0] == 0.0f);
}

TEST_CASE("MHE of a constant image is zero") {
    cs::ScalarVolume I(12, 12, 12, 0.4f);
    auto r = cs::mhe_response(cs::gaussian_hessian(I, 1.0));
    for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(std::fabs(r[i]) < 1e-6);
}

TEST_CASE("3-sigma binarization hand cases") {
    cs::ScalarVolume c(5, 5, 5, 0.3f);
    auto m = cs::three_sigma_binarize(c);
    for (std::size_t i = 0; i < m.size(); ++i)
        CHECK(m[i] == 0);

    cs::ScalarVolume v(10, 10, 10, 0.0f);
    v[123] = 1.0f;
    m = cs::three_sigma_binarize(v);
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.size(); ++i) count += m[i];
    CHECK(count == 1);
    CHECK(m[123] == 1);

    cs::ScalarVolume w(100, 100, 100, 0.0f);
    w[999] = 1.0f;
    m = cs::three_sigma_binarize(w);
    count = 0;
    for (std::size_t i = 0; i < m.size(); ++i) count += m[i];
    CHECK(count == 1);
    CHECK(m[999] == 1);
}

TEST_CASE("3-sigma marks at most N/9 voxels") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<float> u(0, 1);
    for (int it = 0; it < 20; ++it) {
        cs::ScalarVolume v(11, 13, 7);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = u(rng);
        auto m = cs::three_sigma_binarize(v);
        std::size_t count = 0;
        for (std::size_t i = 0; i < m.size(); ++i) count += m[i];
        CHECK(count <= v.size() / 9);
    }
}

TEST_CASE("binarized MHE is invariant under positive scaling of the image") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0, 0.5f);
    cs::ScalarVolume I(24, 24, 24);
    for (std::size_t i = 0; i < I.size(); ++i) I[i] = u(rng);
    cs::ScalarVolume J(24, 24, 24);
    for (std::size_t i = 0; i < I.size(); ++i) J[i] = 2.0f * I[i];

    auto mi = cs::three_sigma_binarize(cs::mhe_response(cs::gaussian_hessian(I, 1.0)));
    auto mj = cs::three_sigma_binarize(cs::mhe_response(cs::gaussian_hessian(J, 1.0)));
    for (std::size_t i = 0; i < mi.size(); ++i)
        CHECK(mi[i] == mj[i]);
}

TEST_CASE("scale set validation") {
    CHECK_THROWS_AS(cs::ScaleSet({}), cs::ParamError);
    CHECK_THROWS_AS(cs::ScaleSet({1.0, 1.0}), cs::ParamError);
    CHECK_THROWS_AS(cs::ScaleSet({-1.0}), cs::ParamError);
    CHECK_NOTHROW(cs::ScaleSet({1.0, 3.0, 5.0}));
}

TEST_CASE("multiscale MHE with one scale equals the single-scale mask") {
    cs::PhantomSpec spec;
    spec.nx = spec.ny = spec.nz = 32;
    spec.seed = 11;
    auto [I, truth] = cs::generate_phantom(spec);
    auto single = cs::three_sigma_binarize(cs::mhe_response(cs::gaussian_hessian(I, 1.0)));
    auto multi = cs::multiscale_mhe(I, cs::ScaleSet({1.0}));
    for (std::size_t i = 0; i < single.size(); ++i)
        CHECK(single[i] == multi[i]);
}

TEST_CASE("multiscale MHE is the union of per-scale masks") {
    cs::PhantomSpec spec;
    spec.nx = spec.ny = spec.nz = 32;
    spec.seed = 12;
    spec.crack = true;
    spec.offset = 16;
    auto [I, truth] = cs::generate_phantom(spec);
    cs::ScaleSet scales({1.0, 2.0});
    auto multi = cs::multiscale_mhe(I, scales);
    auto m1 = cs::three_sigma_binarize(cs::mhe_response(cs::gaussian_hessian(I, 1.0)));
    auto m2 = cs::three_sigma_binarize(cs::mhe_response(cs::gaussian_hessian(I, 2.0)));
    for (std::size_t i = 0; i < multi.size(); ++i)
        CHECK(multi[i] == (m1[i] | m2[i]));
}

TEST_CASE("multiscale Frangi is the pointwise max of responses") {
    cs::PhantomSpec spec;
    spec.nx = spec.ny = spec.nz = 24;
    spec.seed = 13;
    auto [I, truth] = cs::generate_phantom(spec);
    cs::FrangiParams prm{0.3, 0.3, 0.5};
    auto multi = cs::multiscale_frangi(I, cs::ScaleSet({1.0, 2.0}), prm);
    auto r1 = cs::frangi_response(cs::gaussian_hessian(I, 1.0), prm);
    auto r2 = cs::frangi_response(cs::gaussian_hessian(I, 2.0), prm);
    for (std::size_t i = 0; i < multi.size(); ++i)
        CHECK(multi[i] == std::max(r1[i], r2[i]));
}

TEST_CASE("MHE responds more strongly on crack voxels than background") {
    cs::PhantomSpec spec;
    spec.nx = spec.ny = spec.nz = 48;
    spec.seed = 21;
    spec.bg_sd = 0.02;
    spec.crack = true;
    spec.normal[0] = 0; spec.normal[1] = 0; spec.normal[2] = 1;
    spec.offset = 24;
    spec.width = 3;
    spec.crack_mean = 0.2;
    spec.crack_sd = 0.02;
    auto [I, truth] = cs::generate_phantom(spec);
    auto r = cs::mhe_response(cs::gaussian_hessian(I, 1.0));
    double crack_sum = 0, bg_sum = 0;
    std::size_t crack_n = 0, bg_n = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (truth[i]) { crack_sum += r[i]; ++crack_n; }
        else { bg_sum += r[i]; ++bg_n; }
    }
    CHECK(crack_sum / crack_n > bg_sum / bg_n);
}
