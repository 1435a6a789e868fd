#ifndef CRACKSCAN_MULTITEST_HPP
#define CRACKSCAN_MULTITEST_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "crackscan/errors.hpp"
#include "crackscan/geometry.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

/// Stable FNV-1a hash for tagging calibration files with the feature config.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Cubic scanning window of side u anchored at (a,b,c), 0-based, on the g^3 grid.
struct ScanWindow {
    int a = 0, b = 0, c = 0, u = 1;
};

/// p-norm selector for the CUSUM statistic; p <= 0 means the maximum norm.
struct CusumNorm {
    double p = 0.0; // default: infinity norm

    bool is_inf() const { return p <= 0.0; }

    void validate() const {
        if (!is_inf() && p < 1.0)
            throw ParamError("CUSUM norm p must be >= 1 (or <= 0 for the max norm)");
    }

    std::string name() const {
        if (is_inf()) return "inf";
        std::ostringstream ss;
        ss << p;
        return ss.str();
    }

    static CusumNorm parse(const std::string& s) {
        if (s == "inf" || s == "max") return CusumNorm{0.0};
        CusumNorm n{std::stod(s)};
        n.validate();
        return n;
    }
};

/// All (g-u+1)^3 anchors in lexicographic order (a outermost).
inline std::vector<ScanWindow> enumerate_windows(int g, int u) {
    if (u < 1 || u > g)
        throw ParamError("window side u=" + std::to_string(u) +
                         " must satisfy 1 <= u <= g=" + std::to_string(g));
    const int m = g - u + 1;
    std::vector<ScanWindow> out;
    out.reserve(static_cast<std::size_t>(m) * m * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                out.push_back({a, b, c, u});
    return out;
}

/// Precomputed inclusive 3D prefix sums of the standardized feature channels,
/// so any window's inside/outside means come out in O(1).
class CusumEngine {
public:
    explicit CusumEngine(const FeatureGrid& f) : g_(f.g) {
        const std::vector<double>* chans[3] = {&f.a_std, &f.b_std, &f.c_std};
        const int n = g_ + 1;
        for (int ch = 0; ch < 3; ++ch) {
            auto& P = prefix_[ch];
            P.assign(static_cast<std::size_t>(n) * n * n, 0.0);
            for (int z = 0; z < g_; ++z)
                for (int y = 0; y < g_; ++y)
                    for (int x = 0; x < g_; ++x) {
                        P[pidx(x + 1, y + 1, z + 1)] =
                            (*chans[ch])[f.index(x, y, z)]
                            + P[pidx(x, y + 1, z + 1)] + P[pidx(x + 1, y, z + 1)] +
                            P[pidx(x + 1, y + 1, z)] - P[pidx(x, y, z + 1)] -
                            P[pidx(x, y + 1, z)] - P[pidx(x + 1, y, z)] + P[pidx(x, y, z)];
                    }
            total_[ch] = P[pidx(g_, g_, g_)];
        }
    }

    int g() const { return g_; }

    double cusum(const ScanWindow& w, const CusumNorm& norm = CusumNorm{}) const {
        norm.validate();
        if (w.u < 1 || w.a < 0 || w.b < 0 || w.c < 0 ||
            w.a + w.u > g_ || w.b + w.u > g_ || w.c + w.u > g_)
            throw ParamError("scan window out of range");
        const double n_in = static_cast<double>(w.u) * w.u * w.u;
        const double n_all = static_cast<double>(g_) * g_ * g_;
        const double n_out = n_all - n_in;
        if (n_out <= 0)
            throw ParamError("scanning window must be a proper subset of the grid");

        std::array<double, 3> diff;
        for (int ch = 0; ch < 3; ++ch) {
            const double inside = box_sum(ch, w);
            const double outside = total_[ch] - inside;
            diff[ch] = inside / n_in - outside / n_out;
        }
        if (norm.is_inf())
            return std::max({std::fabs(diff[0]), std::fabs(diff[1]), std::fabs(diff[2])});
        double acc = 0.0;
        for (double d : diff)
            acc += std::pow(std::fabs(d), norm.p);
        return std::pow(acc, 1.0 / norm.p);
    }

private:
    std::size_t pidx(int x, int y, int z) const {
        const int n = g_ + 1;
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z);
    }

    double box_sum(int ch, const ScanWindow& w) const {
        const auto& P = prefix_[ch];
        const int x0 = w.a, y0 = w.b, z0 = w.c;
        const int x1 = w.a + w.u, y1 = w.b + w.u, z1 = w.c + w.u;
        return P[pidx(x1, y1, z1)] - P[pidx(x0, y1, z1)] - P[pidx(x1, y0, z1)] -
               P[pidx(x1, y1, z0)] + P[pidx(x0, y0, z1)] + P[pidx(x0, y1, z0)] +
               P[pidx(x1, y0, z0)] - P[pidx(x0, y0, z0)];
    }

    int g_;
    std::array<std::vector<double>, 3> prefix_;
    std::array<double, 3> total_{};
};

inline double cusum(const FeatureGrid& f, const ScanWindow& w,
                    const CusumNorm& norm = CusumNorm{}) {
    return CusumEngine(f).cusum(w, norm);
}

/// Sorted CUSUM values from a crack-free calibration volume, plus the metadata
/// needed to refuse mismatched reuse.
struct EmpiricalNull {
    std::vector<double> values; // ascending
    int g = 0;
    int u = 0;
    std::string norm = "inf";
    std::string config_hash;

    void check_compatible(int g_query, int u_query, const std::string& norm_query,
                          const std::string& hash_query) const {
        if (g != g_query || u != u_query || norm != norm_query)
            throw CalibError("empirical null built for (g=" + std::to_string(g) +
                             ",u=" + std::to_string(u) + ",norm=" + norm +
                             ") cannot be applied to (g=" + std::to_string(g_query) +
                             ",u=" + std::to_string(u_query) + ",norm=" + norm_query + ")");
        if (!config_hash.empty() && !hash_query.empty() && config_hash != hash_query)
            throw CalibError("empirical null feature config hash " + config_hash +
                             " does not match query hash " + hash_query);
    }
};

inline EmpiricalNull build_null(const FeatureGrid& field, int u,
                                const CusumNorm& norm = CusumNorm{},
                                const std::string& config_hash = "") {
    CusumEngine engine(field);
    EmpiricalNull null;
    null.g = field.g;
    null.u = u;
    null.norm = norm.name();
    null.config_hash = config_hash;
    for (const ScanWindow& w : enumerate_windows(field.g, u))
        null.values.push_back(engine.cusum(w, norm));
    std::sort(null.values.begin(), null.values.end());
    return null;
}

/// ECDF p-value 1 - #{null <= T}/n; with add-one smoothing,
/// (1 + #{null >= T})/(n + 1), which never returns 0.
inline double p_value(double T, const EmpiricalNull& null, bool add_one_smoothing = false) {
    if (null.values.empty())
        throw CalibError("empirical null is empty");
    const auto n = static_cast<double>(null.values.size());
    if (add_one_smoothing) {
        const auto ge = null.values.end() -
                        std::lower_bound(null.values.begin(), null.values.end(), T);
        return (1.0 + static_cast<double>(ge)) / (n + 1.0);
    }
    const auto le = std::upper_bound(null.values.begin(), null.values.end(), T) -
                    null.values.begin();
    return 1.0 - static_cast<double>(le) / n;
}

/// Benjamini-Hochberg step-up: reject the k smallest p-values where
/// k = max{i : p_(i) <= i*alpha/m}; k = 0 rejects none. Ties share the
/// decision of their sorted position.
inline std::vector<std::uint8_t> benjamini_hochberg(const std::vector<double>& pvals,
                                                    double alpha) {
    if (alpha <= 0 || alpha >= 1)
        throw ParamError("BH alpha must be in (0,1)");
    const std::size_t m = pvals.size();
    for (double p : pvals)
        if (!(p >= 0.0 && p <= 1.0))
            throw ParamError("p-values must lie in [0,1]");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return pvals[i] < pvals[j]; });

    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (pvals[order[i]] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m))
            k = i + 1;

    std::vector<std::uint8_t> reject(m, 0);
    if (k > 0) {
        const double cutoff = pvals[order[k - 1]];
        for (std::size_t i = 0; i < m; ++i)
            if (pvals[i] <= cutoff) reject[i] = 1;
    }
    return reject;
}

/// Per-window record plus the aggregated cube-level decision grid.
struct TestReport {
    std::vector<ScanWindow> windows;
    std::vector<double> T;
    std::vector<double> p;
    std::vector<int> decision; // +1 reject (crack evidence), -1 accept
    double alpha = 0.0;
    BinaryVolume cube_mask; // g^3 grid
};

/// Vote aggregation: cube q is flagged iff the sum of the +-1 decisions of all
/// windows containing q is >= 0.
inline BinaryVolume aggregate(const std::vector<ScanWindow>& windows,
                              const std::vector<int>& decisions, int g) {
    if (windows.size() != decisions.size())
        throw ParamError("aggregate: windows and decisions must have equal length");
    // box-accumulate via a 3D difference array
    const int n = g + 1;
    std::vector<long long> diff(static_cast<std::size_t>(n) * n * n, 0);
    auto didx = [n](int x, int y, int z) {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z);
    };
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const long long v = decisions[i];
        diff[didx(w.a, w.b, w.c)] += v;
        diff[didx(w.a + w.u, w.b, w.c)] -= v;
        diff[didx(w.a, w.b + w.u, w.c)] -= v;
        diff[didx(w.a, w.b, w.c + w.u)] -= v;
        diff[didx(w.a + w.u, w.b + w.u, w.c)] += v;
        diff[didx(w.a + w.u, w.b, w.c + w.u)] += v;
        diff[didx(w.a, w.b + w.u, w.c + w.u)] += v;
        diff[didx(w.a + w.u, w.b + w.u, w.c + w.u)] -= v;
    }
    BinaryVolume mask(g, g, g);
    std::vector<long long> acc(diff.size(), 0);
    for (int z = 0; z < g; ++z)
        for (int y = 0; y < g; ++y)
            for (int x = 0; x < g; ++x) {
                long long v = diff[didx(x, y, z)];
                if (x > 0) v += acc[didx(x - 1, y, z)];
                if (y > 0) v += acc[didx(x, y - 1, z)];
                if (z > 0) v += acc[didx(x, y, z - 1)];
                if (x > 0 && y > 0) v -= acc[didx(x - 1, y - 1, z)];
                if (x > 0 && z > 0) v -= acc[didx(x - 1, y, z - 1)];
                if (y > 0 && z > 0) v -= acc[didx(x, y - 1, z - 1)];
                if (x > 0 && y > 0 && z > 0) v += acc[didx(x - 1, y - 1, z - 1)];
                acc[didx(x, y, z)] = v;
                mask(x, y, z) = v >= 0 ? 1 : 0;
            }
    return mask;
}

/// Full detection stage on a feature grid against a compatible null.
inline TestReport detect(const FeatureGrid& field, const EmpiricalNull& null, int u,
                         double alpha, const CusumNorm& norm = CusumNorm{},
                         bool add_one_smoothing = true,
                         const std::string& config_hash = "") {
    null.check_compatible(field.g, u, norm.name(), config_hash);
    if (alpha <= 0 || alpha >= 1)
        throw ParamError("alpha must be in (0,1)");

    TestReport rep;
    rep.alpha = alpha;
    rep.windows = enumerate_windows(field.g, u);
    CusumEngine engine(field);
    rep.T.reserve(rep.windows.size());
    rep.p.reserve(rep.windows.size());
    for (const auto& w : rep.windows)
        rep.T.push_back(engine.cusum(w, norm));
    for (double t : rep.T)
        rep.p.push_back(p_value(t, null, add_one_smoothing));

    const auto reject = benjamini_hochberg(rep.p, alpha);
    rep.decision.resize(reject.size());
    for (std::size_t i = 0; i < reject.size(); ++i)
        rep.decision[i] = reject[i] ? 1 : -1;
    rep.cube_mask = aggregate(rep.windows, rep.decision, field.g);
    return rep;
}

// --- persistence ---

inline void save_null(const EmpiricalNull& null, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out << "# g=" << null.g << "\n# u=" << null.u << "\n# norm=" << null.norm
        << "\n# config=" << null.config_hash << "\n# n=" << null.values.size() << "\n";
    char buf[64];
    for (double v : null.values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

inline EmpiricalNull load_null(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "' for reading");
    EmpiricalNull null;
    std::string line;
    std::size_t expect_n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# g=", 0) == 0) null.g = std::stoi(line.substr(4));
            else if (line.rfind("# u=", 0) == 0) null.u = std::stoi(line.substr(4));
            else if (line.rfind("# norm=", 0) == 0) null.norm = line.substr(7);
            else if (line.rfind("# config=", 0) == 0) null.config_hash = line.substr(9);
            else if (line.rfind("# n=", 0) == 0) expect_n = std::stoul(line.substr(4));
            continue;
        }
        null.values.push_back(std::stod(line));
    }
    if (null.g == 0 || null.u == 0 || null.values.empty())
        throw DataError("malformed null file '" + path + "'");
    if (expect_n && expect_n != null.values.size())
        throw DataError("null file '" + path + "' is truncated");
    if (!std::is_sorted(null.values.begin(), null.values.end()))
        std::sort(null.values.begin(), null.values.end());
    return null;
}

inline void save_report(const TestReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out << "a,b,c,u,T,p,reject\n";
    char buf[160];
    for (std::size_t i = 0; i < rep.windows.size(); ++i) {
        const auto& w = rep.windows[i];
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g,%.17g,%d\n", w.a, w.b, w.c,
                      w.u, rep.T[i], rep.p[i], rep.decision[i] > 0 ? 1 : 0);
        out << buf;
    }
}

} // namespace crackscan

#endif
