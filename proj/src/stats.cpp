#include "treeperc/stats.hpp"

#include "treeperc/rng.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace treeperc {

double chi2_sf(double x, int df)
{
    if (df <= 0)
        return 1.0;
    if (x <= 0.0)
        return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

namespace {

// Merge adjacent bins until each has at least `need` according to `ok`.
template <class Ok>
std::vector<std::pair<std::size_t, std::size_t>> merge_bins(std::size_t n, Ok ok)
{
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ok(start, i + 1)) {
            groups.emplace_back(start, i + 1);
            start = i + 1;
        }
    }
    if (start < n) {
        if (groups.empty())
            groups.emplace_back(start, n);
        else
            groups.back().second = n;
    }
    return groups;
}

} // namespace

TestResult chi2_homogeneity(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                            double min_expected)
{
    if (a.size() != b.size())
        throw std::invalid_argument("chi2_homogeneity: bin counts differ");
    const double na = std::accumulate(a.begin(), a.end(), 0.0);
    const double nb = std::accumulate(b.begin(), b.end(), 0.0);
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("chi2_homogeneity: empty sample");
    const double n = na + nb;
    auto sum = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = i; k < j; ++k)
            s += static_cast<double>(a[k] + b[k]);
        return s;
    };
    const auto groups = merge_bins(a.size(), [&](std::size_t i, std::size_t j) {
        const double t = sum(i, j);
        return t * na / n >= min_expected && t * nb / n >= min_expected;
    });
    TestResult r;
    for (const auto& [i, j] : groups) {
        double oa = 0.0, ob = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            oa += static_cast<double>(a[k]);
            ob += static_cast<double>(b[k]);
        }
        const double t = oa + ob;
        if (t == 0.0)
            continue;
        const double ea = t * na / n, eb = t * nb / n;
        r.stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
        ++r.df;
    }
    r.df = std::max(0, r.df - 1);
    r.p = chi2_sf(r.stat, r.df);
    return r;
}

TestResult chi2_gof(const std::vector<std::uint64_t>& observed, const std::vector<double>& prob,
                    double min_expected, int fitted_params)
{
    if (observed.size() != prob.size())
        throw std::invalid_argument("chi2_gof: bin counts differ");
    const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
    const auto groups = merge_bins(prob.size(), [&](std::size_t i, std::size_t j) {
        double p = 0.0;
        for (std::size_t k = i; k < j; ++k)
            p += prob[k];
        return p * n >= min_expected;
    });
    TestResult r;
    for (const auto& [i, j] : groups) {
        double o = 0.0, p = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            o += static_cast<double>(observed[k]);
            p += prob[k];
        }
        const double e = p * n;
        if (e <= 0.0) {
            if (o > 0.0)
                return TestResult{INFINITY, 0.0, r.df};
            continue;
        }
        r.stat += (o - e) * (o - e) / e;
        ++r.df;
    }
    r.df = std::max(0, r.df - 1 - fitted_params);
    r.p = chi2_sf(r.stat, r.df);
    return r;
}

double kolmogorov_q(double lambda)
{
    if (lambda < 1e-3)
        return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16)
            break;
    }
    return std::clamp(s, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_two_sample: empty sample");
    for (const auto* v : {&a, &b})
        for (double x : *v)
            if (std::isnan(x))
                throw std::invalid_argument("ks_two_sample: NaN in sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x)
            ++i;
        while (j < b.size() && b[j] <= x)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    TestResult r;
    r.stat = d;
    r.p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

TestResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf)
{
    if (a.empty())
        throw std::invalid_argument("ks_one_sample: empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double F = cdf(a[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    const double ne = std::sqrt(n);
    TestResult r;
    r.stat = d;
    r.p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

TestResult energy_test(const std::vector<std::array<double, 2>>& a, const std::vector<std::array<double, 2>>& b,
                       int permutations, std::uint64_t seed)
{
    std::vector<std::array<double, 2>> z(a);
    z.insert(z.end(), b.begin(), b.end());
    const std::size_t n = z.size(), na = a.size();
    if (na == 0 || b.empty())
        throw std::invalid_argument("energy_test: empty sample");
    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            dist[i * n + j] = std::hypot(z[i][0] - z[j][0], z[i][1] - z[j][1]);
    auto stat = [&](const std::vector<std::size_t>& idx) {
        double ab = 0.0, aa = 0.0, bb = 0.0;
        const std::size_t nb = n - na;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double d = dist[idx[i] * n + idx[j]];
                const bool ia = i < na, ja = j < na;
                if (ia && !ja)
                    ab += d;
                else if (ia && ja)
                    aa += d;
                else if (!ia && !ja)
                    bb += d;
            }
        const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
        return (fa * fb / (fa + fb)) * (2.0 * ab / (fa * fb) - aa / (fa * fa) - bb / (fb * fb));
    };
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    TestResult r;
    r.stat = stat(idx);
    Stream s(derive_key(seed, Purpose::misc, 0xe7e7));
    int ge = 0;
    for (int k = 0; k < permutations; ++k) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(idx[i], idx[s.below(i + 1)]);
        if (stat(idx) >= r.stat)
            ++ge;
    }
    r.p = (ge + 1.0) / (permutations + 1.0);
    return r;
}

Interval wilson(std::uint64_t k, std::uint64_t n, double z)
{
    if (n == 0)
        return {0.0, 1.0};
    const double N = static_cast<double>(n), p = static_cast<double>(k) / N;
    const double d = 1.0 + z * z / N;
    const double c = (p + z * z / (2.0 * N)) / d;
    const double h = z * std::sqrt(p * (1.0 - p) / N + z * z / (4.0 * N * N)) / d;
    return {k == 0 ? 0.0 : std::max(0.0, c - h), k == n ? 1.0 : std::min(1.0, c + h)};
}

Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double alpha)
{
    if (n == 0)
        return {0.0, 1.0};
    const double K = static_cast<double>(k), N = static_cast<double>(n);
    Interval r;
    r.lo = k == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(K, N - K + 1.0), alpha / 2.0);
    r.hi = k == n ? 1.0
                  : boost::math::quantile(boost::math::beta_distribution<double>(K + 1.0, N - K), 1.0 - alpha / 2.0);
    return r;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, double alpha)
{
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n)
        throw std::invalid_argument("fit_slope: needs at least three points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        sse += e * e;
    }
    f.se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    const double t =
        boost::math::quantile(boost::math::students_t_distribution<double>(static_cast<double>(n - 2)), 1.0 - alpha / 2.0);
    f.ci = {f.slope - t * f.se, f.slope + t * f.se};
    return f;
}

double quantile(std::vector<double> v, double q)
{
    if (v.empty())
        throw std::invalid_argument("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size())
        return v.back();
    return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn)
{
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed)
                    return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true))
                        err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace treeperc
