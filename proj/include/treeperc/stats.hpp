#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace treeperc {

struct TestResult {
    double stat = 0.0;
    double p = 1.0;
    int df = 0;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

// Chi-square homogeneity of two count vectors over the same bins. Adjacent
// bins are merged left to right until every merged bin has expected count at
// least min_expected in both samples.
TestResult chi2_homogeneity(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                            double min_expected = 5.0);

// Goodness of fit of counts to probabilities (summing to 1), with the same merging.
TestResult chi2_gof(const std::vector<std::uint64_t>& observed, const std::vector<double>& prob,
                    double min_expected = 5.0, int fitted_params = 0);

// Two-sample Kolmogorov-Smirnov distance with its asymptotic p-value.
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// One-sample KS against a continuous CDF.
TestResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

double kolmogorov_q(double lambda);

// Energy distance between two samples in R^2 with a permutation p-value.
TestResult energy_test(const std::vector<std::array<double, 2>>& a, const std::vector<std::array<double, 2>>& b,
                       int permutations, std::uint64_t seed);

Interval wilson(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054);
Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double alpha = 0.05);

double chi2_sf(double x, int df);
double normal_quantile(double p);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se = 0.0;
    Interval ci; // t interval
};

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, double alpha = 0.05);

double quantile(std::vector<double> v, double q);
double median(std::vector<double> v);

// Runs fn(i) for i < n on `workers` threads; fn must write only to slot i.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace treeperc
