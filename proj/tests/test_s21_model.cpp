#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include "cpwres/numerics.hpp"
#include "cpwres/s21_model.hpp"

namespace {

using namespace cpwres;
using s21::NotchParams;

NotchParams reference_params() {
    NotchParams p;
    p.fr_hz = 5.04e9;
    p.ql = 480.0;
    p.qc_mag = 1100.0;
    p.phi = 0.1;
    p.a = 0.98;
    p.alpha = 0.3;
    p.tau_s = 40e-9;
    return p;
}

TEST(NotchS21, OnResonanceDepth) {
    NotchParams p;
    p.fr_hz = 5e9;
    p.ql = 500.0;
    p.qc_mag = 1000.0;
    const auto v = s21::notch_s21(p, p.fr_hz);
    EXPECT_NEAR(v.real(), 0.5, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(NotchS21, FarDetunedBaseline) {
    auto p = reference_params();
    EXPECT_NEAR(std::abs(s21::notch_s21(p, 2.0 * p.fr_hz)), p.a, 1e-3);
    EXPECT_NEAR(std::abs(s21::notch_s21(p, 0.2 * p.fr_hz)), p.a, 1e-3);
}

TEST(NotchS21, FrozenReferenceValue) {
    // Independent complex evaluation (Python cmath), frozen.
    const auto v = s21::notch_s21(reference_params(), 5.04e9);
    EXPECT_NEAR(v.real(), -0.5111156600049463, 1e-12);
    EXPECT_NEAR(v.imag(), 0.21921157368734162, 1e-12);
}

TEST(NotchS21, EnvironmentPhaseDoesNotChangeMagnitude) {
    auto p = reference_params();
    auto q = p;
    q.alpha = -2.0;
    q.tau_s = 137e-9;
    for (double f = 4.9e9; f < 5.2e9; f += 1.3e6) {
        EXPECT_NEAR(std::abs(s21::notch_s21(p, f)), std::abs(s21::notch_s21(q, f)), 1e-14);
    }
}

TEST(NotchS21, NormalizedLocusIsCircleOfDiameterQlOverQc) {
    const auto p = reference_params();
    std::vector<std::complex<double>> pts;
    for (int i = -2000; i <= 2000; ++i) {
        const double f = p.fr_hz * (1.0 + i * 2e-5);
        pts.push_back(s21::notch_s21(p, f) / s21::environment(p, f));
    }
    const auto c = numerics::fit_circle(pts);
    EXPECT_NEAR(c.radius, p.ql / (2.0 * p.qc_mag), 1e-9);
    // The circle passes through 1 + 0i.
    EXPECT_NEAR(std::abs(std::complex<double>(1.0, 0.0) - c.center()), c.radius, 1e-9);
}

TEST(NotchS21, NormalizedOnResonanceValue) {
    const auto p = reference_params();
    const auto v = s21::notch_ideal(p, p.fr_hz);
    const auto expected = 1.0 - (p.ql / p.qc_mag) * std::polar(1.0, p.phi);
    EXPECT_NEAR(std::abs(v - expected), 0.0, 1e-15);
}

TEST(InternalQ, DiameterCorrected) {
    EXPECT_NEAR(s21::internal_q(480.0, 1100.0, 0.1), 848.3317739365268, 1e-9);
    EXPECT_NEAR(s21::internal_q(500.0, 1000.0, 0.0), 1000.0, 1e-9);
    EXPECT_THROW(s21::internal_q(1000.0, 500.0, 0.0), UnphysicalError);
}

TEST(SynthesizeTrace, NoiseFreeMatchesModel) {
    const auto p = reference_params();
    const auto t = s21::synthesize_trace(p, 5.0e9, 5.08e9, 101, 0.0, 1);
    ASSERT_EQ(t.size(), 101u);
    EXPECT_DOUBLE_EQ(t.frequencies_hz.front(), 5.0e9);
    EXPECT_DOUBLE_EQ(t.frequencies_hz.back(), 5.08e9);
    for (std::size_t j = 0; j < t.size(); ++j) EXPECT_EQ(t.s21[j], s21::notch_s21(p, t.frequencies_hz[j]));
    EXPECT_NO_THROW(t.validate(16));
}

TEST(SynthesizeTrace, DeterministicPerSeed) {
    const auto p = reference_params();
    const auto a = s21::synthesize_trace(p, 5.0e9, 5.08e9, 200, 0.01, 42);
    const auto b = s21::synthesize_trace(p, 5.0e9, 5.08e9, 200, 0.01, 42);
    const auto c = s21::synthesize_trace(p, 5.0e9, 5.08e9, 200, 0.01, 43);
    EXPECT_EQ(a.s21, b.s21);
    EXPECT_NE(a.s21, c.s21);
}

TEST(SynthesizeTrace, NoiseLevel) {
    const auto p = reference_params();
    const auto t = s21::synthesize_trace(p, 5.0e9, 5.08e9, 1001, 0.01, 9);
    double sum = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) sum += std::norm(t.s21[j] - s21::notch_s21(p, t.frequencies_hz[j]));
    const double rms = std::sqrt(sum / static_cast<double>(t.size()));
    EXPECT_NEAR(rms, 0.01 * std::sqrt(2.0), 0.1 * 0.01 * std::sqrt(2.0));
}

TEST(SynthesizeTrace, RejectsBadArguments) {
    const auto p = reference_params();
    EXPECT_THROW(s21::synthesize_trace(p, 5.1e9, 5.0e9, 100, 0.0, 1), DomainError);
    EXPECT_THROW(s21::synthesize_trace(p, 5.0e9, 5.1e9, 8, 0.0, 1), DomainError);
    EXPECT_THROW(s21::synthesize_trace(p, 5.0e9, 5.1e9, 100, -1.0, 1), DomainError);
}

TEST(NormalStream, StableAcrossRuns) {
    // Pins the documented generator (mt19937_64 + Box-Muller on 53-bit uniforms).
    s21::NormalStream a(2024);
    s21::NormalStream b(2024);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
    s21::NormalStream c(0);
    double mean = 0.0;
    double var = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = c();
        mean += x;
        var += x * x;
    }
    mean /= n;
    var = var / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(ComplexTrace, ValidateCatchesProblems) {
    s21::ComplexTrace t;
    t.frequencies_hz = {1.0, 2.0, 2.0};
    t.s21 = {1.0, 1.0, 1.0};
    EXPECT_THROW(t.validate(), DomainError);
    t.frequencies_hz = {1.0, 2.0, 3.0};
    t.s21 = {1.0, std::complex<double>(NAN, 0.0), 1.0};
    EXPECT_THROW(t.validate(), DomainError);
}

}  // namespace
