#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pdesift/differentiation.hpp"

using namespace pdesift;

namespace {

GridSpec line(std::size_t n, double h)
{
    GridSpec g;
    g.nx = n;
    g.nt = 3; // the smallest valid grid; only snapshot 0 is used
    g.dx = h;
    g.dt = 1.0;
    g.x0 = -0.5 * h * static_cast<double>(n - 1);
    return g;
}

Field sample(const GridSpec& g, const std::function<double(double)>& f)
{
    Field out(g);
    for (std::size_t i = 0; i < g.nx; ++i) out.values()[i] = f(g.x(i));
    return out;
}

// d^order/dx^order of x^p
double monomial_derivative(int p, int order, double x)
{
    if (order > p) return 0.0;
    double c = 1.0;
    for (int q = 0; q < order; ++q) c *= p - q;
    return c * std::pow(x, p - order);
}

double rms(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

TEST(Fornberg, ClassicalWeights)
{
    const std::vector<double> nodes{-1.0, 0.0, 1.0};
    const auto d1 = fornberg_weights(0.0, nodes, 1);
    EXPECT_DOUBLE_EQ(d1[0], -0.5);
    EXPECT_DOUBLE_EQ(d1[1], 0.0);
    EXPECT_DOUBLE_EQ(d1[2], 0.5);
    const auto d2 = fornberg_weights(0.0, nodes, 2);
    EXPECT_DOUBLE_EQ(d2[0], 1.0);
    EXPECT_DOUBLE_EQ(d2[1], -2.0);
    EXPECT_DOUBLE_EQ(d2[2], 1.0);
    const std::vector<double> five{-2.0, -1.0, 0.0, 1.0, 2.0};
    const auto d4 = fornberg_weights(0.0, five, 4);
    const double expect4[] = {1.0, -4.0, 6.0, -4.0, 1.0};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(d4[static_cast<std::size_t>(i)], expect4[i], 1e-12);
}

// Central second-order stencils are exact on polynomials up to degree order+1,
// one-sided end stencils (order+2 points) likewise.
TEST(CentralFD2, ExactOnLowDegreePolynomials)
{
    const GridSpec g = line(21, 0.1);
    for (int order = 1; order <= 6; ++order) {
        for (int p = 0; p <= order + 1; ++p) {
            const Field f = sample(g, [p](double x) { return std::pow(x, p); });
            const Field d = fd_derivative(f, {Axis::x, order, DerivMethod::CentralFD2});
            double scale = 1.0;
            for (std::size_t i = 0; i < g.nx; ++i) scale = std::max(scale, std::abs(monomial_derivative(p, order, g.x(i))));
            for (std::size_t i = 0; i < g.nx; ++i)
                EXPECT_NEAR(d(0, i), monomial_derivative(p, order, g.x(i)), 1e-9 * scale * std::pow(10.0, order))
                    << "order " << order << " degree " << p << " at " << i;
        }
    }
}

TEST(CentralFD2, ExactToRoundingOnInteriorQuadratic)
{
    const GridSpec g = line(11, 0.25);
    const Field f = sample(g, [](double x) { return 3.0 * x * x - x + 2.0; });
    const Field d1 = fd_derivative(f, {Axis::x, 1, DerivMethod::CentralFD2});
    const Field d2 = fd_derivative(f, {Axis::x, 2, DerivMethod::CentralFD2});
    for (std::size_t i = 0; i < g.nx; ++i) {
        EXPECT_NEAR(d1(0, i), 6.0 * g.x(i) - 1.0, 1e-13);
        EXPECT_NEAR(d2(0, i), 6.0, 1e-12);
    }
}

TEST(PolyInterp, ExactOnPolynomialsUpToItsDegree)
{
    const GridSpec g = line(31, 0.05);
    for (int degree : {3, 4, 5}) {
        for (int order = 1; order <= degree; ++order) {
            for (int p = 0; p <= degree; ++p) {
                const Field f = sample(g, [p](double x) { return std::pow(x, p); });
                const auto d = poly_derivative(f, {Axis::x, order, DerivMethod::PolyInterp, degree, 11});
                for (std::size_t i = 0; i < g.nx; ++i)
                    EXPECT_NEAR(d.values(0, i), monomial_derivative(p, order, g.x(i)), 1e-9 * std::pow(20.0, order))
                        << "degree " << degree << " order " << order << " p " << p;
            }
        }
    }
}

TEST(PolyInterp, BoundaryMaskMarksShiftedWindows)
{
    const GridSpec g = line(20, 0.1);
    const Field f = sample(g, [](double x) { return x; });
    const auto d = poly_derivative(f, {Axis::x, 1, DerivMethod::PolyInterp, 3, 7});
    for (std::size_t i = 0; i < g.nx; ++i) EXPECT_EQ(d.boundary_mask[i], (i < 3 || i >= 17) ? 1 : 0);
}

TEST(PolyInterp, BeatsFiniteDifferencesOnNoisySine)
{
    const GridSpec g = line(201, 0.005);
    const Field clean = sample(g, [](double x) { return std::sin(2.0 * std::numbers::pi * x); });
    Field noisy = clean;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 0.02 * sample_stddev(clean.values()));
    for (double& v : noisy.values()) v += normal(rng);
    const Field fd = fd_derivative(noisy, {Axis::x, 1, DerivMethod::CentralFD2});
    const auto pi = poly_derivative(noisy, {Axis::x, 1, DerivMethod::PolyInterp, 4, 11});
    std::vector<double> e_fd, e_pi;
    for (std::size_t i = 5; i + 5 < g.nx; ++i) {
        const double truth = 2.0 * std::numbers::pi * std::cos(2.0 * std::numbers::pi * g.x(i));
        e_fd.push_back(fd(0, i) - truth);
        e_pi.push_back(pi.values(0, i) - truth);
    }
    EXPECT_LT(rms(e_pi), rms(e_fd));
}

// White noise through the order-d stencil has standard deviation eps * ||w_d||,
// and ||w_d|| ~ h^-d, so consecutive orders differ by about 1/h.
TEST(CentralFD2, NoiseAmplificationGrowsLikeInverseSpacing)
{
    const double h = 0.01, eps = 1e-3;
    const GridSpec g = line(20001, h);
    Field noise(g);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, eps);
    for (double& v : noise.values()) v += normal(rng);
    std::vector<double> amp;
    for (int order = 1; order <= 3; ++order) {
        const Field d = fd_derivative(noise, {Axis::x, order, DerivMethod::CentralFD2});
        std::vector<double> interior(d.values().begin() + 10, d.values().end() - 10);
        amp.push_back(rms(interior) / eps);
    }
    for (std::size_t d = 0; d + 1 < amp.size(); ++d) {
        const double ratio = amp[d + 1] / amp[d];
        EXPECT_GT(ratio, 0.2 / h) << "orders " << d + 1 << "->" << d + 2;
        EXPECT_LT(ratio, 5.0 / h) << "orders " << d + 1 << "->" << d + 2;
    }
    // the measured amplification matches the stencil norm
    EXPECT_NEAR(amp[0], std::sqrt(0.5) / h, 0.02 / h);
}

TEST(Differentiation, RejectsBadSpecs)
{
    const GridSpec g = line(9, 0.1);
    const Field f = sample(g, [](double x) { return x; });
    EXPECT_THROW(poly_derivative(f, {Axis::x, 1, DerivMethod::PolyInterp, 4, 4}), Error);
    EXPECT_THROW(poly_derivative(f, {Axis::x, 1, DerivMethod::PolyInterp, 4, 10}), Error);
    EXPECT_THROW(poly_derivative(f, {Axis::x, 5, DerivMethod::PolyInterp, 4, 7}), Error);
    try {
        poly_derivative(f, {Axis::x, 1, DerivMethod::PolyInterp, 4, 11});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::WindowTooLarge);
    }
    EXPECT_THROW(fd_derivative(f, {Axis::y, 1, DerivMethod::CentralFD2}), Error);
    EXPECT_THROW(fd_derivative(f, {Axis::x, 1, DerivMethod::PolyInterp}), Error);
}
