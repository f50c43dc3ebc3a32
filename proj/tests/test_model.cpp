#include "doctest.h"

#include "nefep/model.hpp"
#include "nefep/rng.hpp"
#include "nefep/sde_rc.hpp"

#include <random>

using namespace nefep;

TEST_CASE("example 1 potential values") {
    CHECK(Example1Potential::eval(-1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(Example1Potential::eval(0.0, 1.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(Example1Potential::eval(1.0, 0.5) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("eval_potential rejects non-finite energies") {
    auto bad = make_potential_model(1, 1, [](const Vec& x, const Vec&) {
        return x[0] > 0.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    });
    Vec x(1), lam(1);
    x[0] = -1.0;
    lam[0] = 0.0;
    CHECK(eval_potential(bad, x, lam) == 0.0);
    x[0] = 1.0;
    CHECK_THROWS_AS(eval_potential(bad, x, lam), NumericsError);
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(-2.5, 2.5), ul(0.0, 1.0);

    SUBCASE("example 1, d/dx and d/dlambda") {
        for (int i = 0; i < 200; ++i) {
            const double x = ux(rng), lam = ul(rng);
            const double gx = Example1Potential::grad_x_value(x, lam);
            const double fd =
                fd_derivative([lam](double xx) { return Example1Potential::eval(xx, lam); }, x);
            CHECK(gx == doctest::Approx(fd).epsilon(1e-5));
            const double gl = Example1Potential::grad_lambda_value(x, lam);
            const double fdl =
                fd_derivative([x](double ll) { return Example1Potential::eval(x, ll); }, lam);
            CHECK(gl == doctest::Approx(fdl).epsilon(1e-5));
        }
    }

    SUBCASE("example 2 gradient") {
        Example2Potential pot{Example2Params{}};
        std::uniform_real_distribution<double> uth(0.3, 1.5), ur(4.0, 6.0), uy3(4.0, 6.0);
        for (int i = 0; i < 200; ++i) {
            const double th = uth(rng), r = ur(rng);
            Eigen::Vector3d y(r * std::cos(th), r * std::sin(th), uy3(rng));
            Eigen::Vector3d g;
            pot.grad(y, g);
            for (int j = 0; j < 3; ++j) {
                Eigen::Vector3d yp = y, ym = y;
                yp[j] += kFdStep;
                ym[j] -= kFdStep;
                const double fd = (pot.eval(yp) - pot.eval(ym)) / (2.0 * kFdStep);
                CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }

    SUBCASE("fd fallback of make_potential_model agrees with analytic example 1") {
        auto m_fd = make_potential_model(1, 1, [](const Vec& x, const Vec& l) {
            return Example1Potential::eval(x[0], l[0]);
        });
        Vec x(1), lam(1), g(1);
        for (int i = 0; i < 50; ++i) {
            x[0] = ux(rng);
            lam[0] = ul(rng);
            m_fd.grad_x(x, lam, g);
            CHECK(g[0] ==
                  doctest::Approx(Example1Potential::grad_x_value(x[0], lam[0])).epsilon(1e-5));
        }
    }
}

TEST_CASE("protocol ODE consistency and reversal") {
    LinearProtocol p;
    double lam0, lam1, f;
    for (double t : {0.1, 0.33, 0.77}) {
        const double h = 1e-4;
        p.value(t, lam0);
        p.value(t + h, lam1);
        p.rate(lam0, t, f);
        CHECK(lam1 - lam0 == doctest::Approx(f * h).epsilon(1e-8));
    }
    // clamped outside [0, 1]
    p.value(1.7, lam0);
    CHECK(lam0 == 1.0);

    Protocol erased = linear_protocol_erased();
    Protocol rev = erased.reversed();
    Vec l(1), fr(1);
    rev.value(0.25, l);
    CHECK(l[0] == doctest::Approx(0.75));
    rev.rate(l, 0.25, fr);
    CHECK(fr[0] == doctest::Approx(-1.0));
}

TEST_CASE("build_projection on example 2 geometry") {
    AngleRC rc;
    ReactionCoordinate erc = rc.erased();

    SUBCASE("explicit P and Psi at y=(1,0,y3)") {
        Vec y(3);
        y << 1.0, 0.0, 4.7;
        auto parts = build_projection(erc, y);
        Mat expect(3, 3);
        expect << 1, 0, 0, 0, 0, 0, 0, 0, 1;
        CHECK((parts.P - expect).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK(parts.Psi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("Psi = 1/(y1^2+y2^2) at y=(0,2,y3)") {
        Vec y(3);
        y << 0.0, 2.0, 5.0;
        auto parts = build_projection(erc, y);
        CHECK(parts.Psi(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("div Pa equals (y1/r2, y2/r2, 0)") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> uth(0.3, 1.3), ur(4.0, 6.0);
        for (int i = 0; i < 20; ++i) {
            const double th = uth(rng), r = ur(rng);
            Vec y(3);
            y << r * std::cos(th), r * std::sin(th), 5.0;
            auto parts = build_projection(erc, y);
            const double r2 = y[0] * y[0] + y[1] * y[1];
            CHECK(parts.div_Pa[0] == doctest::Approx(y[0] / r2).epsilon(1e-4));
            CHECK(parts.div_Pa[1] == doctest::Approx(y[1] / r2).epsilon(1e-4));
            CHECK(parts.div_Pa[2] == doctest::Approx(0.0).epsilon(1e-4));
        }
    }

    SUBCASE("geometric identities on 1000 random level-set points") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> uth(0.25, 1.55), ur(3.0, 7.0), uy3(3.0, 7.0);
        Mat g(3, 1);
        for (int i = 0; i < 1000; ++i) {
            const double th = uth(rng), r = ur(rng);
            Vec y(3);
            y << r * std::cos(th), r * std::sin(th), uy3(rng);
            auto parts = build_projection(erc, y);
            CHECK((parts.P * parts.P - parts.P).lpNorm<Eigen::Infinity>() < 1e-10);
            erc.grad_xi(y, g);
            CHECK((parts.P.transpose() * g).lpNorm<Eigen::Infinity>() < 1e-10);
            CHECK(parts.Psi(0, 0) > 0.0);
        }
    }

    SUBCASE("singular geometry is rejected with a diagnostic") {
        // xi with vanishing gradient at the probe point
        auto flat = make_fd_reaction_coordinate(2, 1, [](const Vec& y, Vec& z) {
            z.resize(1);
            z[0] = y[0] * y[0];
        });
        Vec y(2);
        y << 0.0, 1.0;
        CHECK_THROWS_AS(build_projection(flat, y), GeometryError);
    }
}

TEST_CASE("work divergence term of example 2 vanishes identically") {
    // div(Psi^-1 a grad_xi) = d(-y2)/dy1 + d(y1)/dy2 = 0; checked through the
    // generic finite-difference route on random points
    AngleRC rc;
    ReactionCoordinate erc = rc.erased();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uth(0.3, 1.4), ur(4.0, 6.0);
    Vec dh(1);
    for (int i = 0; i < 25; ++i) {
        const double th = uth(rng), r = ur(rng);
        Vec y(3);
        y << r * std::cos(th), r * std::sin(th), 5.0;
        erc.div_h(y, dh);
        CHECK(std::abs(dh[0]) < 1e-5);
    }
}

TEST_CASE("example 2 state helpers") {
    Example2Params p;
    Example2Potential pot{p};
    SUBCASE("reaction coordinate fields r_BC, r_AB, theta") {
        Eigen::Vector3d y(3.0, 4.0, -2.0);
        CHECK(std::hypot(y[0], y[1]) == doctest::Approx(5.0));
        CHECK(std::abs(y[2]) == doctest::Approx(2.0));
        CHECK(pot.theta_of(y) == doctest::Approx(std::atan2(4.0, 3.0)));
    }
    SUBCASE("angle guard rejects the singular set only") {
        CHECK_THROWS_AS(pot.theta_of({0.0, 0.0, 5.0}), GeometryError);
        CHECK_THROWS_AS(pot.theta_of({-1.0, 0.0, 5.0}), GeometryError);
        // theta slightly past pi/2 (y1 < 0) stays well-defined
        CHECK(pot.theta_of({-1e-4, 5.0, 5.0}) == doctest::Approx(M_PI / 2 + 2e-5).epsilon(1e-3));
    }
    SUBCASE("seed point lies on the level set with relaxed bonds") {
        const double th = M_PI / 6.0;
        auto y = pot.seed_point(th);
        CHECK(pot.theta_of(y) == doctest::Approx(th).epsilon(1e-12));
        Eigen::Vector3d g;
        pot.grad(y, g);
        // radial and y3 forces vanish at the seed
        CHECK(std::abs(g[2]) < 1e-12);
    }
}

TEST_CASE("example 1 ansatz bases") {
    SUBCASE("gaussian basis endpoints") {
        auto b = make_ansatz_example1(Ex1AnsatzKind::Gaussian);
        REQUIRE(b.size_k == 2);
        Vec x(1), phi(1);
        x[0] = 0.0;
        b.phi(0, x, 0.0, phi);
        CHECK(phi[0] == doctest::Approx(0.0).epsilon(1e-14));  // odd derivative at center
        x[0] = 1.0;
        b.phi(0, x, 1.0, phi);
        CHECK(phi[0] == doctest::Approx(0.0).epsilon(1e-14));  // (1-t) damping
    }
    SUBCASE("piecewise-linear partition of unity at t=0") {
        auto b = make_ansatz_example1(Ex1AnsatzKind::PiecewiseLinear);
        REQUIRE(b.size_k == 30);
        Vec x(1), phi(1);
        x[0] = 0.0;
        int nonzero = 0;
        for (int l = 0; l < b.size_k; ++l) {
            b.phi(l, x, 0.0, phi);
            if (phi[0] != 0.0) {
                ++nonzero;
                CHECK(phi[0] == doctest::Approx(1.0));
            }
        }
        CHECK(nonzero == 1);
    }
    SUBCASE("bases are bounded on the simulation domain") {
        Vec lo(1), hi(1);
        lo[0] = -5.0;
        hi[0] = 5.0;
        for (auto kind : {Ex1AnsatzKind::PiecewiseLinear, Ex1AnsatzKind::Gaussian}) {
            auto b = make_ansatz_example1(kind);
            CHECK(b.bounded_on(lo, hi, 1.0, 2.0));
        }
    }
    SUBCASE("fast bases agree with the erased view") {
        PiecewiseLinearBasis1D pl;
        GaussianDerivBasis1D gb;
        auto bp = make_ansatz_example1(Ex1AnsatzKind::PiecewiseLinear);
        auto bg = make_ansatz_example1(Ex1AnsatzKind::Gaussian);
        Vec x(1), phi(1);
        std::mt19937_64 rng(19);
        std::uniform_real_distribution<double> ux(-2.0, 2.0), ut(0.0, 1.0);
        for (int i = 0; i < 100; ++i) {
            x[0] = ux(rng);
            const double t = ut(rng);
            for (int l = 0; l < 30; ++l) {
                bp.phi(l, x, t, phi);
                CHECK(phi[0] == doctest::Approx(pl.phi(l, x[0], t)).epsilon(1e-14));
            }
            for (int l = 0; l < 2; ++l) {
                bg.phi(l, x, t, phi);
                CHECK(phi[0] == doctest::Approx(gb.phi(l, x[0], t)).epsilon(1e-14));
            }
        }
    }
}
