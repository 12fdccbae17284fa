#include <doctest.h>

#include <g3dgen/geometry.hpp>
#include <g3dgen/rng.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace g3dgen;

TEST_CASE("default vocabulary lays out codes in order") {
    TypeVocabulary v;
    CHECK(v.n_elements() == 5);
    CHECK(v.n_predictable() == 6);
    CHECK(v.n_codes() == 8);
    CHECK(v.stop_code() == 5);
    CHECK(v.focus_code() == 6);
    CHECK(v.origin_code() == 7);
    CHECK(v.element_code("H") == 0);
    CHECK(v.element_code("F") == 4);
    CHECK(v.code_name(5) == "stop");
    CHECK(v.code_name(6) == "focus");
    CHECK(v.code_name(7) == "origin");
    CHECK(v.is_predictable(0));
    CHECK(v.is_predictable(5));
    CHECK_FALSE(v.is_predictable(6));
    CHECK(v.is_token(6));
    CHECK(v.is_token(7));
    CHECK_FALSE(v.is_token(5));
    CHECK(v.is_element(4));
    CHECK_FALSE(v.is_element(5));
    CHECK(v.use_origin_token());
}

TEST_CASE("vocabulary without origin token keeps the full code layout") {
    TypeVocabulary v({"H", "C"}, false);
    CHECK(v.n_elements() == 2);
    CHECK(v.stop_code() == 2);
    CHECK(v.focus_code() == 3);
    CHECK(v.origin_code() == 4);
    CHECK(v.n_codes() == 5);
    CHECK_FALSE(v.use_origin_token());
    CHECK(v.is_token(v.origin_code()));
}

TEST_CASE("vocabulary rejects bad element lists") {
    CHECK_THROWS_AS(TypeVocabulary({}, true), std::invalid_argument);
    CHECK_THROWS_AS(TypeVocabulary({"H", "H"}, true), std::invalid_argument);
    CHECK_THROWS_AS(TypeVocabulary({"H", "Xx"}, true), std::invalid_argument);
    TypeVocabulary v;
    CHECK_THROWS_AS((void)v.element_code("Q"), std::invalid_argument);
}

TEST_CASE("point set validation separates tokens from atoms") {
    TypeVocabulary v;
    PointSet ps;
    ps.token_count = 2;
    ps.positions = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)};
    ps.types = {v.focus_code(), v.origin_code(), v.element_code("C")};
    CHECK_NOTHROW(ps.validate(v));
    CHECK(ps.atom_count() == 1);

    PointSet bad = ps;
    bad.types[2] = v.focus_code();
    CHECK_THROWS_AS(bad.validate(v), std::invalid_argument);

    bad = ps;
    bad.types[0] = v.element_code("H");
    CHECK_THROWS_AS(bad.validate(v), std::invalid_argument);

    bad = ps;
    bad.types[2] = v.stop_code();
    CHECK_THROWS_AS(bad.validate(v), std::invalid_argument);

    bad = ps;
    bad.types.pop_back();
    CHECK_THROWS_AS(bad.validate(v), std::invalid_argument);
}

TEST_CASE("distance bins cover the configured range") {
    DistanceBinSpec bins;
    CHECK(bins.n_bins == 300);
    CHECK(bins.bin_width == doctest::Approx(0.05));
    CHECK(bins.center(0) == doctest::Approx(0.025));
    CHECK(bins.center(299) == doctest::Approx(14.975));
    CHECK(bins.range() == doctest::Approx(15.0));
}

TEST_CASE("nearest_bin matches exhaustive search") {
    DistanceBinSpec bins;
    CHECK(nearest_bin(1.5, bins) == 29);
    CHECK(nearest_bin(0.0, bins) == 0);
    CHECK(nearest_bin(0.074, bins) == 1);
    CHECK(nearest_bin(100.0, bins) == 299);
    CHECK(nearest_bin(-5.0, bins) == 0);

    RngStream r(101);
    for (int t = 0; t < 2000; ++t) {
        double d = r.uniform_range(0.0, 16.0);
        int best = 0;
        double best_err = std::abs(d - bins.center(0));
        for (int l = 1; l < bins.n_bins; ++l) {
            double err = std::abs(d - bins.center(l));
            if (err < best_err) {
                best_err = err;
                best = l;
            }
        }
        CHECK(nearest_bin(d, bins) == best);
    }
}

TEST_CASE("candidate grid has an odd cube of cells") {
    CandidateGrid g = build_candidate_grid(Vec3(0, 0, 0), 1.7, 0.05);
    CHECK(g.half == 34);
    CHECK(g.cells_per_axis() == 69);
    CHECK(g.n_cells() == 328509);

    CandidateGrid tiny = build_candidate_grid(Vec3(0, 0, 0), 0.1, 0.05);
    CHECK(tiny.n_cells() == 125);

    CandidateGrid one = build_candidate_grid(Vec3(0, 0, 0), 0.04, 0.05);
    CHECK(one.n_cells() == 1);
}

TEST_CASE("cell positions are centered on the grid center") {
    Vec3 c(1.0, -2.0, 0.5);
    CandidateGrid g = build_candidate_grid(c, 0.2, 0.1);
    REQUIRE(g.half == 2);
    int a = g.cells_per_axis();
    int mid = g.half * (a * a) + g.half * a + g.half;
    CHECK((g.cell_position(mid) - c).norm() == doctest::Approx(0.0));
    Vec3 corner = g.cell_position(0);
    CHECK((corner - (c - Vec3(0.2, 0.2, 0.2))).norm() == doctest::Approx(0.0));
    Vec3 last = g.cell_position(g.n_cells() - 1);
    CHECK((last - (c + Vec3(0.2, 0.2, 0.2))).norm() == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)g.cell_position(g.n_cells()), std::out_of_range);
    CHECK_THROWS_AS((void)g.cell_position(-1), std::out_of_range);
}

TEST_CASE("grid orientation rotates cell offsets") {
    Vec3 c(0.3, 0.1, -0.4);
    double angle = 0.7;
    Mat3 rot;
    rot = Eigen::AngleAxisd(angle, Vec3(1, 2, 2).normalized()).toRotationMatrix();
    CandidateGrid axis = build_candidate_grid(c, 0.3, 0.1);
    CandidateGrid turned = axis;
    turned.orientation = rot;
    for (int i = 0; i < axis.n_cells(); i += 7) {
        Vec3 off = axis.cell_position(i) - c;
        Vec3 expect = c + rot * off;
        CHECK((turned.cell_position(i) - expect).norm() < 1e-12);
    }
}

TEST_CASE("pairwise distances are symmetric with zero diagonal") {
    PointSet ps;
    ps.token_count = 0;
    ps.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0)};
    ps.types = {0, 1, 2};
    Matrix d = pairwise_distances(ps);
    REQUIRE(d.rows() == 3);
    REQUIRE(d.cols() == 3);
    for (int i = 0; i < 3; ++i) CHECK(d(i, i) == 0.0);
    CHECK(d(0, 1) == doctest::Approx(1.0));
    CHECK(d(1, 0) == doctest::Approx(1.0));
    CHECK(d(1, 2) == doctest::Approx(std::sqrt(5.0)));
    CHECK(d(0, 2) == doctest::Approx(2.0));
}

TEST_CASE("radial basis peaks at its centers and dies off range") {
    RadialBasis rb;
    CHECK(rb.n == 25);
    Eigen::VectorXd at0 = rbf_expand(0.0, rb);
    REQUIRE(at0.size() == 25);
    CHECK(at0(0) == doctest::Approx(1.0));
    CHECK(at0(1) == doctest::Approx(std::exp(-0.5)));
    double spacing = rb.spacing();
    Eigen::VectorXd mid = rbf_expand(5.0 * spacing, rb);
    CHECK(mid(5) == doctest::Approx(1.0));
    Eigen::VectorXd far = rbf_expand(25.0, rb);
    CHECK(far.maxCoeff() < 1e-10);
    CHECK(far.maxCoeff() == doctest::Approx(3.78e-282).epsilon(0.01));
}

TEST_CASE("kabsch rmsd is zero under rigid motion") {
    RngStream r(55);
    std::vector<Vec3> a;
    for (int i = 0; i < 8; ++i) a.emplace_back(r.normal(), r.normal(), r.normal());
    Mat3 rot = Eigen::AngleAxisd(1.1, Vec3(0.3, -1.0, 0.7).normalized()).toRotationMatrix();
    Vec3 t(4.0, -1.0, 2.5);
    std::vector<Vec3> b;
    for (const Vec3& p : a) b.push_back(rot * p + t);
    CHECK(kabsch_rmsd(a, b) < 1e-9);
    CHECK(kabsch_rmsd(a, a) < 1e-12);
}

TEST_CASE("kabsch rmsd matches a hand-computed stretch") {
    std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
    std::vector<Vec3> b = {Vec3(0, 0, 0), Vec3(1.8, 0, 0)};
    CHECK(kabsch_rmsd(a, b) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("kabsch uses proper rotations only") {
    // Chiral four-point set: its mirror image cannot be superposed by rotation.
    std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)};
    std::vector<Vec3> b = a;
    for (Vec3& p : b) p.z() = -p.z();
    CHECK(kabsch_rmsd(a, b) > 0.1);
}

TEST_CASE("kabsch on point sets requires matching type sequences") {
    TypeVocabulary v;
    PointSet a, b;
    a.token_count = 0;
    a.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    a.types = {0, 1};
    b = a;
    CHECK(kabsch_rmsd(a, b) < 1e-12);
    b.types = {1, 0};
    CHECK_THROWS_AS((void)kabsch_rmsd(a, b), std::invalid_argument);
}
