#include <doctest.h>

#include <cstdio>

#include <Eigen/SVD>

#include "faultrom/error.hpp"
#include "faultrom/rom_pod.hpp"
#include "fixtures.hpp"

using namespace faultrom;
using namespace faultrom::pod;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
    std::srand(seed);
    return Eigen::MatrixXd::Random(r, c);
}

/// Matrix with prescribed singular values and random singular vectors.
Eigen::MatrixXd with_spectrum(Eigen::Index r, const Eigen::VectorXd& s, unsigned seed) {
    const Eigen::Index c = s.size();
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(random_matrix(r, c, seed)), qb(random_matrix(c, c, seed + 1));
    const Eigen::MatrixXd A = qa.householderQ() * Eigen::MatrixXd::Identity(r, c);
    const Eigen::MatrixXd B = qb.householderQ() * Eigen::MatrixXd::Identity(c, c);
    return A * s.asDiagonal() * B.transpose();
}

}  // namespace

TEST_CASE("method of snapshots on small exact cases") {
    SUBCASE("identical columns have rank one") {
        Eigen::MatrixXd S(4, 3);
        S.col(0) << 1, 2, 3, 4;
        S.col(1) = S.col(0);
        S.col(2) = S.col(0);
        const auto svd = svd_snapshots(S);
        CHECK(svd.rank() == 1);
        CHECK(svd.sigma[0] == doctest::Approx(std::sqrt(3.0 * 30.0)));
    }
    SUBCASE("orthogonal columns") {
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(5, 3);
        S(0, 0) = 2;
        S(1, 1) = 3;
        S(4, 2) = -1;
        const auto svd = svd_snapshots(S);
        CHECK(svd.sigma[0] == doctest::Approx(3.0));
        CHECK(svd.sigma[1] == doctest::Approx(2.0));
        CHECK(svd.sigma[2] == doctest::Approx(1.0));
    }
    SUBCASE("wide matrices keep an orthonormal basis no larger than the row count") {
        // 6 rows, 80 columns: the Gram matrix has 74 zero eigenvalues that
        // come back as rounding noise.
        const Eigen::MatrixXd S = random_matrix(6, 80, 11);
        const auto svd = svd_snapshots(S);
        CHECK(svd.rank() == 6);
        const Eigen::MatrixXd G = svd.U.transpose() * svd.U;
        CHECK((G - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
        const auto b = truncate(svd, 10);
        CHECK(b.Phi.cols() == 6);
        CHECK(projection_error_sq(b, S) <= 1e-20 * S.squaredNorm());
    }
    SUBCASE("exact low rank with many snapshots") {
        const Eigen::MatrixXd S = random_matrix(40, 3, 12) * random_matrix(3, 300, 13);
        const auto svd = svd_snapshots(S);
        CHECK(svd.rank() == 3);
        // The null directions come back at the rounding level of S.
        CHECK(svd.sigma[3] <= 1e-12 * svd.sigma[0]);
    }
    SUBCASE("zero matrix") {
        const auto svd = svd_snapshots(Eigen::MatrixXd::Zero(3, 2));
        CHECK(svd.rank() == 0);
        CHECK(svd.sigma.isZero());
    }
}

TEST_CASE("method of snapshots against a direct SVD oracle") {
    for (unsigned t = 0; t < 20; ++t) {
        const Eigen::MatrixXd S = random_matrix(50, 20, 100 + t);
        const auto svd = svd_snapshots(S);
        Eigen::JacobiSVD<Eigen::MatrixXd> oracle(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
        CHECK((svd.sigma - oracle.singularValues()).cwiseAbs().maxCoeff() < 1e-8);
        const Eigen::MatrixXd rec = svd.U * svd.sigma.head(svd.rank()).asDiagonal() * svd.V.leftCols(svd.rank()).transpose();
        CHECK((S - rec).norm() <= 1e-8 * S.norm());
        CHECK((svd.U.transpose() * svd.U - Eigen::MatrixXd::Identity(svd.rank(), svd.rank())).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("truncation: Eckart-Young and monotone projection error") {
    Eigen::VectorXd s(30);
    for (int k = 0; k < 30; ++k) s[k] = std::pow(0.6, k);
    const Eigen::MatrixXd S = with_spectrum(80, s, 7);
    const auto svd = svd_snapshots(S);
    double previous = INFINITY;
    for (Eigen::Index n = 1; n <= svd.rank(); ++n) {
        PodBasis b = truncate(svd, n);
        const double lhs = projection_error_sq(b, S);
        const double rhs = s.tail(30 - n).squaredNorm();
        // Double arithmetic resolves the residual only down to about eps * ||S||^2.
        CHECK(std::abs(lhs - rhs) <= 1e-8 * rhs + 1e-15 * S.squaredNorm());
        if (rhs > 1e-6 * S.squaredNorm()) CHECK(std::abs(lhs - rhs) <= 1e-8 * rhs);
        CHECK(lhs <= previous * (1 + 1e-12));
        previous = lhs;
    }
    {
        // Tail far below eps sigma_1^2: sqrt of the Gram eigenvalues cannot resolve it.
        Eigen::VectorXd t(60);
        for (int k = 0; k < 60; ++k) t[k] = std::pow(10.0, -k / 6.0);
        const Eigen::MatrixXd T = with_spectrum(200, t, 21);
        const auto st = svd_snapshots(T);
        for (Eigen::Index n : {20, 45}) {
            const double rhs = t.tail(60 - n).squaredNorm();
            CHECK(std::abs(projection_error_sq(truncate(st, n), T) - rhs) <= 1e-8 * rhs);
            CHECK(std::abs(st.sigma.tail(60 - n).squaredNorm() - rhs) <= 1e-8 * rhs);
        }
    }
    const auto full = truncate(svd, svd.rank());
    CHECK(projection_error_sq(full, S) <= 1e-20 * S.squaredNorm());
    CHECK(truncate(svd, 500).n() == svd.rank());
    CHECK_THROWS_AS(truncate(svd, 0), ConfigError);

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(6, 4);
    R.col(0).setConstant(1.0);
    R.col(2).setConstant(-2.0);
    const auto r1 = truncate(svd_snapshots(R), 1);
    CHECK(projection_error_sq(r1, R) < 1e-24);
}

TEST_CASE("block POD") {
    const Eigen::MatrixXd S = random_matrix(30, 12, 3);
    SUBCASE("single block equals monolithic POD") {
        mesh::DofLayout L{0, 30, 30, 30};
        const auto a = block_pod(S, L, 5), b = monolithic_pod(S, 5, L);
        CHECK((a.Phi * a.Phi.transpose() - b.Phi * b.Phi.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("three blocks give an orthonormal block-diagonal basis") {
        mesh::DofLayout L{0, 15, 21, 30};
        const auto b = block_pod(S, L, 4);
        CHECK(b.n() == 12);
        CHECK((b.Phi.transpose() * b.Phi - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(b.Phi.block(0, 4, 15, 8).isZero());
        CHECK(b.Phi.block(15, 0, 6, 4).isZero());
        CHECK(b.sigma.size() == 3);
        for (const auto& sg : b.sigma)
            for (Eigen::Index k = 1; k < sg.size(); ++k) CHECK(sg[k] <= sg[k - 1]);
    }
}

TEST_CASE("Galerkin online query") {
    const auto space = fixtures::toy_space();
    const auto builder = fixtures::toy_builder();
    snap::GenerateOptions opt;
    opt.seed = 8;
    const auto set = snap::generate(space, builder, {30, 0, 5}, opt);
    const auto train = set.columns(snap::Split::Train);

    SUBCASE("square orthogonal basis reproduces the full-order solution") {
        const auto N = static_cast<Eigen::Index>(set.layout.total);
        PodBasis b;
        b.Phi = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(N, N, 5)).householderQ();
        b.layout = set.layout;
        const Eigen::VectorXd mu = set.params.row(0).transpose();
        const auto r = online_query(mu, b, builder);
        const auto pb = builder(mu);
        const auto ref = fom::solve(pb.mesh, pb.params, pb.bc);
        CHECK((r.u - ref.u).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("training points are reproduced with the full rank basis") {
        const auto b = monolithic_pod(train, train.cols(), set.layout);
        const auto idx = set.indices(snap::Split::Train);
        for (int j : {idx[0], idx[3]}) {
            const auto r = online_query(set.params.row(j).transpose(), b, builder);
            CHECK((r.u - set.S.col(j)).norm() <= 1e-6 * set.S.col(j).norm());
            CHECK(r.galerkin_residual <= 1e-9);
        }
    }
    SUBCASE("test error decreases with more modes") {
        const auto test = set.indices(snap::Split::Test);
        auto err = [&](Eigen::Index n) {
            const auto b = monolithic_pod(train, n, set.layout);
            double e = 0;
            for (int j : test) e += (online_query(set.params.row(j).transpose(), b, builder).u - set.S.col(j)).norm() / set.S.col(j).norm();
            return e / test.size();
        };
        CHECK(err(6) < err(1));
    }
}

TEST_CASE("basis files round trip") {
    mesh::DofLayout L{0, 15, 21, 30};
    const auto b = block_pod(random_matrix(30, 10, 9), L, 3);
    const std::string path = "test_pod_roundtrip.podb";
    save(b, path);
    const auto back = load(path);
    CHECK(back.Phi == b.Phi);
    CHECK(back.mode == Mode::Block);
    CHECK(back.sigma.size() == 3);
    CHECK(back.sigma[2] == b.sigma[2]);
    CHECK(back.layout.lambda == 21);
    std::remove(path.c_str());
}
