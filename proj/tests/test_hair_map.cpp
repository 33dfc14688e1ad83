// SPDX-License-Identifier: Apache-2.0
#include "hairkit/hair_map.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

using namespace hairkit;
using namespace hairkit::testing;

namespace {

HeadModel test_head() {
    HeadModel head;
    head.radii = Eigen::Vector3d(0.08, 0.095, 0.11);
    return head;
}

/// Root-local strands growing along +z with mild lateral waves.
std::vector<Strand> rooted_corpus(unsigned seed, int count, int length) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Strand> corpus(count);
    for (auto& s : corpus) {
        s.points.resize(length);
        const double amp = 0.01 * unit(rng);
        const double freq = 1.0 + 2.0 * unit(rng);
        const double len = 0.1 + 0.1 * unit(rng);
        for (int j = 0; j < length; ++j) {
            const double t = static_cast<double>(j) / (length - 1);
            s.points[j] = Eigen::Vector3d(amp * std::sin(freq * 6.28 * t) * t,
                                          amp * std::cos(freq * 6.28 * t) * t, len * t);
        }
    }
    return corpus;
}

StrandBasis test_basis(int length = 24, int components = 8) {
    return fit_basis(rooted_corpus(71, 200, length), components, 64);
}

}  // namespace

TEST_CASE("decode_map basics") {
    const StrandBasis basis = test_basis();
    const HeadModel head = test_head();
    const RootGrid roots = RootGrid::from_head(head, 8, 8);

    SUBCASE("all-bald map decodes to zero active strands") {
        PcaHairMap map(8, 8, basis.num_components());
        const HairMap hair = decode_map(map, basis, roots);
        CHECK(hair.active_count() == 0);
    }
    SUBCASE("single active texel carries the mean strand at its root") {
        PcaHairMap map(8, 8, basis.num_components());
        map.baldness[map.index(3, 4)] = 1.0;
        const HairMap hair = decode_map(map, basis, roots);
        CHECK(hair.active_count() == 1);
        REQUIRE(hair.active[map.index(3, 4)]);
        const Strand& s = hair.strands[map.index(3, 4)];
        const Strand mean = idft_strand(unflatten_frequency(basis.mean), basis.length);
        const Eigen::Matrix3d& frame = roots.frames[map.index(3, 4)];
        const Eigen::Vector3d& root = roots.positions[map.index(3, 4)];
        for (int j = 0; j < basis.length; ++j) {
            const Eigen::Vector3d expect = frame * mean.points[j] + root;
            CHECK((s.points[j] - expect).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("random map equals the scalar-loop oracle") {
        std::mt19937 rng(77);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) {
            map.baldness[t] = (t % 3 == 0) ? 1.0 : 0.0;
            for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = gauss(rng);
        }
        const HairMap hair = decode_map(map, basis, roots);
        for (int t = 0; t < map.texels(); ++t) {
            if (map.baldness[t] < 0.5) {
                CHECK(!hair.active[t]);
                continue;
            }
            // Unvectorized per-texel reference via decode_strand.
            StrandCoefficients g;
            g.gamma = map.coeffs.row(t).transpose();
            const Strand local = decode_strand(g, basis);
            for (int j = 0; j < basis.length; ++j) {
                const Eigen::Vector3d expect =
                    roots.frames[t] * local.points[j] + roots.positions[t];
                CHECK((hair.strands[t].points[j] - expect).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
    SUBCASE("root anchoring of decoded strands") {
        std::mt19937 rng(78);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) {
            map.baldness[t] = 1.0;
            for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = gauss(rng);
        }
        const HairMap hair = decode_map(map, basis, roots);
        for (int t = 0; t < map.texels(); ++t)
            CHECK((hair.strands[t].points[0] - roots.positions[t]).norm() < 1e-6);
    }
    SUBCASE("per-texel affine superposition") {
        std::mt19937 rng(79);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap a(4, 4, basis.num_components()), b(4, 4, basis.num_components());
        const RootGrid small = RootGrid::from_head(head, 4, 4);
        for (int t = 0; t < a.texels(); ++t) {
            a.baldness[t] = b.baldness[t] = 1.0;
            for (int c = 0; c < a.num_components(); ++c) {
                a.coeffs(t, c) = gauss(rng);
                b.coeffs(t, c) = gauss(rng);
            }
        }
        PcaHairMap mid = a;
        mid.coeffs = 0.5 * (a.coeffs + b.coeffs);
        const HairMap ha = decode_map(a, basis, small);
        const HairMap hb = decode_map(b, basis, small);
        const HairMap hm = decode_map(mid, basis, small);
        for (int t = 0; t < a.texels(); ++t)
            for (int j = 0; j < basis.length; ++j) {
                const Eigen::Vector3d expect =
                    0.5 * (ha.strands[t].points[j] + hb.strands[t].points[j]);
                CHECK((hm.strands[t].points[j] - expect).cwiseAbs().maxCoeff() < 1e-9);
            }
    }
    SUBCASE("dimension mismatches rejected") {
        PcaHairMap map(4, 8, basis.num_components());
        CHECK_THROWS_AS(decode_map(map, basis, roots), std::invalid_argument);
    }
}

TEST_CASE("decode_map_vjp is the adjoint of the linear decode") {
    const StrandBasis basis = test_basis(16, 6);
    const HeadModel head = test_head();
    const RootGrid roots = RootGrid::from_head(head, 3, 3);
    std::mt19937 rng(83);
    std::normal_distribution<double> gauss(0.0, 1.0);

    PcaHairMap map(3, 3, basis.num_components());
    std::fill(map.baldness.begin(), map.baldness.end(), 1.0);
    for (int t = 0; t < map.texels(); ++t)
        for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = 0.02 * gauss(rng);

    // <J x, y> == <x, J^T y> for random x (coefficient direction) and y
    // (point-space direction).
    Eigen::MatrixXd x(map.texels(), basis.num_components());
    for (int t = 0; t < map.texels(); ++t)
        for (int c = 0; c < basis.num_components(); ++c) x(t, c) = gauss(rng);
    std::vector<std::vector<Eigen::Vector3d>> y(map.texels());
    for (auto& slot : y) {
        slot.resize(basis.length);
        for (auto& v : slot) v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }

    PcaHairMap shifted = map;
    const double h = 1e-6;
    shifted.coeffs += h * x;
    const HairMap base = decode_map(map, basis, roots);
    const HairMap moved = decode_map(shifted, basis, roots);
    double jx_dot_y = 0.0;
    for (int t = 0; t < map.texels(); ++t)
        for (int j = 0; j < basis.length; ++j)
            jx_dot_y +=
                ((moved.strands[t].points[j] - base.strands[t].points[j]) / h).dot(y[t][j]);
    const Eigen::MatrixXd jt_y = decode_map_vjp(y, map, basis, roots);
    const double x_dot_jty = (x.array() * jt_y.array()).sum();
    CHECK(rel_error(jx_dot_y, x_dot_jty, 1e-9) < 1e-5);
}

TEST_CASE("project_dataset nearest assignment") {
    const StrandBasis basis = test_basis();
    const HeadModel head = test_head();

    SUBCASE("empty input gives an all-bald map") {
        const PcaHairMap map = project_dataset({}, {}, 16, 16, basis, head);
        for (const double b : map.baldness) CHECK(b == 0.0);
    }
    SUBCASE("one strand occupies exactly its texel") {
        const ScalpSample sample = scalp_point(head, 0.5, 0.5);
        Strand s;
        s.points.resize(basis.length);
        for (int j = 0; j < basis.length; ++j)
            s.points[j] = sample.position +
                          sample.frame * Eigen::Vector3d(0, 0, 0.1 * j / (basis.length - 1));
        const PcaHairMap map =
            project_dataset({s}, {Eigen::Vector2d(0.5, 0.5)}, 64, 64, basis, head);
        int occupied = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (map.baldness[map.index(x, y)] > 0) {
                    ++occupied;
                    CHECK(x == 32);
                    CHECK(y == 32);
                }
        CHECK(occupied == 1);
    }
    SUBCASE("tie-break keeps the lower strand index") {
        const ScalpSample sample = scalp_point(head, 0.3, 0.6);
        auto make = [&](double scale) {
            Strand s;
            s.points.resize(basis.length);
            for (int j = 0; j < basis.length; ++j)
                s.points[j] =
                    sample.position +
                    sample.frame * Eigen::Vector3d(0, 0, scale * j / (basis.length - 1));
            return s;
        };
        // Both strands share the same UV, hence the same texel and distance.
        const std::vector<Strand> strands{make(0.08), make(0.2)};
        const std::vector<Eigen::Vector2d> uvs{Eigen::Vector2d(0.305, 0.605),
                                               Eigen::Vector2d(0.305, 0.605)};
        const PcaHairMap map = project_dataset(strands, uvs, 8, 8, basis, head);
        const RootGrid roots = RootGrid::from_head(head, 8, 8);
        int occupied_texel = -1;
        for (int t = 0; t < map.texels(); ++t)
            if (map.baldness[t] > 0) occupied_texel = t;
        REQUIRE(occupied_texel >= 0);
        // Decoding the winning texel must reproduce strand 0's short length,
        // not strand 1's.
        StrandCoefficients g;
        g.gamma = map.coeffs.row(occupied_texel).transpose();
        const Strand rec = decode_strand(g, basis);
        const double span = (rec.points.back() - rec.points.front()).norm();
        CHECK(span < 0.14);  // strand 0 spans ~0.08, strand 1 ~0.2
    }
    SUBCASE("occupancy matches an exhaustive oracle on random strands") {
        std::mt19937 rng(97);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto corpus = rooted_corpus(99, 1000, basis.length);
        std::vector<Strand> strands;
        std::vector<Eigen::Vector2d> uvs;
        for (int i = 0; i < 1000; ++i) {
            const double u = unit(rng), v = unit(rng);
            const ScalpSample sample = scalp_point(head, u, v);
            Strand s = corpus[static_cast<std::size_t>(i)];
            for (auto& p : s.points) p = sample.position + sample.frame * p;
            strands.push_back(std::move(s));
            uvs.emplace_back(u, v);
        }
        const PcaHairMap map = project_dataset(strands, uvs, 64, 64, basis, head);
        // Oracle: texel occupancy from exhaustive binning.
        std::set<int> expect;
        for (const auto& uv : uvs) {
            const int x = std::min(63, static_cast<int>(uv.x() * 64));
            const int y = std::min(63, static_cast<int>(uv.y() * 64));
            expect.insert(y * 64 + x);
        }
        int occupied = 0;
        for (int t = 0; t < map.texels(); ++t)
            if (map.baldness[t] > 0) {
                ++occupied;
                CHECK(expect.count(t) == 1);
            }
        CHECK(occupied == static_cast<int>(expect.size()));
    }
    SUBCASE("out-of-range UVs rejected") {
        Strand s = rooted_corpus(1, 1, basis.length)[0];
        CHECK_THROWS_AS(
            project_dataset({s}, {Eigen::Vector2d(1.0, 0.5)}, 8, 8, basis, head),
            std::invalid_argument);
    }
}

TEST_CASE("upsample_guides") {
    const StrandBasis basis = test_basis();
    const HeadModel head = test_head();
    const RootGrid guide_roots = RootGrid::from_head(head, 8, 8);
    const RootGrid dense_roots = RootGrid::from_head(head, 32, 32);

    SUBCASE("identical root-local guides stay identical") {
        // Same root-local strand everywhere: any blend of equal arrays is
        // that array.
        const Strand local = rooted_corpus(101, 1, basis.length)[0];
        HairMap guides;
        guides.width = guides.height = 8;
        guides.strands.resize(64);
        guides.active.assign(64, 1);
        for (int t = 0; t < 64; ++t) {
            Strand s = local;
            for (auto& p : s.points)
                p = guide_roots.frames[t] * p + guide_roots.positions[t];
            guides.strands[t] = std::move(s);
        }
        const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 0.5);
        CHECK(dense.active_count() == 32 * 32);
        for (int t = 0; t < dense.texels(); ++t) {
            for (int j = 0; j < basis.length; ++j) {
                const Eigen::Vector3d back = dense_roots.frames[t].transpose() *
                                             (dense.strands[t].points[j] -
                                              dense_roots.positions[t]);
                CHECK((back - local.points[j]).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
    SUBCASE("nearest_weight=1 block-replicates guides") {
        std::mt19937 rng(103);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) {
            map.baldness[t] = 1.0;
            for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = gauss(rng);
        }
        const HairMap guides = decode_map(map, basis, guide_roots);
        const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 1.0);
        for (int ty = 0; ty < 32; ++ty)
            for (int tx = 0; tx < 32; ++tx) {
                // Nearest guide texel of the 4x4 block.
                const double gx = (tx + 0.5) / 4.0 - 0.5;
                const double gy = (ty + 0.5) / 4.0 - 0.5;
                const int nx = std::clamp(static_cast<int>(std::lround(gx)), 0, 7);
                const int ny = std::clamp(static_cast<int>(std::lround(gy)), 0, 7);
                const int g = ny * 8 + nx;
                const int t = ty * 32 + tx;
                for (int j = 0; j < basis.length; ++j) {
                    const Eigen::Vector3d local_guide =
                        guide_roots.frames[g].transpose() *
                        (guides.strands[g].points[j] - guide_roots.positions[g]);
                    const Eigen::Vector3d expect =
                        dense_roots.frames[t] * local_guide + dense_roots.positions[t];
                    CHECK((dense.strands[t].points[j] - expect).cwiseAbs().maxCoeff() < 1e-10);
                }
            }
    }
    SUBCASE("active count multiplies exactly under block replication") {
        std::mt19937 rng(107);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) map.baldness[t] = unit(rng) < 0.4 ? 1.0 : 0.0;
        const HairMap guides = decode_map(map, basis, guide_roots);
        const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 0.5);
        CHECK(dense.active_count() == 16 * guides.active_count());
    }
    SUBCASE("upsampled roots stay on the scalp") {
        std::mt19937 rng(109);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) {
            map.baldness[t] = 1.0;
            for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = gauss(rng);
        }
        const HairMap guides = decode_map(map, basis, guide_roots);
        const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 0.5);
        for (int t = 0; t < dense.texels(); ++t) {
            if (!dense.active[t]) continue;
            CHECK((dense.strands[t].points[0] - dense_roots.positions[t]).norm() < 1e-6);
            CHECK(std::abs(head_sdf(head, dense.strands[t].points[0])) < 1e-6);
        }
    }
    SUBCASE("outputs are convex combinations of guide geometry") {
        std::mt19937 rng(113);
        std::normal_distribution<double> gauss(0.0, 0.02);
        PcaHairMap map(8, 8, basis.num_components());
        for (int t = 0; t < map.texels(); ++t) {
            map.baldness[t] = 1.0;
            for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = gauss(rng);
        }
        const HairMap guides = decode_map(map, basis, guide_roots);
        // Root-local bounding box over all guides.
        Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e9);
        Eigen::Vector3d hi = -lo;
        for (int t = 0; t < guides.texels(); ++t)
            for (int j = 0; j < basis.length; ++j) {
                const Eigen::Vector3d q =
                    guide_roots.frames[t].transpose() *
                    (guides.strands[t].points[j] - guide_roots.positions[t]);
                lo = lo.cwiseMin(q);
                hi = hi.cwiseMax(q);
            }
        const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 0.3);
        for (int t = 0; t < dense.texels(); ++t)
            for (int j = 0; j < basis.length; ++j) {
                const Eigen::Vector3d q = dense_roots.frames[t].transpose() *
                                          (dense.strands[t].points[j] -
                                           dense_roots.positions[t]);
                CHECK((q.array() >= lo.array() - 1e-9).all());
                CHECK((q.array() <= hi.array() + 1e-9).all());
            }
    }
    SUBCASE("non-multiple dimensions rejected") {
        HairMap guides;
        guides.width = guides.height = 8;
        guides.strands.resize(64);
        guides.active.assign(64, 1);
        for (int t = 0; t < 64; ++t) guides.strands[t] = rooted_corpus(1, 1, 8)[0];
        const RootGrid bad_roots = RootGrid::from_head(head, 36, 36);
        CHECK_THROWS_AS(upsample_guides(guides, guide_roots, bad_roots, 0.5),
                        std::invalid_argument);
    }
}

TEST_CASE("upsample_guides_vjp is the adjoint of the upsampling map") {
    const StrandBasis basis = test_basis(12, 4);
    const HeadModel head = test_head();
    const RootGrid guide_roots = RootGrid::from_head(head, 4, 4);
    const RootGrid dense_roots = RootGrid::from_head(head, 8, 8);
    std::mt19937 rng(127);
    std::normal_distribution<double> gauss;

    PcaHairMap map(4, 4, basis.num_components());
    for (int t = 0; t < map.texels(); ++t) {
        map.baldness[t] = t % 5 == 0 ? 0.0 : 1.0;
        for (int c = 0; c < map.num_components(); ++c) map.coeffs(t, c) = 0.02 * gauss(rng);
    }
    const HairMap guides = decode_map(map, basis, guide_roots);

    // Directional perturbation x on guide points, test direction y on dense.
    std::vector<std::vector<Eigen::Vector3d>> x(guides.texels());
    for (int t = 0; t < guides.texels(); ++t) {
        if (!guides.active[t]) continue;
        x[t].resize(basis.length);
        for (auto& v : x[t]) v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
    const HairMap dense = upsample_guides(guides, guide_roots, dense_roots, 0.5);
    std::vector<std::vector<Eigen::Vector3d>> y(dense.texels());
    for (int t = 0; t < dense.texels(); ++t) {
        if (!dense.active[t]) continue;
        y[t].resize(basis.length);
        for (auto& v : y[t]) v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }

    HairMap shifted = guides;
    const double h = 1e-7;
    for (int t = 0; t < guides.texels(); ++t) {
        if (!guides.active[t]) continue;
        for (int j = 0; j < basis.length; ++j) shifted.strands[t].points[j] += h * x[t][j];
    }
    const HairMap moved = upsample_guides(shifted, guide_roots, dense_roots, 0.5);
    double jx_dot_y = 0.0;
    for (int t = 0; t < dense.texels(); ++t) {
        if (!dense.active[t]) continue;
        for (int j = 0; j < basis.length; ++j)
            jx_dot_y +=
                ((moved.strands[t].points[j] - dense.strands[t].points[j]) / h).dot(y[t][j]);
    }
    const auto jt_y = upsample_guides_vjp(y, guides, guide_roots, dense_roots, 0.5);
    double x_dot_jty = 0.0;
    for (int t = 0; t < guides.texels(); ++t) {
        if (jt_y[t].empty()) continue;
        for (int j = 0; j < basis.length; ++j) x_dot_jty += x[t][j].dot(jt_y[t][j]);
    }
    CHECK(rel_error(jx_dot_y, x_dot_jty, 1e-9) < 1e-5);
}

TEST_CASE("hair map file and strand text roundtrips") {
    std::mt19937 rng(131);
    std::normal_distribution<double> gauss;
    PcaHairMap map(6, 5, 7);
    for (int t = 0; t < map.texels(); ++t) {
        map.baldness[t] = (t % 2) ? 1.0 : 0.25;
        for (int c = 0; c < 7; ++c)
            map.coeffs(t, c) = static_cast<float>(gauss(rng));  // f32-representable
    }
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "hairkit_test_map.hmap").string();
    save_hair_map(path, map);
    const PcaHairMap loaded = load_hair_map(path);
    CHECK(loaded.width == 6);
    CHECK(loaded.height == 5);
    CHECK(loaded.num_components() == 7);
    CHECK((loaded.coeffs - map.coeffs).cwiseAbs().maxCoeff() == 0.0);
    for (int t = 0; t < map.texels(); ++t) CHECK(loaded.baldness[t] == map.baldness[t]);
    std::filesystem::remove(path);

    const auto corpus = rooted_corpus(137, 5, 9);
    const auto spath = (dir / "hairkit_test_strands.txt").string();
    save_strands_text(spath, corpus);
    const auto back = load_strands_text(spath);
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        for (int j = 0; j < corpus[i].size(); ++j)
            CHECK((back[i].points[j] - corpus[i].points[j]).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(spath);
}
