#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "palentir/fields.hpp"

using namespace palentir;
namespace fs = std::filesystem;

namespace {

std::string tmp(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "palentir_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

ScalarField ramp(const GridSpec& g) {
    ScalarField f(g);
    for (Index i = 0; i < f.size(); ++i) f[i] = 0.25 * static_cast<double>(i) - 3.0;
    return f;
}

} // namespace

TEST(Grid, CornersAndSpacing) {
    const GridSpec g = make_grid({5, 9});
    EXPECT_DOUBLE_EQ(g.spacing(0), 0.5);
    EXPECT_DOUBLE_EQ(g.spacing(1), 0.25);
    EXPECT_EQ(g.point(MultiIndex{0, 0, 0}), (Point{-1.0, -1.0, 0.0}));
    EXPECT_EQ(g.point(MultiIndex{4, 8, 0}), (Point{1.0, 1.0, 0.0}));
    EXPECT_EQ(g.num_points(), 45);
}

TEST(Grid, UnitGridHasUnitArea) {
    const GridSpec g = make_unit_grid({82, 82});
    EXPECT_DOUBLE_EQ(g.extent(0).width() * g.extent(1).width(), 1.0);
    EXPECT_DOUBLE_EQ(g.point(0)[0], -0.5);
}

TEST(Grid, FlattenRoundTrip) {
    const GridSpec g = make_grid({3, 4, 5});
    for (Index i = 0; i < g.num_points(); ++i) EXPECT_EQ(g.flatten(g.unflatten(i)), i);
    // last axis fastest
    EXPECT_EQ(g.flatten({0, 0, 1}), 1);
    EXPECT_EQ(g.flatten({0, 1, 0}), 5);
    EXPECT_EQ(g.flatten({1, 0, 0}), 20);
    EXPECT_THROW(g.flatten({3, 0, 0}), ConfigError);
}

TEST(Grid, RejectsBadShapes) {
    EXPECT_THROW(make_grid({1, 4}), ConfigError);
    EXPECT_THROW(make_grid({4}), ConfigError);
    EXPECT_THROW(make_grid({4, 4}, {{0.0, 1.0}, {1.0, 1.0}}), ConfigError);
}

TEST(Field, NonFiniteRejected) {
    Vec v = Vec::Zero(4);
    v[2] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(ScalarField(make_grid({2, 2}), v), NumericError);
    EXPECT_THROW(ScalarField(make_grid({2, 2}), Vec::Zero(3)), ConfigError);
}

TEST(Palf, FieldRoundTripIsExact) {
    const GridSpec g = make_grid({4, 3, 5}, {{0.0, 1.0}, {-2.0, 2.0}, {0.5, 0.75}});
    const ScalarField f = ramp(g);
    write_field(f, tmp("ramp.palf"));
    const ScalarField back = read_field(tmp("ramp.palf"));
    EXPECT_TRUE(back.grid() == g);
    EXPECT_EQ(back.values(), f.values());
}

TEST(Palf, VectorRoundTrip) {
    Vec v(7);
    v << 1, -2, 3.5, 1e-300, -0.0, 42, 7;
    write_vector(v, tmp("v.palf"));
    EXPECT_EQ(read_vector(tmp("v.palf")), v);
}

TEST(Palf, TruncatedFileIsIoError) {
    write_field(ramp(make_grid({4, 4})), tmp("cut.palf"));
    fs::resize_file(tmp("cut.palf"), 40);
    EXPECT_THROW(read_field(tmp("cut.palf")), IoError);
    {
        std::ofstream os(tmp("junk.palf"));
        os << "not a palf file at all";
    }
    EXPECT_THROW(read_field(tmp("junk.palf")), IoError);
    EXPECT_THROW(read_field(tmp("missing.palf")), IoError);
}

TEST(Csv, RoundTrip) {
    const ScalarField f = ramp(make_grid({3, 4}));
    write_csv(f, tmp("f.csv"));
    const ScalarField back = read_csv(tmp("f.csv"));
    EXPECT_EQ(back.grid().dims(), f.grid().dims());
    EXPECT_EQ(back.values(), f.values());
}

TEST(Pgm, HeaderAndScaling) {
    ScalarField f(make_grid({2, 3}));
    f[0] = -1.0;
    f[5] = 1.0;
    write_pgm(f, tmp("f.pgm"));
    std::ifstream is(tmp("f.pgm"), std::ios::binary);
    std::string magic;
    int w, h, maxv;
    is >> magic >> w >> h >> maxv;
    is.get();
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(w, 3);
    EXPECT_EQ(h, 2);
    EXPECT_EQ(maxv, 255);
    unsigned char px[6];
    is.read(reinterpret_cast<char*>(px), 6);
    EXPECT_EQ(px[0], 0);
    EXPECT_EQ(px[1], 128); // 0 maps to round(127.5)
    EXPECT_EQ(px[5], 255);
}

TEST(Slice, PicksThePlane) {
    const GridSpec g = make_grid({3, 4, 5});
    const ScalarField f = ramp(g);
    const ScalarField s = slice(f, 0, 2);
    ASSERT_EQ(s.grid().dims(), (std::vector<Index>{4, 5}));
    for (Index j = 0; j < 4; ++j)
        for (Index k = 0; k < 5; ++k) EXPECT_EQ(s.at({j, k, 0}), f.at({2, j, k}));
}
