#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "palentir/forward.hpp"
#include "palentir/phantoms.hpp"
#include "palentir/reconstruct.hpp"

using namespace palentir;

namespace {

ScalarField random_field(const GridSpec& g, std::uint64_t seed) {
    Rng rng(seed);
    ScalarField f(g);
    for (Index i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.1, 2.0);
    return f;
}

// Naive windowed extremum over the clipped delta^d box, then the eta skip rule.
ScalarField brute_update(const ScalarField& f, const ScalarField& prev, double eta, Index delta, bool take_max) {
    const GridSpec& g = f.grid();
    const Index h = delta / 2;
    ScalarField out = prev;
    for (Index n = 0; n < g.num_points(); ++n) {
        const MultiIndex c = g.unflatten(n);
        double e = take_max ? -INFINITY : INFINITY;
        for (Index m = 0; m < g.num_points(); ++m) {
            const MultiIndex q = g.unflatten(m);
            bool in = true;
            for (int a = 0; a < g.ndim(); ++a) in = in && std::abs(q[a] - c[a]) <= h;
            if (in) e = take_max ? std::max(e, f[m]) : std::min(e, f[m]);
        }
        if (prev[n] == 0.0 || std::abs(1.0 - e / prev[n]) > eta) out[n] = e;
    }
    return out;
}

} // namespace

TEST(UpdateC, MatchesBruteForce) {
    for (const GridSpec& g : {make_unit_grid({9, 12}), make_unit_grid({5, 6, 4})})
        for (Index delta : {1, 3, 5, 29})
            for (bool mx : {true, false}) {
                const ScalarField f = random_field(g, 7 + delta), prev = random_field(g, 99);
                for (double eta : {0.0, 0.3}) {
                    const ScalarField got =
                        update_c(f, prev, eta, delta, mx ? ExtremumMode::max : ExtremumMode::min);
                    EXPECT_EQ(got.values(), brute_update(f, prev, eta, delta, mx).values());
                }
            }
}

TEST(UpdateC, DeltaOneIsIdentityAtEtaZero) {
    const GridSpec g = make_unit_grid({6, 6});
    const ScalarField f = random_field(g, 1);
    EXPECT_EQ(update_c(f, ScalarField(g, 5.0), 0.0, 1, ExtremumMode::max).values(), f.values());
}

TEST(UpdateC, SmallChangesAreSkipped) {
    const GridSpec g = make_unit_grid({4, 4});
    const ScalarField prev(g, 1.0);
    const ScalarField out = update_c(ScalarField(g, 1.04), prev, 0.05, 3, ExtremumMode::max);
    EXPECT_EQ(out.values(), prev.values());
    EXPECT_EQ(update_c(ScalarField(g, 1.06), prev, 0.05, 3, ExtremumMode::max).values(), Vec::Constant(16, 1.06));
}

TEST(UpdateC, RejectsEvenWindow) {
    const GridSpec g = make_unit_grid({4, 4});
    EXPECT_THROW(update_c(ScalarField(g), ScalarField(g, 1.0), 0.0, 28, ExtremumMode::max), ConfigError);
    OuterLoopOptions o;
    o.delta = 28;
    EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
    const GridSpec g = make_unit_grid({5, 5});
    Checkpoint ck{3, Vec::LinSpaced(12, -1.0, 1.0), ContrastBounds::uniform(g, 0.25, 0.75)};
    const std::string dir = (std::filesystem::temp_directory_path() / "palentir_tests" / "ck").string();
    write_checkpoint(ck, dir);
    const Checkpoint back = read_checkpoint(dir);
    EXPECT_EQ(back.outer_index, 3);
    EXPECT_EQ(back.p, ck.p);
    EXPECT_EQ(back.bounds.high.values(), ck.bounds.high.values());
    EXPECT_EQ(back.bounds.low.values(), ck.bounds.low.values());
    EXPECT_THROW(read_checkpoint(dir + "_missing"), IoError);
}

TEST(OuterLoop, RecoversATwoLevelDisk) {
    PhantomSpec s;
    s.grid = make_unit_grid({24, 24});
    s.primitives = {{Shape::disk, {0.05, -0.05, 0}, {0.2, 0, 0}, 0.0, 0.0, 1.0}};
    const ScalarField truth = render_phantom(s);
    IdentityModel m(truth.size());
    OuterLoopOptions o;
    o.k_max = 3;
    o.delta = 5;
    const PalsParams p0 =
        PalsParams::default_initial(BasisGrid::lattice(4, s.grid), PalsConstants::defaults_2d(), 1);
    const ReconstructResult res = run_palentir(m, truth.values(), p0, s.grid, o);
    EXPECT_LT((res.f.values() - truth.values()).norm() / truth.values().norm(), 0.2);
    EXPECT_FALSE(res.reports.empty());
    EXPECT_EQ(res.outer_residual_sq.size(), res.reports.size());
    EXPECT_TRUE(res.bounds.ordered());
    // the returned state is the best pass
    const double best = *std::min_element(res.outer_residual_sq.begin(), res.outer_residual_sq.end());
    EXPECT_NEAR((m.apply(res.f.values()) - truth.values()).squaredNorm(), best, 1e-9 * std::max(1.0, best));
}

TEST(OuterLoop, KMaxCapsBoundUpdates) {
    const GridSpec g = make_unit_grid({12, 12});
    const Vec d = Vec::Constant(g.num_points(), 0.5);
    IdentityModel m(g.num_points());
    OuterLoopOptions o;
    o.k_max = 1;
    o.delta = 3;
    const auto res = run_palentir(m, d, PalsParams::default_initial(BasisGrid::lattice(2, g), PalsConstants::defaults_2d(), 1), g, o);
    EXPECT_LE(res.outer_iterations, 1);
    EXPECT_EQ(res.reports.size(), static_cast<std::size_t>(res.outer_iterations) + 1);
}

TEST(OuterLoop, ResumesFromCheckpoint) {
    const GridSpec g = make_unit_grid({12, 12});
    const Vec d = Vec::Constant(g.num_points(), 0.5);
    IdentityModel m(g.num_points());
    OuterLoopOptions o;
    o.k_max = 2;
    o.delta = 3;
    const PalsParams p0 = PalsParams::default_initial(BasisGrid::lattice(2, g), PalsConstants::defaults_2d(), 1);
    Checkpoint ck{0, p0.pack(), ContrastBounds::uniform(g, 0.2, 0.8)};
    const auto res = run_palentir(m, d, p0, g, o, ck);
    EXPECT_EQ(res.outer_iterations, 1);
    EXPECT_LE(res.bounds.high.max(), 0.8);
}
