#pragma once

// Piecewise-constant test scenes. Coordinates are physical; axis 0 is the image
// row (top = lo), axis 1 the column (left = lo). The recipes live on unit-area
// (unit-volume) grids so that mu = 10 keeps one basis under ~15% of the domain.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "palentir/fields.hpp"

namespace palentir {

enum class Shape { disk, rectangle, ellipse, annulus, square_annulus, ball, ellipsoid, box };

inline Shape shape_from_string(const std::string& s) {
    if (s == "disk") return Shape::disk;
    if (s == "rectangle") return Shape::rectangle;
    if (s == "ellipse") return Shape::ellipse;
    if (s == "annulus") return Shape::annulus;
    if (s == "square_annulus") return Shape::square_annulus;
    if (s == "ball") return Shape::ball;
    if (s == "ellipsoid") return Shape::ellipsoid;
    if (s == "box") return Shape::box;
    throw ConfigError("unknown primitive '" + s + "'");
}

inline std::string to_string(Shape s) {
    switch (s) {
    case Shape::disk: return "disk";
    case Shape::rectangle: return "rectangle";
    case Shape::ellipse: return "ellipse";
    case Shape::annulus: return "annulus";
    case Shape::square_annulus: return "square_annulus";
    case Shape::ball: return "ball";
    case Shape::ellipsoid: return "ellipsoid";
    case Shape::box: return "box";
    }
    return "?";
}

/// size: radius (disk, ball, annulus outer), half-widths (rectangle, box, square
/// annulus outer; size[0] only for the square), semi-axes (ellipse, ellipsoid).
/// inner: hole radius / half-width for the annuli. angle_deg rotates 2D shapes.
struct Primitive {
    Shape shape = Shape::disk;
    Point center{0.0, 0.0, 0.0};
    Point size{0.1, 0.1, 0.1};
    double inner = 0.0;
    double angle_deg = 0.0;
    double value = 1.0;

    bool contains(const Point& r, int nd) const {
        double d[3] = {r[0] - center[0], r[1] - center[1], nd == 3 ? r[2] - center[2] : 0.0};
        if (nd == 2 && angle_deg != 0.0) {
            const double t = angle_deg * std::numbers::pi / 180.0;
            const double a = std::cos(t) * d[0] + std::sin(t) * d[1];
            const double b = -std::sin(t) * d[0] + std::cos(t) * d[1];
            d[0] = a;
            d[1] = b;
        }
        switch (shape) {
        case Shape::disk:
        case Shape::ball: {
            double s = 0.0;
            for (int a = 0; a < nd; ++a) s += d[a] * d[a];
            return s <= size[0] * size[0];
        }
        case Shape::ellipse:
        case Shape::ellipsoid: {
            double s = 0.0;
            for (int a = 0; a < nd; ++a) s += (d[a] / size[a]) * (d[a] / size[a]);
            return s <= 1.0;
        }
        case Shape::rectangle:
        case Shape::box:
            for (int a = 0; a < nd; ++a)
                if (std::abs(d[a]) > size[a]) return false;
            return true;
        case Shape::annulus: {
            const double s = d[0] * d[0] + d[1] * d[1];
            return s <= size[0] * size[0] && s > inner * inner;
        }
        case Shape::square_annulus: {
            const double m = std::max(std::abs(d[0]), std::abs(d[1]));
            return m <= size[0] && m > inner;
        }
        }
        return false;
    }

    bool is_3d() const { return shape == Shape::ball || shape == Shape::ellipsoid || shape == Shape::box; }
};

struct PhantomSpec {
    GridSpec grid;
    double background = 0.0;
    std::vector<Primitive> primitives; // painted in order
};

inline ScalarField render_phantom(const PhantomSpec& spec) {
    const GridSpec& g = spec.grid;
    const int nd = g.ndim();
    for (const auto& p : spec.primitives) {
        if (p.is_3d() != (nd == 3)) throw ConfigError("primitive '" + to_string(p.shape) + "' does not match grid dimension");
        if (!std::isfinite(p.value)) throw ConfigError("primitive contrast must be finite");
        if (!g.contains(p.center)) throw ConfigError("primitive center outside the grid extent");
    }
    ScalarField f(g, spec.background);
    for (Index i = 0; i < g.num_points(); ++i) {
        const Point r = g.point(i);
        for (const auto& p : spec.primitives)
            if (p.contains(r, nd)) f[i] = p.value;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

/// Four objects, contrasts {1,2,3,4} * peak/4 on a zero background: nested squares
/// (top left), rotated ellipse (top right), doughnut (bottom left), square annulus
/// (bottom right).
inline PhantomSpec fig2_like(Index n = 82, double peak = 4.0) {
    const double u = peak / 4.0;
    PhantomSpec s;
    s.grid = make_unit_grid({n, n});
    s.primitives = {
        {Shape::rectangle, {-0.25, -0.25, 0}, {0.175, 0.175, 0}, 0.0, 0.0, 1.0 * u},
        {Shape::rectangle, {-0.25, -0.25, 0}, {0.08, 0.08, 0}, 0.0, 0.0, 3.0 * u},
        {Shape::ellipse, {-0.25, 0.25, 0}, {0.2, 0.095, 0}, 0.0, 35.0, 2.0 * u},
        {Shape::annulus, {0.25, -0.25, 0}, {0.175, 0, 0}, 0.08, 0.0, 3.0 * u},
        {Shape::square_annulus, {0.25, 0.25, 0}, {0.175, 0, 0}, 0.08, 0.0, 4.0 * u},
    };
    return s;
}

/// A single object with a long flat bar and a thin slanted spike.
inline PhantomSpec fig16_like(Index n = 32) {
    PhantomSpec s;
    s.grid = make_unit_grid({n, n});
    s.primitives = {
        {Shape::rectangle, {0.175, 0.0, 0}, {0.075, 0.35, 0}, 0.0, 0.0, 1.0},
        {Shape::rectangle, {-0.1, -0.1, 0}, {0.25, 0.045, 0}, 0.0, -20.0, 1.0},
    };
    return s;
}

/// Binary block with a ring-shaped "C", a "T" cut and a small hole.
inline PhantomSpec cheese_like(Index n = 64) {
    PhantomSpec s;
    s.grid = make_unit_grid({n, n});
    s.primitives = {
        {Shape::ellipse, {0.0, 0.0, 0}, {0.39, 0.34, 0}, 0.0, 15.0, 1.0},
        {Shape::annulus, {-0.025, -0.15, 0}, {0.13, 0, 0}, 0.07, 0.0, 0.0},
        {Shape::rectangle, {-0.025, -0.065, 0}, {0.04, 0.05, 0}, 0.0, 0.0, 1.0},
        {Shape::rectangle, {-0.11, 0.16, 0}, {0.03, 0.12, 0}, 0.0, 0.0, 0.0},
        {Shape::rectangle, {0.025, 0.16, 0}, {0.12, 0.03, 0}, 0.0, 0.0, 0.0},
        {Shape::disk, {0.25, -0.025, 0}, {0.045, 0, 0}, 0.0, 0.0, 0.0},
    };
    return s;
}

/// Two convex bodies of unit contrast in a 27^3 unit cube.
inline PhantomSpec ct3d_phantom(Index n = 27) {
    PhantomSpec s;
    s.grid = make_unit_grid({n, n, n});
    s.primitives = {
        {Shape::ellipsoid, {-0.15, -0.125, -0.1}, {0.225, 0.16, 0.19}, 0.0, 0.0, 1.0},
        {Shape::ball, {0.2, 0.2, 0.175}, {0.15, 0, 0}, 0.0, 0.0, 1.0},
    };
    return s;
}

/// Absorption map on [0,4]^2 cm: one elliptical anomaly in a uniform background.
inline PhantomSpec dot_phantom(Index n = 41, double background = 0.01, double anomaly = 0.05) {
    PhantomSpec s;
    s.grid = make_grid({n, n}, {{0.0, 4.0}, {0.0, 4.0}});
    s.background = background;
    s.primitives = {
        {Shape::ellipse, {1.7, 2.2, 0}, {0.7, 0.5, 0}, 0.0, 30.0, anomaly},
    };
    return s;
}

inline PhantomSpec phantom_recipe(const std::string& name) {
    if (name == "fig2") return fig2_like();
    if (name == "fig2-unit") return fig2_like(82, 1.0);
    if (name == "fig16") return fig16_like();
    if (name == "cheese") return cheese_like();
    if (name == "ct3d") return ct3d_phantom();
    if (name == "dot") return dot_phantom();
    throw ConfigError("unknown phantom recipe '" + name + "'");
}

} // namespace palentir
