#pragma once

#include "palentir/fields.hpp"

namespace palentir {

/// Pixel-wise upper and lower contrast limits the synthesized image interpolates between.
struct ContrastBounds {
    ScalarField high;
    ScalarField low;

    static ContrastBounds uniform(const GridSpec& grid, double low_value, double high_value) {
        if (low_value > high_value) throw ConfigError("contrast bounds: C_min > C_max");
        return {ScalarField(grid, high_value), ScalarField(grid, low_value)};
    }

    const GridSpec& grid() const { return high.grid(); }

    bool ordered() const { return (low.values().array() <= high.values().array()).all(); }
};

} // namespace palentir
