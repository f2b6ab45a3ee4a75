#pragma once

// Regular vertex-centered grids, scalar fields on them, and the PALF array format.
//
// Storage is row-major with the last axis fastest. Grid points include the
// boundary: point(0,...,0) is the lower corner and point(dims-1) the upper one.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "palentir/error.hpp"

namespace palentir {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Interval {
    double lo = -1.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

using Point = std::array<double, 3>;
using MultiIndex = std::array<Index, 3>;

class GridSpec {
public:
    GridSpec() = default;

    GridSpec(std::vector<Index> dims, std::vector<Interval> extent)
        : dims_(std::move(dims)), extent_(std::move(extent)) {
        if (dims_.size() != extent_.size())
            throw ConfigError("grid: dims and extent have different lengths");
        if (dims_.size() != 2 && dims_.size() != 3)
            throw ConfigError("grid: dimension must be 2 or 3");
        for (std::size_t a = 0; a < dims_.size(); ++a) {
            if (dims_[a] < 2)
                throw ConfigError("grid: every dim must be >= 2");
            if (!(extent_[a].hi > extent_[a].lo))
                throw ConfigError("grid: extent must satisfy lo < hi");
        }
    }

    int ndim() const { return static_cast<int>(dims_.size()); }
    const std::vector<Index>& dims() const { return dims_; }
    Index dim(int axis) const { return dims_[axis]; }
    const std::vector<Interval>& extent() const { return extent_; }
    const Interval& extent(int axis) const { return extent_[axis]; }

    Index num_points() const {
        Index n = 1;
        for (Index d : dims_) n *= d;
        return n;
    }

    double spacing(int axis) const {
        return extent_[axis].width() / static_cast<double>(dims_[axis] - 1);
    }

    double coord(int axis, Index i) const {
        if (i == dims_[axis] - 1) return extent_[axis].hi;
        return extent_[axis].lo + static_cast<double>(i) * spacing(axis);
    }

    Point point(const MultiIndex& idx) const {
        Point p{0.0, 0.0, 0.0};
        for (int a = 0; a < ndim(); ++a) p[a] = coord(a, idx[a]);
        return p;
    }

    Point point(Index linear) const { return point(unflatten(linear)); }

    Index flatten(const MultiIndex& idx) const {
        Index lin = 0;
        for (int a = 0; a < ndim(); ++a) {
            if (idx[a] < 0 || idx[a] >= dims_[a])
                throw ConfigError("grid: multi-index out of range");
            lin = lin * dims_[a] + idx[a];
        }
        return lin;
    }

    MultiIndex unflatten(Index linear) const {
        if (linear < 0 || linear >= num_points())
            throw ConfigError("grid: linear index out of range");
        MultiIndex idx{0, 0, 0};
        for (int a = ndim() - 1; a >= 0; --a) {
            idx[a] = linear % dims_[a];
            linear /= dims_[a];
        }
        return idx;
    }

    bool contains(const Point& p) const {
        for (int a = 0; a < ndim(); ++a)
            if (p[a] < extent_[a].lo || p[a] > extent_[a].hi) return false;
        return true;
    }

    bool operator==(const GridSpec&) const = default;

private:
    std::vector<Index> dims_;
    std::vector<Interval> extent_;
};

inline GridSpec make_grid(std::vector<Index> dims, std::vector<Interval> extent) {
    return GridSpec(std::move(dims), std::move(extent));
}

/// Unit-area (unit-volume) grid over [-1/2,1/2] on every axis.
inline GridSpec make_unit_grid(std::vector<Index> dims) {
    std::vector<Interval> extent(dims.size(), Interval{-0.5, 0.5});
    return GridSpec(std::move(dims), std::move(extent));
}

/// Grid over [-1,1] on every axis.
inline GridSpec make_grid(std::vector<Index> dims) {
    std::vector<Interval> extent(dims.size(), Interval{-1.0, 1.0});
    return GridSpec(std::move(dims), std::move(extent));
}

class ScalarField {
public:
    ScalarField() = default;

    explicit ScalarField(GridSpec grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(Vec::Constant(grid_.num_points(), fill)) {}

    ScalarField(GridSpec grid, Vec values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.num_points())
            throw ConfigError("field: value count does not match grid");
        if (!values_.allFinite())
            throw NumericError("field: non-finite value");
    }

    const GridSpec& grid() const { return grid_; }
    const Vec& values() const { return values_; }
    Vec& values() { return values_; }
    Index size() const { return values_.size(); }

    double operator[](Index i) const { return values_[i]; }
    double& operator[](Index i) { return values_[i]; }

    double at(const MultiIndex& idx) const { return values_[grid_.flatten(idx)]; }

    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }

private:
    GridSpec grid_;
    Vec values_;
};

// ---------------------------------------------------------------------------
// PALF binary format
//
//   "PALF" | u8 version=1 | u8 ndim | u8 dtype | u8 pad
//   ndim x u64 dims (little endian)
//   ndim x (f64 lo, f64 hi)
//   payload: f64 little endian, row-major; dtype 1 stores (re, im) pairs
// ---------------------------------------------------------------------------

enum class DType : std::uint8_t { f64 = 0, c64 = 1 };

/// Any-rank array as stored on disk. Payload holds 2 doubles per element for c64.
struct RawArray {
    std::vector<Index> dims;
    std::vector<Interval> extent;
    DType dtype = DType::f64;
    std::vector<double> payload;

    Index count() const {
        Index n = 1;
        for (Index d : dims) n *= d;
        return n;
    }
};

constexpr std::size_t palf_header_bytes(std::size_t ndim) { return 8 + ndim * 8 + ndim * 16; }

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

} // namespace detail

inline void write_array(const RawArray& arr, const std::string& path) {
    const std::size_t nd = arr.dims.size();
    if (nd == 0 || nd > 255 || arr.extent.size() != nd)
        throw ConfigError("write_array: bad shape");
    const std::size_t per = arr.dtype == DType::c64 ? 2 : 1;
    if (arr.payload.size() != static_cast<std::size_t>(arr.count()) * per)
        throw ConfigError("write_array: payload length does not match dims");

    std::string buf;
    buf.reserve(palf_header_bytes(nd) + arr.payload.size() * 8);
    buf.append("PALF");
    buf.push_back(1);
    buf.push_back(static_cast<char>(nd));
    buf.push_back(static_cast<char>(arr.dtype));
    buf.push_back(0);
    for (Index d : arr.dims) detail::put_u64(buf, static_cast<std::uint64_t>(d));
    for (const auto& e : arr.extent) {
        detail::put_f64(buf, e.lo);
        detail::put_f64(buf, e.hi);
    }
    for (double v : arr.payload) detail::put_f64(buf, v);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("write failed: " + path);
}

inline RawArray read_array(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

    if (bytes.size() < 8 || bytes.compare(0, 4, "PALF") != 0)
        throw IoError("malformed header (magic): " + path);
    if (p[4] != 1) throw IoError("unsupported PALF version: " + path);
    const std::size_t nd = p[5];
    if (nd == 0) throw IoError("malformed header (ndim = 0): " + path);
    if (p[6] > 1) throw IoError("malformed header (dtype): " + path);

    RawArray arr;
    arr.dtype = static_cast<DType>(p[6]);
    if (bytes.size() < palf_header_bytes(nd)) throw IoError("truncated header: " + path);
    std::size_t off = 8;
    for (std::size_t a = 0; a < nd; ++a, off += 8) {
        const auto d = detail::get_u64(p + off);
        if (d == 0 || d > (std::uint64_t{1} << 40)) throw IoError("malformed header (dims): " + path);
        arr.dims.push_back(static_cast<Index>(d));
    }
    for (std::size_t a = 0; a < nd; ++a, off += 16)
        arr.extent.push_back({detail::get_f64(p + off), detail::get_f64(p + off + 8)});

    const std::size_t per = arr.dtype == DType::c64 ? 2 : 1;
    const std::size_t expect = static_cast<std::size_t>(arr.count()) * per;
    if (bytes.size() - off != expect * 8)
        throw IoError("payload length does not match declared dims: " + path);
    arr.payload.resize(expect);
    for (std::size_t i = 0; i < expect; ++i, off += 8) arr.payload[i] = detail::get_f64(p + off);
    return arr;
}

inline void write_field(const ScalarField& field, const std::string& path) {
    RawArray arr;
    arr.dims = field.grid().dims();
    arr.extent = field.grid().extent();
    arr.payload.assign(field.values().data(), field.values().data() + field.size());
    write_array(arr, path);
}

inline ScalarField read_field(const std::string& path) {
    RawArray arr = read_array(path);
    if (arr.dtype != DType::f64) throw IoError("expected a real-valued field: " + path);
    if (arr.dims.size() != 2 && arr.dims.size() != 3)
        throw IoError("expected a 2D or 3D field: " + path);
    GridSpec grid(arr.dims, arr.extent);
    return ScalarField(std::move(grid), Eigen::Map<const Vec>(arr.payload.data(), arr.count()));
}

/// 1D vectors (parameter vectors, flattened data) in PALF.
inline void write_vector(const Vec& v, const std::string& path) {
    RawArray arr;
    arr.dims = {v.size()};
    arr.extent = {{0.0, static_cast<double>(std::max<Index>(v.size() - 1, 0))}};
    arr.payload.assign(v.data(), v.data() + v.size());
    write_array(arr, path);
}

inline Vec read_vector(const std::string& path) {
    RawArray arr = read_array(path);
    if (arr.dtype != DType::f64) throw IoError("expected a real-valued array: " + path);
    return Eigen::Map<const Vec>(arr.payload.data(), static_cast<Index>(arr.payload.size()));
}

inline void write_complex(const std::vector<Index>& dims, const Eigen::VectorXcd& v,
                          const std::string& path) {
    RawArray arr;
    arr.dims = dims;
    for (Index d : dims) arr.extent.push_back({0.0, static_cast<double>(d - 1)});
    arr.dtype = DType::c64;
    arr.payload.reserve(static_cast<std::size_t>(v.size()) * 2);
    for (Index i = 0; i < v.size(); ++i) {
        arr.payload.push_back(v[i].real());
        arr.payload.push_back(v[i].imag());
    }
    write_array(arr, path);
}

// ---------------------------------------------------------------------------
// Human-readable exports
// ---------------------------------------------------------------------------

inline void write_csv(const ScalarField& field, const std::string& path) {
    const auto& g = field.grid();
    if (g.ndim() != 2) throw ConfigError("CSV export supports 2D fields only");
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    char buf[40];
    for (Index r = 0; r < g.dim(0); ++r) {
        for (Index c = 0; c < g.dim(1); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", field[r * g.dim(1) + c]);
            if (c) os << ',';
            os << buf;
        }
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

/// Reads a CSV written by write_csv. CSV carries no extent, so the grid spans [-1,1]^2.
inline ScalarField read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<double> vals;
    Index rows = 0, cols = -1;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Index n = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("malformed CSV value in " + path);
            }
            ++n;
        }
        if (cols >= 0 && n != cols) throw IoError("ragged CSV rows in " + path);
        cols = n;
        ++rows;
    }
    if (rows < 2 || cols < 2) throw IoError("CSV too small for a 2D field: " + path);
    return ScalarField(make_grid({rows, cols}), Eigen::Map<const Vec>(vals.data(), rows * cols));
}

/// 8-bit binary PGM, min -> 0 and max -> 255.
inline void write_pgm(const ScalarField& field, const std::string& path) {
    const auto& g = field.grid();
    if (g.ndim() != 2) throw ConfigError("PGM export supports 2D fields only");
    const double lo = field.min(), hi = field.max();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << g.dim(1) << ' ' << g.dim(0) << "\n255\n";
    for (Index i = 0; i < field.size(); ++i) {
        const double v = std::round((field[i] - lo) * scale);
        os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
    }
    if (!os) throw IoError("write failed: " + path);
}

/// 2D slice of a 3D field at `index` along `axis` (for previews).
inline ScalarField slice(const ScalarField& field, int axis, Index index) {
    const auto& g = field.grid();
    if (g.ndim() != 3) throw ConfigError("slice: expected a 3D field");
    std::vector<Index> dims;
    std::vector<Interval> ext;
    for (int a = 0; a < 3; ++a)
        if (a != axis) {
            dims.push_back(g.dim(a));
            ext.push_back(g.extent(a));
        }
    GridSpec g2(dims, ext);
    Vec v(g2.num_points());
    Index k = 0;
    for (Index i = 0; i < g.num_points(); ++i) {
        if (g.unflatten(i)[axis] == index) v[k++] = field[i];
    }
    return ScalarField(std::move(g2), std::move(v));
}

} // namespace palentir
