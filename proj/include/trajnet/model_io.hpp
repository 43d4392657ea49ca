// TMLP model format (little-endian):
//   "TMLP" | version u32 | input_dim u32 | output_dim u32 | n_dims u32 |
//   n_dims x u32 | block_repeat u32 | append_8192 u8 | bn_epsilon f64 |
//   bn_momentum f64 | density u32 | seed u64 | layer count u32 |
//   per layer: normalized u8, activated u8, then arrays as (length u64,
//   length x f64): weight (row-major), bias, and when normalized gamma,
//   beta, running_mean, running_var.
#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "trajnet/binary_io.hpp"
#include "trajnet/mlp.hpp"

namespace trajnet::mlp {

inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

template <typename Derived>
void write_array(std::ostream &os, const Eigen::DenseBase<Derived> &a) {
    io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(a.size()));
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) io::write_le<double>(os, static_cast<double>(a(r, c)));
}

template <typename Derived>
void read_array(std::istream &is, Eigen::DenseBase<Derived> &a, Eigen::Index rows, Eigen::Index cols) {
    const auto len = io::read_le<std::uint64_t>(is);
    if (len != static_cast<std::uint64_t>(rows * cols)) throw FormatError("parameter array length mismatch");
    a.derived().resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            a(r, c) = static_cast<typename Derived::Scalar>(io::read_le<double>(is));
}

} // namespace detail

template <typename Scalar>
void write_model(std::ostream &os, const Network<Scalar> &net, std::uint64_t seed) {
    const auto &c = net.config;
    io::write_magic(os, "TMLP");
    io::write_le<std::uint32_t>(os, kModelFormatVersion);
    io::write_le<std::uint32_t>(os, c.input_dim);
    io::write_le<std::uint32_t>(os, c.output_dim);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.layer_dims.size()));
    for (auto d : c.layer_dims) io::write_le<std::uint32_t>(os, d);
    io::write_le<std::uint32_t>(os, c.block_repeat);
    io::write_le<std::uint8_t>(os, c.append_8192_when_density_exceeds_4096 ? 1 : 0);
    io::write_le<double>(os, c.bn_epsilon);
    io::write_le<double>(os, c.bn_momentum);
    io::write_le<std::uint32_t>(os, net.density);
    io::write_le<std::uint64_t>(os, seed);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto &l : net.layers) {
        io::write_le<std::uint8_t>(os, l.normalized ? 1 : 0);
        io::write_le<std::uint8_t>(os, l.activated ? 1 : 0);
        detail::write_array(os, l.weight);
        detail::write_array(os, l.bias);
        if (l.normalized) {
            detail::write_array(os, l.gamma);
            detail::write_array(os, l.beta);
            detail::write_array(os, l.running_mean);
            detail::write_array(os, l.running_var);
        }
    }
}

template <typename Scalar = double>
struct LoadedModel {
    Network<Scalar> net;
    std::uint64_t seed = 0;
};

/// Reads a model; the layer structure must match what the stored config builds.
template <typename Scalar = double>
LoadedModel<Scalar> read_model(std::istream &is) {
    io::expect_magic(is, "TMLP");
    io::expect_version(is, kModelFormatVersion);
    MlpConfig c;
    c.input_dim = io::read_le<std::uint32_t>(is);
    c.output_dim = io::read_le<std::uint32_t>(is);
    const auto n_dims = io::read_le<std::uint32_t>(is);
    if (n_dims == 0 || n_dims > 1024) throw FormatError("bad layer_dims count");
    c.layer_dims.resize(n_dims);
    for (auto &d : c.layer_dims) d = io::read_le<std::uint32_t>(is);
    c.block_repeat = io::read_le<std::uint32_t>(is);
    c.append_8192_when_density_exceeds_4096 = io::read_le<std::uint8_t>(is) != 0;
    c.bn_epsilon = io::read_le<double>(is);
    c.bn_momentum = io::read_le<double>(is);
    const auto density = io::read_le<std::uint32_t>(is);
    LoadedModel<Scalar> out;
    out.seed = io::read_le<std::uint64_t>(is);
    try {
        out.net = init_network<Scalar>(c, 0, density);
    } catch (const ConfigError &err) {
        throw FormatError(std::string("invalid model config: ") + err.what());
    }
    const auto layer_count = io::read_le<std::uint32_t>(is);
    if (layer_count != out.net.layers.size()) throw FormatError("layer count does not match config");
    for (auto &l : out.net.layers) {
        const bool normalized = io::read_le<std::uint8_t>(is) != 0;
        const bool activated = io::read_le<std::uint8_t>(is) != 0;
        if (normalized != l.normalized || activated != l.activated) throw FormatError("layer kind mismatch");
        detail::read_array(is, l.weight, l.out(), l.in());
        detail::read_array(is, l.bias, l.out(), 1);
        if (l.normalized) {
            detail::read_array(is, l.gamma, l.in(), 1);
            detail::read_array(is, l.beta, l.in(), 1);
            detail::read_array(is, l.running_mean, l.in(), 1);
            detail::read_array(is, l.running_var, l.in(), 1);
        }
    }
    return out;
}

template <typename Scalar>
void save_model(const std::string &path, const Network<Scalar> &net, std::uint64_t seed) {
    auto os = io::open_out(path);
    write_model(os, net, seed);
    io::finish_write(os, path);
}

template <typename Scalar = double>
LoadedModel<Scalar> load_model(const std::string &path) {
    auto is = io::open_in(path);
    return read_model<Scalar>(is);
}

} // namespace trajnet::mlp
