#pragma once

// Binary containers, all little-endian:
//   "H5FM" u32 version, u32 K, u32 rank, u8 real, then (re, im) f64 pairs for
//          every coefficient in lattice mode order, components inner.
//   "H5MT" u32 version, u8 sampled, u32 grid radius, u32 count, then count
//          row-major 5x5 f64 matrices (count 1 for a constant metric).
//   "H5ST" u32 version, u8 sampled, u32 grid radius, u32 count, u8 real,
//          then count row-major 5x5 (re, im) f64 matrices.
// Each type also has a lossless JSON form.

#include "hodge5/fields.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>

namespace hodge5 {

inline constexpr std::uint32_t kContainerVersion = 1;

void write_binary(std::ostream& os, const FormField& u);
void write_binary(std::ostream& os, const MetricField& g);
void write_binary(std::ostream& os, const SymTensorField& h);

/// ConfigurationError on a bad magic, version or truncated stream.
FormField read_form_field(std::istream& is);
MetricField read_metric_field(std::istream& is);
SymTensorField read_tensor_field(std::istream& is);

nlohmann::json to_json(const FormField& u);
nlohmann::json to_json(const MetricField& g);
nlohmann::json to_json(const SymTensorField& h);

FormField form_field_from_json(const nlohmann::json& j);
MetricField metric_field_from_json(const nlohmann::json& j);
SymTensorField tensor_field_from_json(const nlohmann::json& j);

void save(const std::filesystem::path& path, const FormField& u);
void save(const std::filesystem::path& path, const MetricField& g);
void save(const std::filesystem::path& path, const SymTensorField& h);
FormField load_form_field(const std::filesystem::path& path);
MetricField load_metric_field(const std::filesystem::path& path);
SymTensorField load_tensor_field(const std::filesystem::path& path);

} // namespace hodge5
