#pragma once

// Map definition files. The format is a small TOML subset:
//
//   name = "shearcrit"
//   linear = [[2, 1], [0, 2]]
//
//   [[term]]
//   coord = 2
//   amplitude = 0.477464829275686
//   freq = [0, 1]
//   phase = 0
//   mode = "sin"
//
// Comments start with '#'. Keys outside a [[term]] block describe the map.

#include <endocert/surface_map.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace endocert {

/// Parsed value of the config/map text format.
struct TextValue {
  std::variant<double, std::string, std::vector<TextValue>> data;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<std::vector<TextValue>>(data); }
  double number() const;
  const std::string& string() const;
  const std::vector<TextValue>& array() const;
};

using TextTable = std::map<std::string, TextValue, std::less<>>;

/// Top-level keys plus named repeated blocks ([[term]], [[surgery]], ...).
struct TextDocument {
  TextTable root;
  std::vector<std::pair<std::string, TextTable>> blocks;

  std::vector<const TextTable*> blocks_named(std::string_view name) const;
};

TextDocument parse_text_document(std::string_view text);

SurfaceEndomorphism parse_map(std::string_view text);
SurfaceEndomorphism load_map(const std::filesystem::path& path);
std::string format_map(const SurfaceEndomorphism& f);

/// Shipped maps: cat, exp, diag, shearcrit, idhom.
std::vector<std::string> canonical_map_names();
SurfaceEndomorphism canonical_map(std::string_view name);

/// Surgery demonstrations: shearcycle (critical period-3 orbit on a shearcrit
/// variant) and neutralcrit (nearly neutral fixed point next to a critical set).
std::vector<std::string> demo_map_names();
SurfaceEndomorphism demo_map(std::string_view name);

/// Accepts a canonical or demo name or a path to a map file.
SurfaceEndomorphism resolve_map(const std::string& name_or_path);

/// Linear map with zero perturbation.
SurfaceEndomorphism linear_map(const LinearPart& a, std::string name);
/// A = I plus a constant shift (cos terms of frequency zero).
SurfaceEndomorphism translation_map(const Vec2& shift, std::string name = "translation");

/// FNV-1a 64-bit hash of the canonical text, as 16 hex digits.
std::string map_hash(const TorusMap& f);

}  // namespace endocert
