#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haptigrasp/world.hpp"

namespace hg {

inline constexpr int kCatalogFormatVersion = 1;

struct Catalog {
  std::vector<CatalogEntry> entries;

  std::vector<CatalogEntry> split(Split s) const;
  const CatalogEntry& find(const std::string& id) const;
};

/// 0.05 m square, the reference object used by several tests.
CatalogEntry box_5cm(Material material = Material::hard_plastic);

/// Seeded catalog with `n_train` + `n_test` objects. Both splits cover all
/// seven materials whenever they have at least seven objects.
Catalog generate_catalog(std::uint64_t seed, int n_train, int n_test);

void validate_catalog(const Catalog& catalog, const SimParams& params = {});

std::string catalog_to_text(const Catalog& catalog);
Catalog catalog_from_text(const std::string& text);

void write_catalog(const std::string& path, const Catalog& catalog);
Catalog read_catalog(const std::string& path);

}  // namespace hg
