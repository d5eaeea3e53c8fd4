#include "haptigrasp/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "haptigrasp/error.hpp"

namespace hg {

namespace {

Polygon regular_polygon(int n, double radius, double phase) {
  Polygon p;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * kPi * i / n;
    p.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return p;
}

Polygon rectangle(double w, double h) {
  return {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("catalog line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::pair<double, double> parse_pair(const std::string& tok, char sep, int line) {
  const auto pos = tok.find(sep);
  if (pos == std::string::npos) throw ValidationError("catalog line " + std::to_string(line) + ": bad pair '" + tok + "'");
  return {parse_double(tok.substr(0, pos), line), parse_double(tok.substr(pos + 1), line)};
}

}  // namespace

std::vector<CatalogEntry> Catalog::split(Split s) const {
  std::vector<CatalogEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out), [&](const auto& e) { return e.split == s; });
  return out;
}

const CatalogEntry& Catalog::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  throw ValidationError("catalog has no object '" + id + "'");
}

CatalogEntry box_5cm(Material material) {
  CatalogEntry e;
  e.id = "box_5cm";
  e.polygon = rectangle(0.05, 0.05);
  e.height = 0.06;
  e.material = material;
  return e;
}

Catalog generate_catalog(std::uint64_t seed, int n_train, int n_test) {
  if (n_train < 0 || n_test < 0) throw ArgumentError("catalog sizes must be non-negative");
  Rng rng(seed);
  Catalog cat;
  const auto make_split = [&](Split split, int count) {
    std::vector<Material> order(kAllMaterials.begin(), kAllMaterials.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < count; ++i) {
      CatalogEntry e;
      e.split = split;
      e.material = i < kNumMaterials ? order[i] : kAllMaterials[uniform_int(rng, 0, kNumMaterials - 1)];
      e.height = uniform(rng, 0.05, 0.12);
      const int family = uniform_int(rng, 0, 5);
      std::string shape;
      switch (family) {
        case 0: {
          const double s = uniform(rng, 0.05, 0.056);
          e.polygon = rectangle(s, s);
          shape = "box";
          break;
        }
        case 1:
          e.polygon = rectangle(uniform(rng, 0.05, 0.054), uniform(rng, 0.058, 0.066));
          shape = "rect";
          break;
        case 2:
          e.polygon = regular_polygon(6, uniform(rng, 0.029, 0.032), 0.0);
          shape = "hex";
          break;
        case 3:
          e.polygon = regular_polygon(8, uniform(rng, 0.0275, 0.031), 0.0);
          shape = "oct";
          break;
        case 4:
          e.polygon = regular_polygon(16, uniform(rng, 0.0258, 0.029), 0.0);
          shape = "cyl";
          break;
        default: {
          const int n = uniform_int(rng, 5, 7);
          const double step = 2.0 * kPi / n;
          for (int k = 0; k < n; ++k) {
            const double a = k * step + uniform(rng, -0.25, 0.25) * step;
            const double r = uniform(rng, 0.03, 0.035);
            e.polygon.emplace_back(r * std::cos(a), r * std::sin(a));
          }
          shape = "poly";
        }
      }
      char id[64];
      std::snprintf(id, sizeof id, "%s_%02d_%s_%s", std::string(to_string(split)).c_str(), i, shape.c_str(),
                    std::string(to_string(e.material)).c_str());
      e.id = id;
      cat.entries.push_back(std::move(e));
    }
  };
  make_split(Split::train, n_train);
  make_split(Split::test, n_test);
  return cat;
}

void validate_catalog(const Catalog& catalog, const SimParams& params) {
  std::set<std::string> ids;
  for (const auto& e : catalog.entries) {
    if (!ids.insert(e.id).second) throw ValidationError("duplicate object id '" + e.id + "'");
    // Scene creation runs the full polygon checks.
    (void)create_scene(0, e, Workspace{}, params);
  }
}

std::string catalog_to_text(const Catalog& catalog) {
  std::ostringstream os;
  os << "# haptigrasp object catalog\n";
  os << "format_version = " << kCatalogFormatVersion << "\n";
  for (const auto& e : catalog.entries) {
    os << "\n[object]\n";
    os << "id = " << e.id << "\n";
    os << "split = " << to_string(e.split) << "\n";
    os << "material = " << to_string(e.material) << "\n";
    os << "height = " << fmt(e.height) << "\n";
    os << "vertices =";
    for (const Vec2& p : e.polygon) os << " " << fmt(p.x()) << "," << fmt(p.y());
    os << "\n";
    if (!e.axes.empty()) {
      os << "axes =";
      for (const auto& a : e.axes) os << " " << fmt(a.angle) << ":" << fmt(a.tolerance);
      os << "\n";
    }
  }
  return os.str();
}

Catalog catalog_from_text(const std::string& text) {
  Catalog cat;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  bool have_version = false;
  CatalogEntry* cur = nullptr;
  std::set<std::string> seen_keys;
  const auto finish = [&]() {
    if (!cur) return;
    for (const char* k : {"id", "split", "material", "height", "vertices"})
      if (!seen_keys.count(k)) throw ValidationError("catalog object missing key '" + std::string(k) + "'");
  };
  while (std::getline(is, raw)) {
    ++line;
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s == "[object]") {
      if (!have_version) throw ValidationError("catalog: format_version must precede objects");
      finish();
      cat.entries.emplace_back();
      cur = &cat.entries.back();
      seen_keys.clear();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("catalog line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (!cur) {
      if (key != "format_version") throw ValidationError("catalog: unknown header key '" + key + "'");
      if (val != std::to_string(kCatalogFormatVersion))
        throw VersionError("catalog format_version " + val + ", expected " + std::to_string(kCatalogFormatVersion));
      have_version = true;
      continue;
    }
    if (!seen_keys.insert(key).second) throw ValidationError("catalog: duplicate key '" + key + "'");
    if (key == "id") cur->id = val;
    else if (key == "split") cur->split = split_from_string(val);
    else if (key == "material") cur->material = material_from_string(val);
    else if (key == "height") cur->height = parse_double(val, line);
    else if (key == "vertices" || key == "axes") {
      std::istringstream toks(val);
      std::string tok;
      while (toks >> tok) {
        if (key == "vertices") {
          const auto [x, y] = parse_pair(tok, ',', line);
          cur->polygon.emplace_back(x, y);
        } else {
          const auto [a, t] = parse_pair(tok, ':', line);
          cur->axes.push_back({a, t});
        }
      }
    } else {
      throw ValidationError("catalog line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  if (!have_version) throw ValidationError("catalog: missing format_version");
  finish();
  return cat;
}

void write_catalog(const std::string& path, const Catalog& catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << catalog_to_text(catalog);
}

Catalog read_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return catalog_from_text(ss.str());
}

}  // namespace hg
