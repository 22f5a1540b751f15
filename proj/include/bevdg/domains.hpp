#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bevdg/image.hpp"
#include "bevdg/rng.hpp"

namespace bevdg {

enum class DomainTag { kClean, kSunny, kFog, kRain, kNight };

std::string to_string(DomainTag tag);
DomainTag domain_tag_from_string(const std::string& name);

// The four shifted evaluation domains, in canonical order.
std::vector<DomainTag> shifted_domains();

struct FogParams {
    double beta = 1.0; // extinction per unit depth
    std::array<double, 3> airlight{0.80, 0.80, 0.85};
};
// Density presets for the fog domain.
inline FogParams light_fog(FogParams p = {}) { p.beta *= 0.5; return p; }
inline FogParams dense_fog(FogParams p = {}) { p.beta *= 1.5; return p; }

struct RainParams {
    int streak_count = 25;
    double length = 8.0;         // nominal streak length in pixels
    double angle_min_deg = -20.0; // slant from vertical
    double angle_max_deg = 20.0;
    double intensity = 0.6; // streak core brightness
};

struct NightParams {
    std::array<double, 3> gain{0.30, 0.32, 0.45}; // per channel, (0,1]
    double gamma = 1.8;                           // >= 1
};

// Per-CAV photometric heterogeneity applied at scene generation time.
struct JitterParams {
    double brightness = 0.15;  // delta in [-b, b]
    double contrast_lo = 0.8;
    double contrast_hi = 1.2;
    double color_cast = 0.05;  // per-channel delta in [-c, c]
};

struct CorruptionParams {
    FogParams fog;
    RainParams rain;
    NightParams night;
    JitterParams jitter;
    double sunny_gain = 1.1;
};

// One multi-CAV sample: every CAV sees the same geometry through its own
// photometric jitter; the label is shared.
struct Scene {
    std::vector<Image> cav_images;
    SegMask label;
    std::uint64_t scene_seed = 0;
    DomainTag domain_tag = DomainTag::kClean;
};

struct VehicleRect {
    int y0, x0, y1, x1; // half-open pixel bounds
};

// Everything the label depends on; a pure function of the scene seed, so the
// stored label can be re-rasterized and compared.
struct SceneGeometry {
    double road_c0, road_c1, road_c2; // road center column, quadratic in row
    double road_half_width;
    double lane_half_width;
    int lane_dash_period;
    int lane_dash_on;
    std::vector<VehicleRect> vehicles;
};

SceneGeometry scene_geometry(std::uint64_t seed, int height, int width);
SegMask rasterize_label(const SceneGeometry& geom, int height, int width);

Scene generate_scene(std::uint64_t seed, int height, int width, int n_cavs,
                     const JitterParams& jitter = {});

// Atmospheric scattering: out = x*t + A*(1-t) with t(h) = exp(-beta*depth(h))
// and depth the normalized row, top of image farthest.
Image apply_fog(const Image& img, const FogParams& p);

// Procedural streak map screen-blended onto the image: out = 1-(1-x)(1-S).
Image apply_rain(const Image& img, const RainParams& p, std::uint64_t seed);

// Per-channel gain then gamma compression: out = (gain*x)^gamma.
Image apply_night(const Image& img, const NightParams& p);

// Label-preserving: corrupts every CAV image, copies the label.
Scene apply_domain(const Scene& scene, DomainTag tag, const CorruptionParams& p);

std::map<DomainTag, std::vector<Scene>> build_domain_suite(
    const std::vector<Scene>& base, const CorruptionParams& p,
    const std::vector<DomainTag>& tags = shifted_domains());

// Scene directory layout: manifest.json listing name/seed/domain/n_cavs per
// scene, one subdirectory per scene with cav_<i>.ppm and one 0/255 PPM per
// label class (label_vehicle / label_road / label_lane).
void save_scenes(const std::string& dir, const std::vector<Scene>& scenes);
std::vector<Scene> load_scenes(const std::string& dir);

} // namespace bevdg
