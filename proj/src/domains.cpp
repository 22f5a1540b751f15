#include "bevdg/domains.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace fs = std::filesystem;

namespace bevdg {

namespace {

// Stream tags for per-scene RNG derivation.
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kAppearanceStream = 2;
constexpr std::uint64_t kJitterStream = 3;
constexpr std::uint64_t kRainStream = 4;

double road_center(const SceneGeometry& g, int h, int height) {
    double t = height > 1 ? static_cast<double>(h) / (height - 1) : 0.0;
    return g.road_c0 + g.road_c1 * t + g.road_c2 * t * t;
}

bool on_road(const SceneGeometry& g, int h, int w, int height) {
    return std::abs(w - road_center(g, h, height)) <= g.road_half_width;
}

bool on_lane(const SceneGeometry& g, int h, int w, int height) {
    if (std::abs(w - road_center(g, h, height)) > g.lane_half_width) return false;
    return h % g.lane_dash_period < g.lane_dash_on;
}

int vehicle_at(const SceneGeometry& g, int h, int w) {
    for (std::size_t i = 0; i < g.vehicles.size(); ++i) {
        const VehicleRect& r = g.vehicles[i];
        if (h >= r.y0 && h < r.y1 && w >= r.x0 && w < r.x1) return static_cast<int>(i);
    }
    return -1;
}

} // namespace

std::string to_string(DomainTag tag) {
    switch (tag) {
        case DomainTag::kClean: return "clean";
        case DomainTag::kSunny: return "sunny";
        case DomainTag::kFog: return "fog";
        case DomainTag::kRain: return "rain";
        case DomainTag::kNight: return "night";
    }
    throw InvalidArgument("unknown domain tag");
}

DomainTag domain_tag_from_string(const std::string& name) {
    if (name == "clean") return DomainTag::kClean;
    if (name == "sunny") return DomainTag::kSunny;
    if (name == "fog") return DomainTag::kFog;
    if (name == "rain") return DomainTag::kRain;
    if (name == "night") return DomainTag::kNight;
    throw InvalidArgument("unknown domain tag: " + name);
}

std::vector<DomainTag> shifted_domains() {
    return {DomainTag::kSunny, DomainTag::kFog, DomainTag::kRain, DomainTag::kNight};
}

SceneGeometry scene_geometry(std::uint64_t seed, int height, int width) {
    Rng rng(derive_seed(seed, kGeometryStream));
    SceneGeometry g;
    g.road_c0 = rng.uniform(0.25, 0.75) * width;
    g.road_c1 = rng.uniform(-0.30, 0.30) * width;
    g.road_c2 = rng.uniform(-0.20, 0.20) * width;
    g.road_half_width = rng.uniform(0.12, 0.22) * width;
    g.lane_half_width = rng.uniform(0.02, 0.04) * width;
    g.lane_dash_period = rng.uniform_int(6, 10);
    g.lane_dash_on = std::max(2, g.lane_dash_period * 3 / 5);

    int n_vehicles = rng.uniform_int(1, 5);
    for (int i = 0; i < n_vehicles; ++i) {
        int len = rng.uniform_int(3, 6);
        int wid = rng.uniform_int(2, 4);
        int y0 = rng.uniform_int(0, std::max(0, height - len));
        double cx = road_center(g, y0, height);
        double off = rng.uniform(-0.5, 0.5) * g.road_half_width;
        int x0 = static_cast<int>(std::lround(cx + off - wid / 2.0));
        if (x0 < 0) x0 = 0;
        if (x0 + wid > width) x0 = std::max(0, width - wid);
        VehicleRect r{y0, x0, std::min(height, y0 + len), std::min(width, x0 + wid)};
        if (r.y1 > r.y0 && r.x1 > r.x0) g.vehicles.push_back(r);
    }
    return g;
}

SegMask rasterize_label(const SceneGeometry& g, int height, int width) {
    SegMask mask(height, width);
    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w) {
            if (vehicle_at(g, h, w) >= 0) mask.at(h, w, SegMask::kVehicle) = 1;
            if (on_road(g, h, w, height)) mask.at(h, w, SegMask::kRoad) = 1;
            if (on_lane(g, h, w, height)) mask.at(h, w, SegMask::kLane) = 1;
        }
    return mask;
}

Scene generate_scene(std::uint64_t seed, int height, int width, int n_cavs,
                     const JitterParams& jitter) {
    if (n_cavs < 1)
        throw InvalidArgument("generate_scene: need at least one CAV");
    if (height < 1 || width < 1)
        throw InvalidArgument("generate_scene: degenerate dimensions");

    SceneGeometry g = scene_geometry(seed, height, width);

    Rng look(derive_seed(seed, kAppearanceStream));
    std::array<double, 3> ground{look.uniform(0.30, 0.42), look.uniform(0.45, 0.58),
                                 look.uniform(0.25, 0.36)};
    double road_gray = look.uniform(0.26, 0.34);
    double lane_paint = look.uniform(0.80, 0.92);
    // saturated paint jobs with channel-dominance patterns distinct from the
    // gray road, the green ground and the white lane markings
    static constexpr std::array<std::array<double, 3>, 5> kVehiclePalette{{
        {0.75, 0.15, 0.15}, // red
        {0.15, 0.20, 0.75}, // blue
        {0.80, 0.70, 0.15}, // yellow
        {0.15, 0.65, 0.70}, // teal
        {0.70, 0.15, 0.65}, // magenta
    }};
    std::vector<std::array<double, 3>> vehicle_colors;
    for (std::size_t i = 0; i < g.vehicles.size(); ++i) {
        std::array<double, 3> base =
            kVehiclePalette[look.uniform_index(kVehiclePalette.size())];
        for (double& c : base) c = clamp01(c + look.uniform(-0.05, 0.05));
        vehicle_colors.push_back(base);
    }

    Image base(height, width, 3);
    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w) {
            std::array<double, 3> px = ground;
            if (on_road(g, h, w, height)) px = {road_gray, road_gray, road_gray};
            if (on_lane(g, h, w, height)) px = {lane_paint, lane_paint, lane_paint};
            int vi = vehicle_at(g, h, w);
            if (vi >= 0) px = vehicle_colors[vi];
            for (int c = 0; c < 3; ++c) base.at(h, w, c) = px[c];
        }

    Scene scene;
    scene.scene_seed = seed;
    scene.domain_tag = DomainTag::kClean;
    scene.label = rasterize_label(g, height, width);
    scene.cav_images.reserve(n_cavs);
    for (int cav = 0; cav < n_cavs; ++cav) {
        Rng jr(derive_seed(seed, kJitterStream, static_cast<std::uint64_t>(cav)));
        double brightness = jr.uniform(-jitter.brightness, jitter.brightness);
        double contrast = jr.uniform(jitter.contrast_lo, jitter.contrast_hi);
        std::array<double, 3> cast{jr.uniform(-jitter.color_cast, jitter.color_cast),
                                   jr.uniform(-jitter.color_cast, jitter.color_cast),
                                   jr.uniform(-jitter.color_cast, jitter.color_cast)};
        Image img(height, width, 3);
        for (int h = 0; h < height; ++h)
            for (int w = 0; w < width; ++w)
                for (int c = 0; c < 3; ++c)
                    img.at(h, w, c) = clamp01((base.at(h, w, c) - 0.5) * contrast + 0.5 +
                                              brightness + cast[c]);
        scene.cav_images.push_back(std::move(img));
    }
    return scene;
}

Image apply_fog(const Image& img, const FogParams& p) {
    if (p.beta < 0.0)
        throw InvalidArgument("apply_fog: beta must be nonnegative");
    Image out(img.height(), img.width(), img.channels());
    for (int h = 0; h < img.height(); ++h) {
        // top row is farthest; depth stays strictly positive so dense fog
        // saturates everywhere
        double depth = static_cast<double>(img.height() - h) / img.height();
        double t = std::exp(-p.beta * depth);
        for (int w = 0; w < img.width(); ++w)
            for (int c = 0; c < img.channels(); ++c)
                out.at(h, w, c) = img.at(h, w, c) * t + p.airlight[c % 3] * (1.0 - t);
    }
    return out;
}

Image apply_rain(const Image& img, const RainParams& p, std::uint64_t seed) {
    if (p.streak_count < 0 || p.intensity < 0.0 || p.intensity > 1.0)
        throw InvalidArgument("apply_rain: bad parameters");
    int height = img.height(), width = img.width();
    std::vector<double> streaks(static_cast<std::size_t>(height) * width, 0.0);
    Rng rng(derive_seed(seed, kRainStream));
    constexpr double kDegToRad = std::numbers::pi / 180.0;

    for (int i = 0; i < p.streak_count; ++i) {
        double cy = rng.uniform(0.0, static_cast<double>(height));
        double cx = rng.uniform(0.0, static_cast<double>(width));
        double angle = rng.uniform(p.angle_min_deg, p.angle_max_deg) * kDegToRad;
        double len = p.length * rng.uniform(0.7, 1.3);  // zoom
        double shear = rng.uniform(-0.3, 0.3);
        double dy = std::cos(angle), dx = std::sin(angle);
        for (double s = -len / 2.0; s <= len / 2.0; s += 0.5) {
            double y = cy + dy * s;
            double x = cx + dx * s + shear * s * s / std::max(1.0, len);
            int iy = static_cast<int>(std::lround(y));
            int ix = static_cast<int>(std::lround(x));
            if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
            std::size_t at = static_cast<std::size_t>(iy) * width + ix;
            if (p.intensity > streaks[at]) streaks[at] = p.intensity;
            // faint halo one pixel to the side
            if (ix + 1 < width) {
                std::size_t side = at + 1;
                double halo = 0.4 * p.intensity;
                if (halo > streaks[side]) streaks[side] = halo;
            }
        }
    }

    Image out(height, width, img.channels());
    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w) {
            double s = streaks[static_cast<std::size_t>(h) * width + w];
            for (int c = 0; c < img.channels(); ++c) {
                // screen blend 1-(1-x)(1-s), written so s=0 keeps x bitwise
                // and s=1 saturates to exactly 1
                double x = img.at(h, w, c);
                out.at(h, w, c) = x + s * (1.0 - x);
            }
        }
    return out;
}

Image apply_night(const Image& img, const NightParams& p) {
    for (double gc : p.gain)
        if (!(gc > 0.0 && gc <= 1.0))
            throw InvalidArgument("apply_night: gains must be in (0,1]");
    if (p.gamma < 1.0)
        throw InvalidArgument("apply_night: gamma must be >= 1");
    Image out(img.height(), img.width(), img.channels());
    for (int h = 0; h < img.height(); ++h)
        for (int w = 0; w < img.width(); ++w)
            for (int c = 0; c < img.channels(); ++c) {
                double v = p.gain[c % 3] * img.at(h, w, c);
                out.at(h, w, c) = p.gamma == 1.0 ? v : std::pow(v, p.gamma);
            }
    return out;
}

Scene apply_domain(const Scene& scene, DomainTag tag, const CorruptionParams& p) {
    Scene out;
    out.scene_seed = scene.scene_seed;
    out.domain_tag = tag;
    out.label = scene.label; // corruptions are photometric
    out.cav_images.reserve(scene.cav_images.size());
    for (std::size_t cav = 0; cav < scene.cav_images.size(); ++cav) {
        const Image& img = scene.cav_images[cav];
        switch (tag) {
            case DomainTag::kClean:
                out.cav_images.push_back(img);
                break;
            case DomainTag::kSunny: {
                Image s(img.height(), img.width(), img.channels());
                for (std::size_t i = 0; i < img.size(); ++i)
                    s.data()[i] = clamp01(p.sunny_gain * img.data()[i]);
                out.cav_images.push_back(std::move(s));
                break;
            }
            case DomainTag::kFog:
                out.cav_images.push_back(apply_fog(img, p.fog));
                break;
            case DomainTag::kRain:
                out.cav_images.push_back(
                    apply_rain(img, p.rain, derive_seed(scene.scene_seed, 0xFA11, cav)));
                break;
            case DomainTag::kNight:
                out.cav_images.push_back(apply_night(img, p.night));
                break;
        }
    }
    return out;
}

std::map<DomainTag, std::vector<Scene>> build_domain_suite(
    const std::vector<Scene>& base, const CorruptionParams& p,
    const std::vector<DomainTag>& tags) {
    if (base.empty())
        throw InvalidArgument("build_domain_suite: base scene set is empty");
    std::map<DomainTag, std::vector<Scene>> suite;
    for (DomainTag tag : tags) {
        std::vector<Scene>& out = suite[tag];
        out.reserve(base.size());
        for (const Scene& s : base) out.push_back(apply_domain(s, tag, p));
    }
    return suite;
}

void save_scenes(const std::string& dir, const std::vector<Scene>& scenes) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["scenes"] = nlohmann::json::array();
    char name[32];
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Scene& s = scenes[i];
        std::snprintf(name, sizeof(name), "scene_%04zu", i);
        fs::path sdir = fs::path(dir) / name;
        fs::create_directories(sdir);
        for (std::size_t cav = 0; cav < s.cav_images.size(); ++cav)
            save_ppm(s.cav_images[cav],
                     (sdir / ("cav_" + std::to_string(cav) + ".ppm")).string());
        const char* class_names[3] = {"vehicle", "road", "lane"};
        for (int cls = 0; cls < SegMask::kNumClasses; ++cls)
            save_mask_ppm(s.label, cls,
                          (sdir / (std::string("label_") + class_names[cls] + ".ppm")).string());
        manifest["scenes"].push_back({{"name", name},
                                      {"seed", s.scene_seed},
                                      {"domain", to_string(s.domain_tag)},
                                      {"n_cavs", s.cav_images.size()}});
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out)
        throw IoError("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

std::vector<Scene> load_scenes(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in)
        throw IoError("cannot open manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("scenes"))
        throw FormatError("malformed manifest in " + dir);

    std::vector<Scene> scenes;
    for (const auto& entry : manifest["scenes"]) {
        Scene s;
        std::string name = entry.at("name").get<std::string>();
        s.scene_seed = entry.at("seed").get<std::uint64_t>();
        s.domain_tag = domain_tag_from_string(entry.at("domain").get<std::string>());
        int n_cavs = entry.at("n_cavs").get<int>();
        fs::path sdir = fs::path(dir) / name;
        for (int cav = 0; cav < n_cavs; ++cav)
            s.cav_images.push_back(
                load_ppm((sdir / ("cav_" + std::to_string(cav) + ".ppm")).string()));
        s.label = load_mask_ppm({(sdir / "label_vehicle.ppm").string(),
                                 (sdir / "label_road.ppm").string(),
                                 (sdir / "label_lane.ppm").string()});
        scenes.push_back(std::move(s));
    }
    return scenes;
}

} // namespace bevdg
