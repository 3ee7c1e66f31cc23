#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pano/image.hpp"
#include "pano/rng.hpp"

namespace pano {

// Procedural outdoor panorama: sky/ground gradients, a sun disk, a smooth
// yaw texture with integer harmonics, and horizon landmarks kept away from
// the wrap seam so every rendered panorama is wrap-continuous.
struct SceneSpec {
    std::uint64_t seed = 0;
    double sky_zenith[3] = {0.2, 0.4, 0.8};
    double sky_horizon[3] = {0.7, 0.8, 0.9};
    double ground_near[3] = {0.35, 0.3, 0.2};
    double ground_nadir[3] = {0.15, 0.12, 0.08};
    double sun_yaw_deg = 0.0;      // in [-150, 150]
    double sun_pitch_deg = 30.0;   // in [10, 60]
    double sun_radius_deg = 8.0;
    double sun_intensity = 0.6;
    double tex_amp = 0.05;
    int tex_freq = 3;  // integer harmonics keep the seam continuous
    double tex_phase = 0.0;

    struct Landmark {
        int type = 0;  // 0 = box, 1 = cylinder
        double yaw_deg = 0.0;    // in [-150, 150]
        double width_deg = 20.0;  // <= 40
        double height_deg = 25.0;
        double color[3] = {0.5, 0.5, 0.5};
    };
    std::vector<Landmark> landmarks;

    std::map<std::string, std::string> to_kv() const;
    static SceneSpec from_kv(const std::map<std::string, std::string>& kv);
};

SceneSpec random_scene_spec(std::uint64_t seed);
ErpImage render_scene(const SceneSpec& spec, int h);

struct SceneSample {
    ErpImage image;
    SceneSpec spec;
};

// Deterministic per seed; scenes are rendered analytically.
std::vector<SceneSample> synth_dataset(int n, int h, std::uint64_t seed);

// view-direction augmentation: cyclic shift by a random whole-pixel amount
ErpImage random_rotation(const ErpImage& img, Rng& rng);

}  // namespace pano
