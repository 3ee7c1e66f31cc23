#include "pano/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pano/erp.hpp"

namespace pano {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

std::map<std::string, std::string> SceneSpec::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(seed);
    for (int c = 0; c < 3; ++c) {
        kv["sky_zenith." + std::to_string(c)] = fmt(sky_zenith[c]);
        kv["sky_horizon." + std::to_string(c)] = fmt(sky_horizon[c]);
        kv["ground_near." + std::to_string(c)] = fmt(ground_near[c]);
        kv["ground_nadir." + std::to_string(c)] = fmt(ground_nadir[c]);
    }
    kv["sun_yaw_deg"] = fmt(sun_yaw_deg);
    kv["sun_pitch_deg"] = fmt(sun_pitch_deg);
    kv["sun_radius_deg"] = fmt(sun_radius_deg);
    kv["sun_intensity"] = fmt(sun_intensity);
    kv["tex_amp"] = fmt(tex_amp);
    kv["tex_freq"] = std::to_string(tex_freq);
    kv["tex_phase"] = fmt(tex_phase);
    kv["landmarks"] = std::to_string(landmarks.size());
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        const std::string p = "landmark" + std::to_string(i) + ".";
        const Landmark& l = landmarks[i];
        kv[p + "type"] = std::to_string(l.type);
        kv[p + "yaw_deg"] = fmt(l.yaw_deg);
        kv[p + "width_deg"] = fmt(l.width_deg);
        kv[p + "height_deg"] = fmt(l.height_deg);
        for (int c = 0; c < 3; ++c) kv[p + "color." + std::to_string(c)] = fmt(l.color[c]);
    }
    return kv;
}

SceneSpec SceneSpec::from_kv(const std::map<std::string, std::string>& kv) {
    SceneSpec s;
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::invalid_argument("SceneSpec::from_kv: missing key " + k);
        return it->second;
    };
    s.seed = std::stoull(need("seed"));
    for (int c = 0; c < 3; ++c) {
        s.sky_zenith[c] = std::stod(need("sky_zenith." + std::to_string(c)));
        s.sky_horizon[c] = std::stod(need("sky_horizon." + std::to_string(c)));
        s.ground_near[c] = std::stod(need("ground_near." + std::to_string(c)));
        s.ground_nadir[c] = std::stod(need("ground_nadir." + std::to_string(c)));
    }
    s.sun_yaw_deg = std::stod(need("sun_yaw_deg"));
    s.sun_pitch_deg = std::stod(need("sun_pitch_deg"));
    s.sun_radius_deg = std::stod(need("sun_radius_deg"));
    s.sun_intensity = std::stod(need("sun_intensity"));
    s.tex_amp = std::stod(need("tex_amp"));
    s.tex_freq = std::stoi(need("tex_freq"));
    s.tex_phase = std::stod(need("tex_phase"));
    const int n = std::stoi(need("landmarks"));
    for (int i = 0; i < n; ++i) {
        const std::string p = "landmark" + std::to_string(i) + ".";
        Landmark l;
        l.type = std::stoi(need(p + "type"));
        l.yaw_deg = std::stod(need(p + "yaw_deg"));
        l.width_deg = std::stod(need(p + "width_deg"));
        l.height_deg = std::stod(need(p + "height_deg"));
        for (int c = 0; c < 3; ++c) l.color[c] = std::stod(need(p + "color." + std::to_string(c)));
        s.landmarks.push_back(l);
    }
    return s;
}

SceneSpec random_scene_spec(std::uint64_t seed) {
    SceneSpec s;
    s.seed = seed;
    Rng rng(seed);
    auto jitter = [&](double* rgb, double amount) {
        for (int c = 0; c < 3; ++c)
            rgb[c] = std::clamp(rgb[c] + rng.uniform(-amount, amount), 0.02, 0.98);
    };
    jitter(s.sky_zenith, 0.15);
    jitter(s.sky_horizon, 0.12);
    jitter(s.ground_near, 0.12);
    jitter(s.ground_nadir, 0.06);
    s.sun_yaw_deg = rng.uniform(-150.0, 150.0);
    s.sun_pitch_deg = rng.uniform(10.0, 60.0);
    s.sun_radius_deg = rng.uniform(5.0, 12.0);
    s.sun_intensity = rng.uniform(0.3, 0.8);
    s.tex_amp = rng.uniform(0.02, 0.08);
    s.tex_freq = rng.uniform_int(1, 5);
    s.tex_phase = rng.uniform(0.0, 2.0 * kPi);
    const int n = rng.uniform_int(2, 5);
    for (int i = 0; i < n; ++i) {
        SceneSpec::Landmark l;
        l.type = rng.uniform_int(0, 1);
        // keep every landmark clear of the wrap seam at +-180 degrees
        l.yaw_deg = rng.uniform(-150.0, 150.0);
        l.width_deg = rng.uniform(10.0, 40.0);
        l.height_deg = rng.uniform(10.0, 35.0);
        for (int c = 0; c < 3; ++c) l.color[c] = rng.uniform(0.15, 0.75);
        s.landmarks.push_back(l);
    }
    return s;
}

ErpImage render_scene(const SceneSpec& spec, int h) {
    if (h < 1) throw std::invalid_argument("render_scene: bad height");
    const int w = 2 * h;
    ErpImage img(h, w);
    const double sy = spec.sun_yaw_deg * kPi / 180.0;
    const double sp = spec.sun_pitch_deg * kPi / 180.0;
    const double sun_x = std::cos(sp) * std::sin(sy);
    const double sun_y = std::sin(sp);
    const double sun_z = std::cos(sp) * std::cos(sy);
    const double sun_r = spec.sun_radius_deg * kPi / 180.0;

    for (int y = 0; y < h; ++y) {
        const double pitch = kPi / 2.0 - kPi * (y + 0.5) / h;
        for (int x = 0; x < w; ++x) {
            const double yaw = 2.0 * kPi * (x + 0.5) / w - kPi;
            const double yaw_deg = yaw * 180.0 / kPi;
            double rgb[3];
            if (pitch >= 0.0) {
                const double t = pitch / (kPi / 2.0);
                for (int c = 0; c < 3; ++c)
                    rgb[c] = spec.sky_horizon[c] + (spec.sky_zenith[c] - spec.sky_horizon[c]) * t;
                // sun disk with a smooth falloff
                const double cp = std::cos(pitch);
                const double dot = std::clamp(cp * std::sin(yaw) * sun_x + std::sin(pitch) * sun_y +
                                                  cp * std::cos(yaw) * sun_z,
                                              -1.0, 1.0);
                const double ang = std::acos(dot);
                const double glow = spec.sun_intensity * std::exp(-(ang * ang) / (sun_r * sun_r));
                for (int c = 0; c < 3; ++c) rgb[c] += glow * (c == 2 ? 0.6 : 1.0);
            } else {
                const double t = -pitch / (kPi / 2.0);
                for (int c = 0; c < 3; ++c)
                    rgb[c] = spec.ground_near[c] + (spec.ground_nadir[c] - spec.ground_near[c]) * t;
            }
            // landmarks rise from the horizon; profiles never touch the seam
            const double pitch_deg = pitch * 180.0 / kPi;
            for (const SceneSpec::Landmark& l : spec.landmarks) {
                const double rel = (yaw_deg - l.yaw_deg) / (l.width_deg / 2.0);
                if (rel < -1.0 || rel > 1.0) continue;
                double profile;
                if (l.type == 0)
                    profile = l.height_deg;
                else
                    profile = l.height_deg * std::sqrt(std::max(0.0, 1.0 - rel * rel));
                if (pitch_deg >= -2.0 && pitch_deg <= profile) {
                    const double shade = 0.75 + 0.25 * (pitch_deg + 2.0) / (l.height_deg + 2.0);
                    for (int c = 0; c < 3; ++c) rgb[c] = l.color[c] * shade;
                }
            }
            // smooth yaw texture; integer harmonics keep the wrap continuous
            const double tex = spec.tex_amp * std::sin(spec.tex_freq * yaw + spec.tex_phase);
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = std::clamp(rgb[c] * (1.0 + tex), 0.0, 1.0);
        }
    }
    return img;
}

std::vector<SceneSample> synth_dataset(int n, int h, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("synth_dataset: n must be >= 1");
    if (h < 32) throw std::invalid_argument("synth_dataset: height must be >= 32");
    std::vector<SceneSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SceneSample s;
        s.spec = random_scene_spec(seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ull);
        s.image = render_scene(s.spec, h);
        out.push_back(std::move(s));
    }
    return out;
}

ErpImage random_rotation(const ErpImage& img, Rng& rng) {
    return rotate_horizontal(img, rng.uniform_int(0, img.w - 1));
}

}  // namespace pano
