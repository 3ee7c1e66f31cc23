// Command-line front end: synthetic data, the four training stages,
// completion, evaluation, and the ablation harness.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pano/checkpoint.hpp"
#include "pano/image_io.hpp"
#include "pano/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pano;

namespace {

// relative paths land under $PANO360_OUT when it is set
std::string resolve_out(const std::string& path) {
    const char* root = std::getenv("PANO360_OUT");
    if (!root || path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

std::vector<ErpImage> load_dataset_dir(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string p = e.path().string();
        if (p.size() > 4 && (p.substr(p.size() - 4) == ".png" || p.substr(p.size() - 4) == ".ppm"))
            files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no .png/.ppm images in " + dir);
    std::vector<ErpImage> out;
    out.reserve(files.size());
    for (const std::string& f : files) out.push_back(load_image(f));
    return out;
}

ModelConfig config_for(const std::string& config_path, const std::string& bundle_dir) {
    if (!config_path.empty()) return load_config(config_path);
    const fs::path in_bundle = fs::path(bundle_dir) / "config.cfg";
    if (fs::exists(in_bundle)) return load_config(in_bundle.string());
    return ModelConfig{};
}

PipelineBundle open_bundle(const std::string& dir, const std::string& config_path) {
    if (fs::exists(fs::path(dir) / "config.cfg")) return load_bundle(dir);
    PipelineBundle b = make_bundle(config_for(config_path, dir));
    save_bundle(b, dir);
    return b;
}

PerceptualMode parse_loss_mode(const std::string& s) {
    if (s == "ws-perceptual") return PerceptualMode::ws_perceptual;
    if (s == "perceptual") return PerceptualMode::plain_perceptual;
    if (s == "ws-l1") return PerceptualMode::ws_l1;
    throw std::invalid_argument("unknown loss mode: " + s);
}

SamplerConfig::Schedule parse_schedule(const std::string& s) {
    if (s == "raster") return SamplerConfig::Schedule::raster;
    if (s == "circular") return SamplerConfig::Schedule::circular;
    throw std::invalid_argument("unknown schedule: " + s);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"360-degree panorama outpainting pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "render a synthetic panorama dataset");
    int synth_n = 48, synth_h = 64;
    std::uint64_t synth_seed = 1;
    std::string synth_out = "dataset";
    synth->add_option("--n", synth_n, "number of scenes");
    synth->add_option("--height", synth_h, "panorama height in pixels");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory");

    // training stages
    struct TrainArgs {
        std::string bundle = "bundle";
        std::string data = "dataset";
        std::string config;
    };
    TrainArgs t1, t2, tt, ta;
    std::string t2_loss = "ws-perceptual";
    auto add_train = [&](CLI::App* cmd, TrainArgs& a) {
        cmd->add_option("--bundle", a.bundle, "bundle directory");
        cmd->add_option("--data", a.data, "training image directory");
        cmd->add_option("--config", a.config, "config file (used when creating a bundle)");
    };
    auto* cv1 = app.add_subcommand("train-vqgan1", "train the masked-input autoencoder");
    add_train(cv1, t1);
    auto* cv2 = app.add_subcommand("train-vqgan2", "train the full-image autoencoder");
    add_train(cv2, t2);
    cv2->add_option("--loss", t2_loss, "ws-perceptual | perceptual | ws-l1");
    auto* ctf = app.add_subcommand("train-transformer", "train the scene model");
    add_train(ctf, tt);
    auto* cad = app.add_subcommand("train-adjust", "train the adjustment network");
    add_train(cad, ta);

    // complete
    auto* comp = app.add_subcommand("complete", "outpaint a panorama");
    std::string comp_bundle = "bundle", comp_input, comp_mask = "angular:180x90@0",
                comp_out = "completions", comp_schedule = "circular";
    int comp_n = 1;
    std::uint64_t comp_seed = 0;
    comp->add_option("--bundle", comp_bundle, "bundle directory");
    comp->add_option("--input", comp_input, "input panorama (.png/.ppm)")->required();
    comp->add_option("--mask", comp_mask, "fov spec, e.g. angular:180x90@0 or perspective:90@0,0");
    comp->add_option("--n", comp_n, "number of samples");
    comp->add_option("--seed", comp_seed, "sampling seed");
    comp->add_option("--schedule", comp_schedule, "raster | circular");
    comp->add_option("--out", comp_out, "output directory");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run the evaluation protocol");
    std::string ev_bundle = "bundle", ev_data = "dataset", ev_out = "report.txt", ev_ndjson,
                ev_mask = "angular:180x90@0", ev_schedule = "circular";
    int ev_samples = 5;
    bool ev_center = false;
    std::uint64_t ev_seed = 7;
    ev->add_option("--bundle", ev_bundle, "bundle directory");
    ev->add_option("--data", ev_data, "test image directory");
    ev->add_option("--mask", ev_mask, "fov spec");
    ev->add_option("--samples", ev_samples, "samples per input");
    ev->add_option("--seed", ev_seed, "sampling seed");
    ev->add_option("--schedule", ev_schedule, "raster | circular");
    ev->add_flag("--center-only", ev_center, "restrict metrics to the central generated region");
    ev->add_option("--out", ev_out, "report file (plain text)");
    ev->add_option("--ndjson", ev_ndjson, "per-image records (line-delimited)");

    // ablate
    auto* ab = app.add_subcommand("ablate", "sampling-schedule and loss ablations");
    std::string ab_config, ab_out = "ablation.txt", ab_work = "ablation_work";
    int ab_seeds = 3, ab_samples = 50, ab_loss_images = 12;
    std::uint64_t ab_base_seed = 100;
    bool ab_skip_sampling = false, ab_skip_loss = false;
    ab->add_option("--config", ab_config, "config file");
    ab->add_option("--seeds", ab_seeds, "training seeds per arm");
    ab->add_option("--samples", ab_samples, "paired samples per seed");
    ab->add_option("--loss-images", ab_loss_images, "held-out images for the loss arms");
    ab->add_option("--base-seed", ab_base_seed, "first training seed");
    ab->add_option("--work", ab_work, "working directory for trained arms");
    ab->add_option("--out", ab_out, "report file");
    ab->add_flag("--skip-sampling", ab_skip_sampling, "skip the schedule arms");
    ab->add_flag("--skip-loss", ab_skip_loss, "skip the loss arms");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const std::string out = resolve_out(synth_out);
            fs::create_directories(out);
            const std::vector<SceneSample> ds = synth_dataset(synth_n, synth_h, synth_seed);
            for (std::size_t i = 0; i < ds.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "scene_%04zu", i);
                save_png(ds[i].image, (fs::path(out) / (std::string(name) + ".png")).string());
                save_sidecar((fs::path(out) / (std::string(name) + ".txt")).string(),
                             ds[i].spec.to_kv());
            }
            std::cout << "wrote " << ds.size() << " scenes to " << out << "\n";
        } else if (*cv1 || *cv2 || *ctf || *cad) {
            TrainArgs& a = *cv1 ? t1 : *cv2 ? t2 : *ctf ? tt : ta;
            const std::string bundle_dir = resolve_out(a.bundle);
            PipelineBundle b = open_bundle(bundle_dir, a.config);
            const std::vector<ErpImage> data = load_dataset_dir(resolve_out(a.data));
            if (*cv1) {
                const TrainCurve c = train_vqgan1_stage(b, data);
                std::cout << "vqgan1: loss " << c.initial_loss << " -> " << c.final_loss << "\n";
            } else if (*cv2) {
                const TrainCurve c = train_vqgan2_stage(b, data, parse_loss_mode(t2_loss));
                std::cout << "vqgan2: loss " << c.initial_loss << " -> " << c.final_loss << "\n";
            } else if (*ctf) {
                const TrainStats s = train_transformer_stage(b, data);
                std::cout << "transformer: nll " << s.initial_loss << " -> " << s.final_loss << "\n";
            } else {
                const TrainCurve c = train_adjust_stage(b, data);
                std::cout << "adjust: loss " << c.initial_loss << " -> " << c.final_loss << "\n";
            }
            save_bundle(b, bundle_dir);
        } else if (*comp) {
            PipelineBundle b = load_bundle(resolve_out(comp_bundle));
            const ErpImage input = load_image(resolve_out(comp_input));
            const FovMask mask = make_fov_mask(FovSpec::parse(comp_mask), input.h, input.w);
            SamplerConfig scfg;
            scfg.temperature = b.cfg.temperature;
            scfg.top_k = b.cfg.top_k;
            scfg.w_p = b.cfg.w_p;
            scfg.seed = comp_seed;
            scfg.schedule = parse_schedule(comp_schedule);
            const std::string out = resolve_out(comp_out);
            fs::create_directories(out);
            const std::vector<CompleteResult> res = complete(b, input, mask, comp_n, scfg);
            for (std::size_t i = 0; i < res.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "completion_%02zu.png", i);
                save_png(res[i].image, (fs::path(out) / name).string());
            }
            std::cout << "wrote " << res.size() << " completions to " << out << "\n";
        } else if (*ev) {
            PipelineBundle b = load_bundle(resolve_out(ev_bundle));
            const std::vector<ErpImage> data = load_dataset_dir(resolve_out(ev_data));
            EvalProtocol protocol;
            protocol.mask_spec = FovSpec::parse(ev_mask);
            protocol.diversity_samples = ev_samples;
            protocol.center_region_only = ev_center;
            protocol.sampler.temperature = b.cfg.temperature;
            protocol.sampler.top_k = b.cfg.top_k;
            protocol.sampler.w_p = b.cfg.w_p;
            protocol.sampler.seed = ev_seed;
            protocol.sampler.schedule = parse_schedule(ev_schedule);
            const EvalReport rep = evaluate(b, data, protocol);
            write_text(resolve_out(ev_out), rep.to_text());
            if (!ev_ndjson.empty()) write_text(resolve_out(ev_ndjson), rep.to_ndjson());
            std::cout << rep.to_text();
        } else if (*ab) {
            AblationConfig ac;
            if (!ab_config.empty()) ac.cfg = load_config(ab_config);
            ac.n_seeds = ab_seeds;
            ac.n_samples = ab_samples;
            ac.loss_eval_images = ab_loss_images;
            ac.base_seed = ab_base_seed;
            ac.work_dir = resolve_out(ab_work);
            ac.run_sampling_arms = !ab_skip_sampling;
            ac.run_loss_arms = !ab_skip_loss;
            const AblationReport rep = run_ablation(ac);
            write_text(resolve_out(ab_out), rep.to_text());
            std::cout << rep.to_text();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
