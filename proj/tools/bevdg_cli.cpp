// Command-line front end. Everything goes through the C API in bevdg/capi.h;
// this translation unit never touches the C++ core directly.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bevdg/capi.h"

namespace {

std::string read_file_or_empty(const std::string& path) {
    if (path.empty()) return "";
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "error: cannot read config file '%s'\n", path.c_str());
        std::exit(2);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int finish(bevdg_status status) {
    if (status == BEVDG_OK) return 0;
    std::fprintf(stderr, "error: %s\n", bevdg_last_error());
    return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-generalization pipeline for collaborative BEV segmentation"};
    app.require_subcommand(1);

    int32_t major = 0, minor = 0;
    bevdg_version(&major, &minor);
    app.set_version_flag("--version", std::to_string(major) + "." + std::to_string(minor));

    std::string config_path, out_path, domain, in_path, bank_path, ckpt_path, domains;
    double ratio = 0.01; // paper's mask proportion default
    std::uint64_t seed = 0;
    int ego_index = 0;
    bool align = true;
    bool grid = true;

    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic scene directory");
    gen->add_option("--out", out_path, "output scene directory")->required();
    gen->add_option("--config", config_path, "experiment config JSON (defaults used if omitted)");
    gen->add_option("--domain", domain,
                    "corruption applied to the scenes: clean, sunny, fog, rain, night")
        ->default_val("clean");

    CLI::App* bank = app.add_subcommand("bank", "Build an amplitude bank from a directory of PPM images");
    bank->add_option("--images", in_path, "directory of .ppm images")->required();
    bank->add_option("--out", out_path, "output bank file")->required();

    CLI::App* ampaug = app.add_subcommand("ampaug", "Amplitude-augment every PPM in a directory");
    ampaug->add_option("--in", in_path, "input image directory")->required();
    ampaug->add_option("--out", out_path, "output image directory")->required();
    ampaug->add_option("--bank", bank_path, "amplitude bank file")->required();
    ampaug->add_option("--ratio", ratio, "low-frequency mask ratio")->default_val(0.01);
    ampaug->add_option("--seed", seed, "bank sampling seed")->default_val(0);

    CLI::App* align_cmd = app.add_subcommand("align", "Align every scene's CAVs to the ego's LAB statistics");
    align_cmd->add_option("--scenes", in_path, "input scene directory")->required();
    align_cmd->add_option("--out", out_path, "output scene directory")->required();
    align_cmd->add_option("--ego-index", ego_index, "which CAV acts as ego")->default_val(0);

    CLI::App* train = app.add_subcommand("train", "Train per the config toggles; writes a checkpoint");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--out", out_path, "run directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the shifted domains");
    eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval->add_option("--config", config_path, "experiment config JSON (defaults used if omitted)");
    eval->add_option("--domains", domains, "comma-separated list (default: sunny,fog,rain,night)");
    eval->add_flag("--align,!--no-align", align, "apply intra-system alignment before inference")
        ->default_val(true);
    eval->add_option("--out", out_path, "results JSONL path")->required();

    CLI::App* exp = app.add_subcommand("run", "Full pipeline: generate, train, evaluate");
    exp->add_option("--config", config_path, "experiment config JSON")->required();
    exp->add_option("--out", out_path, "run directory")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "Run the toggle ablation");
    ablate->add_option("--config", config_path, "experiment config JSON")->required();
    ablate->add_option("--out", out_path, "grid root directory")->required();
    ablate->add_flag("--grid", grid, "run all 2^3 toggle combinations")->default_val(true);

    CLI11_PARSE(app, argc, argv);

    std::string config = read_file_or_empty(config_path);
    const char* config_c = config.empty() ? nullptr : config.c_str();

    if (gen->parsed())
        return finish(bevdg_generate_scenes(config_c, domain.c_str(), out_path.c_str()));

    if (bank->parsed()) {
        bevdg_bank* handle = nullptr;
        bevdg_status st = bevdg_bank_build_from_dir(in_path.c_str(), &handle);
        if (st != BEVDG_OK) return finish(st);
        size_t entries = bevdg_bank_size(handle);
        st = bevdg_bank_save(handle, out_path.c_str());
        bevdg_bank_destroy(handle);
        if (st == BEVDG_OK)
            std::printf("wrote %zu amplitude entries to %s\n", entries, out_path.c_str());
        return finish(st);
    }

    if (ampaug->parsed())
        return finish(bevdg_augment_dir(in_path.c_str(), out_path.c_str(),
                                        bank_path.c_str(), ratio, seed));

    if (align_cmd->parsed())
        return finish(bevdg_align_scene_dir(in_path.c_str(), out_path.c_str(), ego_index));

    if (train->parsed())
        return finish(bevdg_train(config_c, out_path.c_str()));

    if (eval->parsed())
        return finish(bevdg_evaluate(config_c, ckpt_path.c_str(),
                                     domains.empty() ? nullptr : domains.c_str(),
                                     align ? 1 : 0, out_path.c_str()));

    if (exp->parsed())
        return finish(bevdg_run_experiment(config_c, out_path.c_str()));

    if (ablate->parsed()) {
        if (!grid) {
            std::fprintf(stderr, "error: only the full --grid ablation is implemented\n");
            return 2;
        }
        return finish(bevdg_run_ablation(config_c, out_path.c_str()));
    }

    return 0;
}
