#include "bevdg/capi.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "bevdg/colorspace.hpp"
#include "bevdg/domains.hpp"
#include "bevdg/experiment.hpp"
#include "bevdg/image.hpp"
#include "bevdg/spectral.hpp"

namespace fs = std::filesystem;

/* Opaque handle definitions: thin value wrappers around the core types. */
struct bevdg_image {
    bevdg::Image img;
};
struct bevdg_bank {
    bevdg::AmplitudeBank bank;
};

namespace {

thread_local std::string tl_error;

void set_error(const std::string& msg) { tl_error = msg; }

bevdg_status fail_null(const char* param) {
    set_error(std::string("null pointer: ") + param);
    return BEVDG_ERR_NULL_POINTER;
}

/* Runs a callable, translating exceptions into status codes. */
template <typename Fn>
bevdg_status guarded(Fn&& fn) {
    try {
        fn();
        return BEVDG_OK;
    } catch (const bevdg::InvalidArgument& e) {
        set_error(e.what());
        return BEVDG_ERR_INVALID_ARGUMENT;
    } catch (const bevdg::FormatError& e) {
        set_error(e.what());
        return BEVDG_ERR_FORMAT;
    } catch (const bevdg::IoError& e) {
        set_error(e.what());
        return BEVDG_ERR_IO;
    } catch (const fs::filesystem_error& e) {
        set_error(e.what());
        return BEVDG_ERR_IO;
    } catch (const std::bad_alloc&) {
        set_error("out of memory");
        return BEVDG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        set_error(e.what());
        return BEVDG_ERR_INTERNAL;
    }
}

bevdg::ExperimentConfig config_from(const char* config_json) {
    if (!config_json || !*config_json) return bevdg::ExperimentConfig{};
    return bevdg::parse_config(config_json);
}

std::vector<std::string> ppm_files_sorted(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw bevdg::InvalidArgument("no .ppm files in " + dir);
    return files;
}

bevdg_status write_string(const std::string& s, char* buf, size_t buf_len, size_t* written) {
    if (written) *written = s.size() + 1;
    if (!buf) return fail_null("buf");
    if (buf_len < s.size() + 1) {
        set_error("buffer too small: need " + std::to_string(s.size() + 1) + " bytes");
        return BEVDG_ERR_INVALID_ARGUMENT;
    }
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return BEVDG_OK;
}

} // namespace

extern "C" {

const char* bevdg_last_error(void) { return tl_error.c_str(); }
void bevdg_clear_last_error(void) { tl_error.clear(); }

void bevdg_version(int32_t* major, int32_t* minor) {
    if (major) *major = 1;
    if (minor) *minor = 0;
}

bevdg_status bevdg_image_create(int32_t height, int32_t width, int32_t channels,
                                const double* data, bevdg_image** out) {
    if (!out) return fail_null("out");
    return guarded([&] {
        auto handle = std::make_unique<bevdg_image>();
        handle->img = bevdg::Image(height, width, channels);
        if (data)
            std::copy(data, data + handle->img.size(), handle->img.data().begin());
        *out = handle.release();
    });
}

void bevdg_image_destroy(bevdg_image* img) { delete img; }

int32_t bevdg_image_height(const bevdg_image* img) { return img ? img->img.height() : 0; }
int32_t bevdg_image_width(const bevdg_image* img) { return img ? img->img.width() : 0; }
int32_t bevdg_image_channels(const bevdg_image* img) { return img ? img->img.channels() : 0; }

bevdg_status bevdg_image_read(const bevdg_image* img, double* buf, size_t buf_len) {
    if (!img) return fail_null("img");
    if (!buf) return fail_null("buf");
    if (buf_len < img->img.size()) {
        set_error("buffer too small for image payload");
        return BEVDG_ERR_INVALID_ARGUMENT;
    }
    std::copy(img->img.data().begin(), img->img.data().end(), buf);
    return BEVDG_OK;
}

bevdg_status bevdg_image_load_ppm(const char* path, bevdg_image** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] {
        auto handle = std::make_unique<bevdg_image>();
        handle->img = bevdg::load_ppm(path);
        *out = handle.release();
    });
}

bevdg_status bevdg_image_save_ppm(const bevdg_image* img, const char* path) {
    if (!img) return fail_null("img");
    if (!path) return fail_null("path");
    return guarded([&] { bevdg::save_ppm(img->img, path); });
}

bevdg_status bevdg_image_resize_bilinear(const bevdg_image* img, int32_t new_h,
                                         int32_t new_w, bevdg_image** out) {
    if (!img) return fail_null("img");
    if (!out) return fail_null("out");
    return guarded([&] {
        auto handle = std::make_unique<bevdg_image>();
        handle->img = bevdg::resize_bilinear(img->img, new_h, new_w);
        *out = handle.release();
    });
}

bevdg_status bevdg_ampaug(const bevdg_image* src, const bevdg_image* tgt, double ratio,
                          bevdg_image** out) {
    if (!src) return fail_null("src");
    if (!tgt) return fail_null("tgt");
    if (!out) return fail_null("out");
    return guarded([&] {
        auto handle = std::make_unique<bevdg_image>();
        handle->img = bevdg::ampaug(src->img, tgt->img, ratio);
        *out = handle.release();
    });
}

bevdg_status bevdg_bank_build(const bevdg_image* const* images, size_t count,
                              bevdg_bank** out) {
    if (!images) return fail_null("images");
    if (!out) return fail_null("out");
    return guarded([&] {
        std::vector<bevdg::Image> imgs;
        imgs.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            if (!images[i]) throw bevdg::InvalidArgument("null image handle in bank input");
            imgs.push_back(images[i]->img);
        }
        *out = new bevdg_bank{bevdg::AmplitudeBank(imgs)};
    });
}

bevdg_status bevdg_bank_build_from_dir(const char* image_dir, bevdg_bank** out) {
    if (!image_dir) return fail_null("image_dir");
    if (!out) return fail_null("out");
    return guarded([&] {
        std::vector<bevdg::Image> imgs;
        for (const std::string& f : ppm_files_sorted(image_dir))
            imgs.push_back(bevdg::load_ppm(f));
        *out = new bevdg_bank{bevdg::AmplitudeBank(imgs)};
    });
}

bevdg_status bevdg_bank_save(const bevdg_bank* bank, const char* path) {
    if (!bank) return fail_null("bank");
    if (!path) return fail_null("path");
    return guarded([&] { bank->bank.save(path); });
}

bevdg_status bevdg_bank_load(const char* path, bevdg_bank** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new bevdg_bank{bevdg::AmplitudeBank::load(path)}; });
}

size_t bevdg_bank_size(const bevdg_bank* bank) { return bank ? bank->bank.size() : 0; }

void bevdg_bank_destroy(bevdg_bank* bank) { delete bank; }

bevdg_status bevdg_ampaug_from_bank(const bevdg_image* src, const bevdg_bank* bank,
                                    size_t index, double ratio, bevdg_image** out) {
    if (!src) return fail_null("src");
    if (!bank) return fail_null("bank");
    if (!out) return fail_null("out");
    return guarded([&] {
        if (index >= bank->bank.size())
            throw bevdg::InvalidArgument("bank index out of range");
        auto handle = std::make_unique<bevdg_image>();
        handle->img =
            bevdg::ampaug_with_amplitude(src->img, bank->bank.entry(index), ratio);
        *out = handle.release();
    });
}

bevdg_status bevdg_augment_dir(const char* in_dir, const char* out_dir,
                               const char* bank_path, double ratio, uint64_t seed) {
    if (!in_dir) return fail_null("in_dir");
    if (!out_dir) return fail_null("out_dir");
    if (!bank_path) return fail_null("bank_path");
    return guarded([&] {
        bevdg::AmplitudeBank bank = bevdg::AmplitudeBank::load(bank_path);
        fs::create_directories(out_dir);
        bevdg::Rng rng(seed);
        for (const std::string& f : ppm_files_sorted(in_dir)) {
            bevdg::Image img = bevdg::load_ppm(f);
            const std::vector<double>& amp = bank.sample(rng);
            bevdg::Image aug = bevdg::ampaug_with_amplitude(img, amp, ratio);
            bevdg::save_ppm(aug, (fs::path(out_dir) / fs::path(f).filename()).string());
        }
    });
}

bevdg_status bevdg_align_images(const bevdg_image* ego, const bevdg_image* const* others,
                                size_t n, bevdg_image** out_aligned) {
    if (!ego) return fail_null("ego");
    if (n > 0 && !others) return fail_null("others");
    if (n > 0 && !out_aligned) return fail_null("out_aligned");
    return guarded([&] {
        std::vector<bevdg::Image> imgs;
        imgs.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            if (!others[i]) throw bevdg::InvalidArgument("null image handle in others");
            imgs.push_back(others[i]->img);
        }
        std::vector<bevdg::Image> aligned = bevdg::align_images(ego->img, imgs);
        for (size_t i = 0; i < n; ++i)
            out_aligned[i] = new bevdg_image{std::move(aligned[i])};
    });
}

bevdg_status bevdg_lab_stats(const bevdg_image* rgb, double mu[3], double sigma[3],
                             int64_t* pixel_count) {
    if (!rgb) return fail_null("rgb");
    if (!mu) return fail_null("mu");
    if (!sigma) return fail_null("sigma");
    return guarded([&] {
        bevdg::LabStats st =
            bevdg::compute_stats(bevdg::rgb_to_lab(rgb->img, bevdg::default_white_point()));
        for (int i = 0; i < 3; ++i) {
            mu[i] = st.mu[i];
            sigma[i] = st.sigma[i];
        }
        if (pixel_count) *pixel_count = st.pixel_count;
    });
}

bevdg_status bevdg_stats_encode(const double mu[3], const double sigma[3],
                                int64_t pixel_count, char* buf, size_t buf_len,
                                size_t* written) {
    if (!mu) return fail_null("mu");
    if (!sigma) return fail_null("sigma");
    std::string msg;
    bevdg_status st = guarded([&] {
        bevdg::LabStats stats;
        for (int i = 0; i < 3; ++i) {
            stats.mu[i] = mu[i];
            stats.sigma[i] = sigma[i];
        }
        stats.pixel_count = pixel_count;
        msg = bevdg::encode_stats(stats);
    });
    if (st != BEVDG_OK) return st;
    return write_string(msg, buf, buf_len, written);
}

bevdg_status bevdg_stats_decode(const char* message, double mu[3], double sigma[3],
                                int64_t* pixel_count) {
    if (!message) return fail_null("message");
    if (!mu) return fail_null("mu");
    if (!sigma) return fail_null("sigma");
    return guarded([&] {
        bevdg::LabStats st = bevdg::decode_stats(message);
        for (int i = 0; i < 3; ++i) {
            mu[i] = st.mu[i];
            sigma[i] = st.sigma[i];
        }
        if (pixel_count) *pixel_count = st.pixel_count;
    });
}

bevdg_status bevdg_align_scene_dir(const char* scene_dir, const char* out_dir,
                                   int32_t ego_index) {
    if (!scene_dir) return fail_null("scene_dir");
    if (!out_dir) return fail_null("out_dir");
    return guarded([&] {
        std::vector<bevdg::Scene> scenes = bevdg::load_scenes(scene_dir);
        for (bevdg::Scene& scene : scenes) {
            int n = static_cast<int>(scene.cav_images.size());
            if (ego_index < 0 || ego_index >= n)
                throw bevdg::InvalidArgument("ego index out of range for scene");
            std::vector<bevdg::Image> others;
            for (int i = 0; i < n; ++i)
                if (i != ego_index) others.push_back(scene.cav_images[i]);
            std::vector<bevdg::Image> aligned =
                bevdg::align_images(scene.cav_images[ego_index], others);
            std::size_t k = 0;
            for (int i = 0; i < n; ++i)
                if (i != ego_index) scene.cav_images[i] = std::move(aligned[k++]);
        }
        bevdg::save_scenes(out_dir, scenes);
    });
}

bevdg_status bevdg_generate_scenes(const char* config_json, const char* domain,
                                   const char* out_dir) {
    if (!out_dir) return fail_null("out_dir");
    return guarded([&] {
        bevdg::ExperimentConfig cfg = config_from(config_json);
        bevdg::DomainTag tag = domain && *domain ? bevdg::domain_tag_from_string(domain)
                                                 : bevdg::DomainTag::kClean;
        std::vector<bevdg::Scene> scenes =
            bevdg::generate_dataset(cfg.dataset, cfg.corruption.jitter);
        if (tag != bevdg::DomainTag::kClean) {
            for (bevdg::Scene& s : scenes) s = bevdg::apply_domain(s, tag, cfg.corruption);
        }
        bevdg::save_scenes(out_dir, scenes);
    });
}

bevdg_status bevdg_train(const char* config_json, const char* out_dir) {
    if (!out_dir) return fail_null("out_dir");
    return guarded([&] {
        bevdg::ExperimentConfig cfg = config_from(config_json);
        fs::create_directories(out_dir);
        std::ofstream trainlog(fs::path(out_dir) / "trainlog.jsonl");
        if (!trainlog)
            throw bevdg::IoError(std::string("cannot write trainlog in ") + out_dir);
        bevdg::ExperimentOutput out =
            bevdg::run_training(cfg, [&](const bevdg::TrainRecord& rec) {
                trainlog << bevdg::train_record_to_json(rec) << "\n";
            });
        std::ofstream cfg_out(fs::path(out_dir) / "config.json");
        cfg_out << bevdg::config_to_json(cfg) << "\n";
        bevdg::save_checkpoint(out.params, (fs::path(out_dir) / "checkpoint.bin").string());
    });
}

bevdg_status bevdg_evaluate(const char* config_json, const char* checkpoint_path,
                            const char* domains_csv, int32_t use_alignment,
                            const char* results_path) {
    if (!checkpoint_path) return fail_null("checkpoint_path");
    if (!results_path) return fail_null("results_path");
    return guarded([&] {
        bevdg::ExperimentConfig cfg = config_from(config_json);
        bevdg::ModelParams params =
            bevdg::load_checkpoint(checkpoint_path, bevdg::ArchConfig{});

        std::vector<bevdg::DomainTag> tags;
        if (domains_csv && *domains_csv) {
            std::string csv = domains_csv;
            std::size_t pos = 0;
            while (pos != std::string::npos) {
                std::size_t comma = csv.find(',', pos);
                std::string name = csv.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos);
                if (!name.empty()) tags.push_back(bevdg::domain_tag_from_string(name));
                pos = comma == std::string::npos ? comma : comma + 1;
            }
        } else {
            tags = bevdg::shifted_domains();
        }

        bevdg::DatasetBundle data =
            bevdg::generate_split_dataset(cfg.dataset, cfg.corruption.jitter);
        auto suite = bevdg::build_domain_suite(data.eval, cfg.corruption, tags);
        bevdg::EvalResult res = bevdg::evaluate(params, suite, use_alignment != 0);

        std::ofstream out(results_path);
        if (!out)
            throw bevdg::IoError(std::string("cannot write results to ") + results_path);
        std::uint64_t hash = bevdg::config_hash(cfg);
        for (const auto& [domain, rep] : res.per_domain) {
            bevdg::ResultsRecord rec{"eval", hash, domain, rep, 0.0};
            out << bevdg::results_record_to_json(rec) << "\n";
        }
    });
}

bevdg_status bevdg_run_experiment(const char* config_json, const char* out_dir) {
    if (!out_dir) return fail_null("out_dir");
    return guarded([&] {
        bevdg::ExperimentConfig cfg = config_from(config_json);
        bevdg::run_and_write(cfg, out_dir);
    });
}

bevdg_status bevdg_run_ablation(const char* config_json, const char* out_dir) {
    if (!out_dir) return fail_null("out_dir");
    return guarded([&] {
        bevdg::ExperimentConfig cfg = config_from(config_json);
        bevdg::run_ablation_grid(cfg, out_dir);
    });
}

bevdg_status bevdg_config_canonical(const char* config_json, char* buf, size_t buf_len,
                                    size_t* written) {
    std::string canonical;
    bevdg_status st =
        guarded([&] { canonical = bevdg::config_to_json(config_from(config_json)); });
    if (st != BEVDG_OK) return st;
    return write_string(canonical, buf, buf_len, written);
}

} // extern "C"
