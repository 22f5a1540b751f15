#ifndef BEVDG_CAPI_H
#define BEVDG_CAPI_H

/* C interface to the bevdg core: opaque handles plus status codes. Every
 * function returning bevdg_status sets a thread-local message readable via
 * bevdg_last_error() on failure. Handles returned through out-parameters are
 * owned by the caller and released with the matching _destroy function. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bevdg_status {
    BEVDG_OK = 0,
    BEVDG_ERR_NULL_POINTER = 1,
    BEVDG_ERR_INVALID_ARGUMENT = 2,
    BEVDG_ERR_IO = 3,
    BEVDG_ERR_FORMAT = 4,
    BEVDG_ERR_INTERNAL = 5
} bevdg_status;

/* Thread-local message describing the most recent failure in this thread. */
const char* bevdg_last_error(void);
void bevdg_clear_last_error(void);

void bevdg_version(int32_t* major, int32_t* minor);

/* ---- images ---- */

typedef struct bevdg_image bevdg_image;

/* data may be NULL for a zero-filled image; otherwise it holds
 * height*width*channels doubles in planar row-major order. */
bevdg_status bevdg_image_create(int32_t height, int32_t width, int32_t channels,
                                const double* data, bevdg_image** out);
void bevdg_image_destroy(bevdg_image* img);

int32_t bevdg_image_height(const bevdg_image* img);
int32_t bevdg_image_width(const bevdg_image* img);
int32_t bevdg_image_channels(const bevdg_image* img);

/* Copies all values into buf (buf_len must be >= height*width*channels). */
bevdg_status bevdg_image_read(const bevdg_image* img, double* buf, size_t buf_len);

bevdg_status bevdg_image_load_ppm(const char* path, bevdg_image** out);
bevdg_status bevdg_image_save_ppm(const bevdg_image* img, const char* path);
bevdg_status bevdg_image_resize_bilinear(const bevdg_image* img, int32_t new_h,
                                         int32_t new_w, bevdg_image** out);

/* ---- amplitude augmentation ---- */

typedef struct bevdg_bank bevdg_bank;

bevdg_status bevdg_ampaug(const bevdg_image* src, const bevdg_image* tgt, double ratio,
                          bevdg_image** out);

bevdg_status bevdg_bank_build(const bevdg_image* const* images, size_t count,
                              bevdg_bank** out);
/* Builds a bank from every .ppm file (sorted by name) in a directory. */
bevdg_status bevdg_bank_build_from_dir(const char* image_dir, bevdg_bank** out);
bevdg_status bevdg_bank_save(const bevdg_bank* bank, const char* path);
bevdg_status bevdg_bank_load(const char* path, bevdg_bank** out);
size_t bevdg_bank_size(const bevdg_bank* bank);
void bevdg_bank_destroy(bevdg_bank* bank);

/* Augments src with bank entry `index` as the amplitude donor. */
bevdg_status bevdg_ampaug_from_bank(const bevdg_image* src, const bevdg_bank* bank,
                                    size_t index, double ratio, bevdg_image** out);

/* Augments every .ppm in in_dir against bank entries sampled uniformly from
 * the given seed; writes same-named files into out_dir. */
bevdg_status bevdg_augment_dir(const char* in_dir, const char* out_dir,
                               const char* bank_path, double ratio, uint64_t seed);

/* ---- intra-system alignment ---- */

/* Translates each of the n other images toward the ego's LAB statistics.
 * out_aligned must hold n slots; each written handle is caller-owned. */
bevdg_status bevdg_align_images(const bevdg_image* ego, const bevdg_image* const* others,
                                size_t n, bevdg_image** out_aligned);

bevdg_status bevdg_lab_stats(const bevdg_image* rgb, double mu[3], double sigma[3],
                             int64_t* pixel_count);

/* Canonical stats message; written string is NUL-terminated. */
bevdg_status bevdg_stats_encode(const double mu[3], const double sigma[3],
                                int64_t pixel_count, char* buf, size_t buf_len,
                                size_t* written);
bevdg_status bevdg_stats_decode(const char* message, double mu[3], double sigma[3],
                                int64_t* pixel_count);

/* Applies the alignment protocol to every scene in a scene directory and
 * writes the aligned scenes to out_dir. */
bevdg_status bevdg_align_scene_dir(const char* scene_dir, const char* out_dir,
                                   int32_t ego_index);

/* ---- experiment pipeline (JSON-config driven) ---- */

/* config_json may be NULL or "" for the built-in defaults. */

/* Writes a scene directory (manifest + PPMs). domain is one of clean, sunny,
 * fog, rain, night; NULL means clean. */
bevdg_status bevdg_generate_scenes(const char* config_json, const char* domain,
                                   const char* out_dir);

/* Trains per the config toggles; writes checkpoint.bin, trainlog.jsonl and
 * config.json under out_dir. */
bevdg_status bevdg_train(const char* config_json, const char* out_dir);

/* Evaluates a checkpoint on the requested comma-separated domains (NULL for
 * all four shifted ones); writes one JSON record per domain to results_path. */
bevdg_status bevdg_evaluate(const char* config_json, const char* checkpoint_path,
                            const char* domains_csv, int32_t use_alignment,
                            const char* results_path);

/* Full pipeline: generate, train, evaluate; artifacts under out_dir. */
bevdg_status bevdg_run_experiment(const char* config_json, const char* out_dir);

/* All 2^3 toggle combinations, one run directory per combination. */
bevdg_status bevdg_run_ablation(const char* config_json, const char* out_dir);

/* Canonical form (defaults filled in, keys sorted) of a config; useful for
 * inspecting what a run will actually use. Written string is NUL-terminated. */
bevdg_status bevdg_config_canonical(const char* config_json, char* buf, size_t buf_len,
                                    size_t* written);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BEVDG_CAPI_H */
