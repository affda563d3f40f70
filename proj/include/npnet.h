#ifndef NPNET_H
#define NPNET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Flat C interface over the library: opaque handles and status codes.
 * Every call that can fail returns a status; the message for the most
 * recent failure on the calling thread is available via npnet_last_error. */

typedef enum {
    NPNET_OK = 0,
    NPNET_ERR_INVALID = 1, /* bad argument or precondition */
    NPNET_ERR_IO = 2,      /* file missing, malformed, or unwritable */
    NPNET_ERR_RUNTIME = 3  /* numeric failure or internal invariant */
} npnet_status;

typedef struct npnet_dataset npnet_dataset;
typedef struct npnet_model npnet_model;

const char* npnet_last_error(void);
const char* npnet_version(void);

/* ---- datasets ---- */
npnet_status npnet_dataset_load_idx(const char* images_path, const char* labels_path,
                                    npnet_dataset** out);
npnet_status npnet_dataset_save_idx(const npnet_dataset* ds, const char* images_path,
                                    const char* labels_path);
npnet_status npnet_dataset_synth_blobs(int classes, int p, int n, double noise, uint64_t seed,
                                       npnet_dataset** out);
npnet_status npnet_dataset_synth_moons(int n, double noise, uint64_t seed, npnet_dataset** out);
npnet_status npnet_dataset_subset(const npnet_dataset* ds, int n, uint64_t seed,
                                  npnet_dataset** out);
int npnet_dataset_size(const npnet_dataset* ds);
int npnet_dataset_classes(const npnet_dataset* ds);
npnet_status npnet_dataset_fingerprint(const npnet_dataset* ds, char* buf, size_t buf_len);
void npnet_dataset_free(npnet_dataset* ds);

/* ---- training ----
 * arch: "mnist" (conv encoder, 28x28x1 input) or "mlp" (flat input).
 * bottleneck: "fc" or "np". Remaining options come as key=value pairs:
 * alpha, lr, epochs, batch, graph_k, neg_samples, seed, momentum,
 * init_embed_epochs, adv_eps, adv_iters (see the config file format).
 * loss_csv may be NULL; when set, per-epoch losses are written there. */
npnet_status npnet_train(const npnet_dataset* ds, const char* arch, const char* bottleneck,
                         int dim, const char* const* keys, const char* const* vals, int nkv,
                         const char* loss_csv, npnet_model** out);

/* ---- models ---- */
npnet_status npnet_model_load(const char* prefix, npnet_model** out);
npnet_status npnet_model_save(const npnet_model* m, const char* prefix);
int npnet_model_is_np(const npnet_model* m);
void npnet_model_free(npnet_model* m);

/* Clean accuracy over a dataset. */
npnet_status npnet_model_accuracy(const npnet_model* m, const npnet_dataset* ds, double* out);
/* Accuracy under a projected sign-gradient attack (eps = 0 means clean). */
npnet_status npnet_model_attack_accuracy(const npnet_model* m, const npnet_dataset* ds,
                                         double eps, double step, int iters, int random_start,
                                         uint64_t seed, double* out);
/* Mean best-of-trajectory attack loss minus clean loss. */
npnet_status npnet_model_distortion_gap(const npnet_model* m, const npnet_dataset* ds,
                                        double eps, double step, int iters, double* out);
/* Replace the reference table with per-class cluster representatives. */
npnet_status npnet_model_compress(const npnet_model* m, const npnet_dataset* train_ds,
                                  int clusters_per_class, uint64_t seed, npnet_model** out);

/* ---- analysis ---- */
typedef struct {
    double C1, C2, C4, C5, T1, T2;
    int points, probes, excluded, violations;
    int ridge_applied;
} npnet_bound_report;

/* Probes the model's reference table at n_points sampled reference keys. */
npnet_status npnet_model_np_bound_check(const npnet_model* m, int n_points, int n_dirs,
                                        double h_step, uint64_t seed, npnet_bound_report* out);
/* Gaussian X [n x p], sparse linear Y [n x d]; least-squares norm bound. */
npnet_status npnet_fc_synth_check(int n, int p, int d, uint64_t seed, npnet_bound_report* out);
npnet_status npnet_ball_overlap(int p, double r, double eps, double* out);

/* Graph-loss-only embedding init over a flat dataset; writes one CSV row per
 * point: label,coord_0,...,coord_{dim-1}. */
npnet_status npnet_init_embed(const npnet_dataset* ds, int dim, const char* const* keys,
                              const char* const* vals, int nkv, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* NPNET_H */
