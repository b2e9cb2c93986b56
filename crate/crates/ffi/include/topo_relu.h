#ifndef TOPO_RELU_H
#define TOPO_RELU_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_INVALID_INPUT = 1,
  TR_STATUS_DIMENSION_MISMATCH = 2,
  TR_STATUS_COMPOSITION = 3,
  TR_STATUS_PRECONDITION = 4,
  TR_STATUS_VALIDATION = 5,
  TR_STATUS_SHELL = 6,
  TR_STATUS_GEOMETRY = 7,
  TR_STATUS_IO = 8,
  TR_STATUS_PARSE = 9,
  TR_STATUS_NULL_POINTER = 10,
  TR_STATUS_BUFFER_TOO_SMALL = 11,
  TR_STATUS_PANIC = 12,
} TrStatus;

// Opaque simplicial complex.
typedef struct TrComplex TrComplex;

// Opaque ReLU network.
typedef struct TrNetwork TrNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message (NUL-terminated, truncated to fit) into
// `buf` and returns the full message length without the terminator.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t tr_last_error_message(char *buf, size_t cap);

// Indicator network of the ball of radius `r` around `center` (length `d`).
// The shell is certified under the uniform measure on the ball's bounding
// box enlarged by 1.
//
// # Safety
// `center` must point to `d` doubles and `out` must be writable.
enum TrStatus tr_ball_network(size_t d,
                              double r,
                              const double *center,
                              double eps,
                              struct TrNetwork **out);

// Indicator network of the solid torus with tube radius `r` and centre
// radius `big_r` (an annulus when `d = 2`).
//
// # Safety
// `center` must point to `d` doubles and `out` must be writable.
enum TrStatus tr_torus_network(size_t d,
                               double r,
                               double big_r,
                               const double *center,
                               double eps,
                               struct TrNetwork **out);

// Parses a network from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum TrStatus tr_network_from_json(const char *json, struct TrNetwork **out);

// Writes the network's JSON form into `buf` (NUL-terminated) and its
// length into `len`. Fails with `BufferTooSmall` if `cap <= len`; `len` is
// still set so the caller can retry.
//
// # Safety
// `net` must be a live handle, `buf` null or `cap` writable bytes, `len` writable.
enum TrStatus tr_network_to_json(const struct TrNetwork *net, char *buf, size_t cap, size_t *len);

// Evaluates a network at `x` (length `n`), writing its outputs to `y`
// (capacity `cap`).
//
// # Safety
// `net` must be a live handle; `x` must hold `n` doubles and `y` `cap`.
enum TrStatus tr_network_eval(const struct TrNetwork *net,
                              const double *x,
                              size_t n,
                              double *y,
                              size_t cap);

// Hidden-unit count, affine-layer count and input dimension.
//
// # Safety
// `net` must be a live handle; the out-pointers may be null.
enum TrStatus tr_network_shape(const struct TrNetwork *net,
                               size_t *size,
                               size_t *depth,
                               size_t *input_dim);

// # Safety
// `net` must be null or a handle not yet freed.
void tr_network_free(struct TrNetwork *net);

// Parses a complex (one simplex per line, vertex ids separated by spaces).
//
// # Safety
// `src` must be a NUL-terminated string and `out` writable.
enum TrStatus tr_complex_parse(const char *src, struct TrComplex **out);

// Cech complex of `n` points in `R^dim` (row-major in `points`) at radius
// `r` with simplices up to dimension `max_dim`.
//
// # Safety
// `points` must hold `n * dim` doubles and `out` must be writable.
enum TrStatus tr_cech_complex(const double *points,
                              size_t n,
                              size_t dim,
                              double r,
                              size_t max_dim,
                              struct TrComplex **out);

// Total number of simplices.
//
// # Safety
// `k` must be a live handle and `count` writable.
enum TrStatus tr_complex_num_simplices(const struct TrComplex *k, size_t *count);

// Betti numbers over GF(2). `len` receives the number of entries; fails
// with `BufferTooSmall` when `cap` is smaller.
//
// # Safety
// `k` must be a live handle, `betti` hold `cap` entries, `len` writable.
enum TrStatus tr_complex_betti(const struct TrComplex *k, size_t *betti, size_t cap, size_t *len);

// # Safety
// `k` must be null or a handle not yet freed.
void tr_complex_free(struct TrComplex *k);

// Number of samples sufficient to recover the homology of a `d`-manifold
// of volume `vol` and reach `tau` from `eps`-balls with confidence
// `1 - delta`. Requires `0 < eps < tau / 2`.
//
// # Safety
// `n_required` must be writable; `value` may be null.
enum TrStatus tr_sample_size_bound(double vol,
                                   size_t d,
                                   double tau,
                                   double eps,
                                   double delta,
                                   uint64_t *n_required,
                                   double *value);

// Library version as a static NUL-terminated string.
const char *tr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPO_RELU_H */
