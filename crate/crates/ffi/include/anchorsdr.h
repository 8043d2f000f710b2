#ifndef ANCHORSDR_H
#define ANCHORSDR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AsdrStatus {
  ASDR_STATUS_OK = 0,
  ASDR_STATUS_NULL_POINTER = 1,
  ASDR_STATUS_INVALID_ARGUMENT = 2,
  ASDR_STATUS_CONFIG = 3,
  ASDR_STATUS_NUMERICAL = 4,
  ASDR_STATUS_IO = 5,
  ASDR_STATUS_PANIC = 6,
} AsdrStatus;

typedef enum AsdrTurboMode {
  ASDR_TURBO_MODE_MULTI = 0,
  ASDR_TURBO_MODE_SINGLE = 1,
  ASDR_TURBO_MODE_FULL_LIST = 2,
} AsdrTurboMode;

// Records produced by [`asdr_experiment_run_ber`].
typedef struct AsdrBerResult AsdrBerResult;

// An LDPC code.
typedef struct AsdrCode AsdrCode;

// A validated experiment ready to run.
typedef struct AsdrExperiment AsdrExperiment;

typedef struct AsdrBerRecord {
  double snr_db;
  size_t iteration;
  size_t codewords;
  size_t bits;
  size_t bit_errors;
  double ber;
  double avg_runtime_s;
  size_t info_bits;
  size_t info_bit_errors;
  size_t failed_codewords;
} AsdrBerRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *asdr_last_error(void);

// Random regular code with `n` bits, `checks` rows and column weight
// `column_weight`.
//
// # Safety
// `out` must be valid for writing one pointer.
enum AsdrStatus asdr_code_new_regular(size_t n,
                                      size_t checks,
                                      size_t column_weight,
                                      uint64_t seed,
                                      struct AsdrCode **out);

// Reads a code from an alist file.
//
// # Safety
// `path` must be a NUL-terminated string, `out` valid for one pointer.
enum AsdrStatus asdr_code_from_alist(const char *path, struct AsdrCode **out);

// # Safety
// `code` must come from this library and not be used afterwards.
void asdr_code_free(struct AsdrCode *code);

// Code length, or 0 for a null handle.
//
// # Safety
// `code` must be null or a live handle.
size_t asdr_code_n(const struct AsdrCode *code);

// Code dimension, or 0 for a null handle.
//
// # Safety
// `code` must be null or a live handle.
size_t asdr_code_k(const struct AsdrCode *code);

// Encodes `k` information bits into `n` codeword bits.
//
// # Safety
// Buffers must hold `info_len` and `codeword_len` bytes.
enum AsdrStatus asdr_code_encode(const struct AsdrCode *code,
                                 const uint8_t *info,
                                 size_t info_len,
                                 uint8_t *codeword,
                                 size_t codeword_len);

// # Safety
// `bits` must hold `len` bytes; `satisfied` must be writable.
enum AsdrStatus asdr_code_check_parity(const struct AsdrCode *code,
                                       const uint8_t *bits,
                                       size_t len,
                                       bool *satisfied);

// Sum-product decoding of channel LLRs (positive favours bit 0).
//
// # Safety
// `llr` and `hard` must hold `len` elements; `parity_ok` may be null.
enum AsdrStatus asdr_spa_decode(const struct AsdrCode *code,
                                const double *llr,
                                size_t len,
                                size_t max_iter,
                                uint8_t *hard,
                                bool *parity_ok);

// Iterative SDR detection and decoding of one codeword with default turbo
// settings. `channels` holds `n / (2 nt)` real channel matrices of size
// `2 nr x 2 nt`, row-major, back to back; `received` the matching real
// vectors of length `2 nr`.
//
// # Safety
// Buffers must match the sizes above; `decoded` must hold `n` bytes and
// `iterations` may be null.
enum AsdrStatus asdr_turbo_decode(const struct AsdrCode *code,
                                  size_t nt,
                                  size_t nr,
                                  enum AsdrTurboMode mode,
                                  const double *channels,
                                  const double *received,
                                  double noise_var,
                                  uint8_t *decoded,
                                  size_t *iterations);

// Parses and validates a TOML experiment description.
//
// # Safety
// `toml` must be a NUL-terminated string, `out` valid for one pointer.
enum AsdrStatus asdr_experiment_from_toml(const char *toml, struct AsdrExperiment **out);

// # Safety
// `exp` must come from this library and not be used afterwards.
void asdr_experiment_free(struct AsdrExperiment *exp);

// Runs the configured BER sweep.
//
// # Safety
// `exp` must be a live handle, `out` valid for one pointer.
enum AsdrStatus asdr_experiment_run_ber(const struct AsdrExperiment *exp,
                                        struct AsdrBerResult **out);

// Number of records, or 0 for a null handle.
//
// # Safety
// `res` must be null or a live handle.
size_t asdr_ber_result_len(const struct AsdrBerResult *res);

// # Safety
// `res` must be a live handle and `out` writable.
enum AsdrStatus asdr_ber_result_get(const struct AsdrBerResult *res,
                                    size_t index,
                                    struct AsdrBerRecord *out);

// # Safety
// `res` must come from this library and not be used afterwards.
void asdr_ber_result_free(struct AsdrBerResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANCHORSDR_H */
