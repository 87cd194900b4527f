#ifndef NR_PDCCH_H
#define NR_PDCCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NrStatus {
  NR_STATUS_OK = 0,
  NR_STATUS_NULL_POINTER = 1,
  NR_STATUS_INVALID_ARGUMENT = 2,
  NR_STATUS_PARSE = 3,
  NR_STATUS_VALIDATION = 4,
  NR_STATUS_BUFFER_TOO_SMALL = 5,
  NR_STATUS_NOT_FOUND = 6,
  NR_STATUS_PANIC = 7,
} NrStatus;

/**
 * Opaque cell configuration.
 */
typedef struct NrCell NrCell;

/**
 * Opaque codec suite.
 */
typedef struct NrCodec NrCodec;

typedef struct NrCandidate {
  uint8_t ss_index;
  /**
   * 0 for a common search space, 1 for UE-specific.
   */
  uint8_t ss_type;
  uint8_t coreset;
  uint8_t aggregation_level;
  uint32_t candidate_index;
  uint32_t first_cce;
  uint8_t start_symbol;
} NrCandidate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to fit). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t nr_last_error_message(char *buf, size_t len);

/**
 * Parses a TOML cell configuration. The cell is not validated; see
 * [`nr_cell_validate`].
 *
 * # Safety
 * `toml` must be a valid NUL-terminated string; `out` must be valid for a
 * pointer write.
 */
enum NrStatus nr_cell_from_toml(const char *toml, struct NrCell **out);

/**
 * # Safety
 * `cell` must be null or a handle from [`nr_cell_from_toml`] not yet freed.
 */
void nr_cell_free(struct NrCell *cell);

/**
 * Writes the number of configuration violations to `count`. Returns
 * `NR_STATUS_VALIDATION` when it is non-zero, with the first violation as the
 * error message.
 *
 * # Safety
 * `cell` must be a live handle; `count` must be valid for writes.
 */
enum NrStatus nr_cell_validate(const struct NrCell *cell, size_t *count);

/**
 * # Safety
 * `cell` must be a live handle; `out` must be valid for writes.
 */
enum NrStatus nr_cell_num_cces(const struct NrCell *cell, uint8_t coreset, uint32_t *out);

/**
 * Enumerates the PDCCH candidates of `rnti` in `slot`. `written` receives the
 * total count; when it exceeds `cap` nothing is written to `buf` and
 * `NR_STATUS_BUFFER_TOO_SMALL` is returned, so a call with `cap = 0` sizes
 * the buffer.
 *
 * # Safety
 * `cell` must be a live handle; `buf` must be valid for `cap` elements (may be
 * null when `cap` is 0); `written` must be valid for writes.
 */
enum NrStatus nr_candidates(const struct NrCell *cell,
                            uint16_t rnti,
                            uint64_t slot,
                            struct NrCandidate *buf,
                            size_t cap,
                            size_t *written);

/**
 * Per-slot blind-decode and CCE limits of a single serving cell.
 *
 * # Safety
 * `candidates` and `cces` must be valid for writes.
 */
enum NrStatus nr_non_ca_limits(uint8_t mu, uint32_t *candidates, uint32_t *cces);

/**
 * Default codec suite. Never returns null.
 */
struct NrCodec *nr_codec_new(void);

/**
 * # Safety
 * `codec` must be null or a handle from [`nr_codec_new`] not yet freed.
 */
void nr_codec_free(struct NrCodec *codec);

/**
 * Encodes a DCI into `54·level` QPSK symbols, written to `iq` as interleaved
 * (re, im) pairs. `iq_cap` counts doubles and must be at least `108·level`.
 *
 * # Safety
 * `codec` must be a live handle; `payload` valid for `nbits` reads; `iq` valid
 * for `iq_cap` writes.
 */
enum NrStatus nr_encode(const struct NrCodec *codec,
                        const uint8_t *payload,
                        size_t nbits,
                        uint16_t rnti,
                        uint8_t level,
                        uint32_t c_init,
                        double *iq,
                        size_t iq_cap);

/**
 * Blind-decodes `nsym` symbols (interleaved re, im) under one payload-size
 * hypothesis. On success writes `nbits` payload bits to `payload` and returns
 * `NR_STATUS_OK`; a CRC failure returns `NR_STATUS_NOT_FOUND`.
 *
 * # Safety
 * `codec` must be a live handle; `iq` valid for `2·nsym` reads; `payload`
 * valid for `nbits` writes.
 */
enum NrStatus nr_blind_decode(const struct NrCodec *codec,
                              const double *iq,
                              size_t nsym,
                              size_t nbits,
                              uint16_t rnti,
                              uint32_t c_init,
                              uint8_t *payload);

/**
 * Writes `len` bits of the Gold sequence for `c_init` to `out`.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum NrStatus nr_gold_sequence(uint32_t c_init, uint8_t *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NR_PDCCH_H */
