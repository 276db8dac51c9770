#ifndef LEFTRS_H
#define LEFTRS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LeftrsStatus {
  LEFTRS_STATUS_OK = 0,
  LEFTRS_STATUS_NULL_POINTER = 1,
  LEFTRS_STATUS_INVALID_UTF8 = 2,
  LEFTRS_STATUS_INVALID_INPUT = 3,
  LEFTRS_STATUS_OUT_OF_RANGE = 4,
  LEFTRS_STATUS_PANIC = 5,
} LeftrsStatus;

typedef enum LeftrsProtocol {
  LEFTRS_PROTOCOL_LEFT_RS = 0,
  LEFTRS_PROTOCOL_MSRP_FT = 1,
  LEFTRS_PROTOCOL_MSRP_FT_OF = 2,
  LEFTRS_PROTOCOL_CHECKPOINTING = 3,
} LeftrsProtocol;

/*
 Opaque analysis result.
 */
typedef struct LeftrsAnalysis LeftrsAnalysis;

/*
 Opaque task system.
 */
typedef struct LeftrsSystem LeftrsSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *leftrs_last_error(void);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void leftrs_string_free(char *s);

/*
 Parses and validates a system from JSON.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LeftrsStatus leftrs_system_from_json(const char *json, struct LeftrsSystem **out);

/*
 Generates a system. `config_json` may be null for the defaults; `seed`
 overrides the configuration's seed.

 # Safety
 `config_json` must be null or NUL-terminated; `out` must be writable.
 */
enum LeftrsStatus leftrs_system_generate(const char *config_json,
                                         uint64_t seed,
                                         struct LeftrsSystem **out);

/*
 # Safety
 `system` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_system_to_json(const struct LeftrsSystem *system, char **out);

/*
 # Safety
 `system` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_system_task_count(const struct LeftrsSystem *system, size_t *out);

/*
 # Safety
 `system` must be null or a handle not yet freed.
 */
void leftrs_system_free(struct LeftrsSystem *system);

/*
 Analysis with the measured overheads (1, 6 and 1 microseconds).

 # Safety
 `system` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analyze(const struct LeftrsSystem *system,
                                 enum LeftrsProtocol protocol,
                                 struct LeftrsAnalysis **out);

/*
 # Safety
 `system` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analyze_with_overheads(const struct LeftrsSystem *system,
                                                enum LeftrsProtocol protocol,
                                                uint64_t o_wrap,
                                                uint64_t o_replica,
                                                uint64_t o_self_wrap,
                                                struct LeftrsAnalysis **out);

/*
 # Safety
 `analysis` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analysis_schedulable(const struct LeftrsAnalysis *analysis, bool *out);

/*
 # Safety
 `analysis` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analysis_task_count(const struct LeftrsAnalysis *analysis, size_t *out);

/*
 Response-time bound of the task at position `index` (system order).

 # Safety
 `analysis` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analysis_response_time(const struct LeftrsAnalysis *analysis,
                                                size_t index,
                                                uint64_t *out);

/*
 # Safety
 `analysis` must be a live handle; `out` must be writable.
 */
enum LeftrsStatus leftrs_analysis_to_json(const struct LeftrsAnalysis *analysis, char **out);

/*
 # Safety
 `analysis` must be null or a handle not yet freed.
 */
void leftrs_analysis_free(struct LeftrsAnalysis *analysis);

/*
 Simulates and returns the run summary as JSON. `pattern` is
 `periodic` or `sporadic:<seed>`; `faults` is null or `none` for a
 fault-free run, `seed:<n>` for randomized faults, or the text of a
 fault file. A `horizon_us` of 0 means the largest deadline.

 # Safety
 `system` must be a live handle, string arguments NUL-terminated or null
 where allowed, and `out` writable.
 */
enum LeftrsStatus leftrs_simulate_summary(const struct LeftrsSystem *system,
                                          enum LeftrsProtocol protocol,
                                          const char *pattern,
                                          const char *faults,
                                          uint64_t horizon_us,
                                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEFTRS_H */
