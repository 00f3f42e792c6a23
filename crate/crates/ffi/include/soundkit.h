#ifndef SOUNDKIT_H
#define SOUNDKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result codes. `SOUNDKIT_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum SoundkitStatus {
  SOUNDKIT_STATUS_OK = 0,
  SOUNDKIT_STATUS_NULL_ARGUMENT = 1,
  SOUNDKIT_STATUS_INVALID_UTF8 = 2,
  SOUNDKIT_STATUS_IO = 3,
  SOUNDKIT_STATUS_SCHEMA = 4,
  SOUNDKIT_STATUS_PARSE = 5,
  SOUNDKIT_STATUS_MEDIA = 6,
  SOUNDKIT_STATUS_INVALID_ANNOTATION = 7,
  SOUNDKIT_STATUS_UNKNOWN_DATASET = 8,
  SOUNDKIT_STATUS_UNKNOWN_CLIP = 9,
  SOUNDKIT_STATUS_UNKNOWN_FIELD = 10,
  SOUNDKIT_STATUS_ABSENT_FIELD = 11,
  SOUNDKIT_STATUS_WRONG_KIND = 12,
  SOUNDKIT_STATUS_OUT_OF_RANGE = 13,
  SOUNDKIT_STATUS_NETWORK = 14,
  SOUNDKIT_STATUS_CHECKSUM_MISMATCH = 15,
  SOUNDKIT_STATUS_ARCHIVE = 16,
  SOUNDKIT_STATUS_PATH_TRAVERSAL = 17,
  SOUNDKIT_STATUS_UNKNOWN_REMOTE = 18,
  SOUNDKIT_STATUS_USAGE = 19,
  SOUNDKIT_STATUS_PANIC = 20,
  SOUNDKIT_STATUS_OTHER = 21,
} SoundkitStatus;

/*
 Decoded audio of one clip field.
 */
typedef struct SoundkitAudio SoundkitAudio;

/*
 An open dataset.
 */
typedef struct SoundkitDataset SoundkitDataset;

/*
 Timed events of one clip field.
 */
typedef struct SoundkitEvents SoundkitEvents;

/*
 Clip-level tags of one clip field.
 */
typedef struct SoundkitTags SoundkitTags;

/*
 Message of the last failure on this thread, or NULL after a success.
 Valid until the next soundkit call on the same thread.
 */
const char *soundkit_last_error_message(void);

/*
 Library version as a static string.
 */
const char *soundkit_version(void);

/*
 Releases a string returned through a `char **` out-parameter.

 # Safety
 `s` must come from this library and not have been freed; NULL is ignored.
 */
void soundkit_string_free(char *s);

/*
 Opens a registered dataset by id. `data_home` may be NULL, in which case
 it resolves like the command line: `$SOUNDKIT_DATA_HOME/<id>`, else
 `~/sound_datasets/<id>`.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum SoundkitStatus soundkit_dataset_open(const char *id,
                                          const char *data_home,
                                          struct SoundkitDataset **out);

/*
 Opens the dataset described by the manifest file at `manifest_path`,
 with its files under `data_home`.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum SoundkitStatus soundkit_dataset_open_manifest(const char *manifest_path,
                                                   const char *data_home,
                                                   struct SoundkitDataset **out);

/*
 # Safety
 `dataset` must come from an open function and not have been freed; NULL
 is ignored.
 */
void soundkit_dataset_free(struct SoundkitDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle; `out` must be writable.
 */
enum SoundkitStatus soundkit_dataset_clip_count(const struct SoundkitDataset *dataset, size_t *out);

/*
 Clip id at `index` in bytewise-sorted order. The string is borrowed from
 the dataset handle.

 # Safety
 `dataset` must be a live handle; `out` must be writable.
 */
enum SoundkitStatus soundkit_dataset_clip_id(const struct SoundkitDataset *dataset,
                                             size_t index,
                                             const char **out);

/*
 Absolute path of a clip field. Fails with `SOUNDKIT_STATUS_ABSENT_FIELD`
 for a null-pair field.

 # Safety
 `dataset` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_clip_path(const struct SoundkitDataset *dataset,
                                               const char *clip,
                                               const char *field,
                                               char **out);

/*
 Validates the local copy. Writes the canonical report document to
 `out_json` and 1 or 0 to `out_clean`. `fast` non-zero checks existence
 only.

 # Safety
 `dataset` must be a live handle; out-parameters writable.
 */
enum SoundkitStatus soundkit_dataset_validate(const struct SoundkitDataset *dataset,
                                              int fast,
                                              char **out_json,
                                              int *out_clean);

/*
 Downloads the dataset's remotes into its data home. `partial` is NULL for
 all remotes or a comma-separated list of remote names. Bytes fetched are
 written to `out_bytes` when it is not NULL.

 # Safety
 `dataset` must be a live handle; `partial` NULL or NUL-terminated.
 */
enum SoundkitStatus soundkit_dataset_download(const struct SoundkitDataset *dataset,
                                              const char *partial,
                                              int force,
                                              uint64_t *out_bytes);

/*
 Citation text.

 # Safety
 `dataset` must be a live handle; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_cite(const struct SoundkitDataset *dataset, char **out);

/*
 # Safety
 `dataset` must be a live handle; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_license(const struct SoundkitDataset *dataset, char **out);

/*
 Parses a field bound as `events`.

 # Safety
 `dataset` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_events(const struct SoundkitDataset *dataset,
                                            const char *clip,
                                            const char *field,
                                            struct SoundkitEvents **out);

/*
 Number of events; 0 for NULL.

 # Safety
 `events` must be NULL or a live handle.
 */
size_t soundkit_events_len(const struct SoundkitEvents *events);

/*
 Event at `index`. `label` is borrowed from the handle. `confidence` is
 set only when `has_confidence` comes back 1. Any out-pointer may be NULL.

 # Safety
 `events` must be a live handle; non-NULL out-pointers writable.
 */
enum SoundkitStatus soundkit_events_get(const struct SoundkitEvents *events,
                                        size_t index,
                                        double *onset,
                                        double *offset,
                                        const char **label,
                                        double *confidence,
                                        int *has_confidence);

/*
 # Safety
 `events` must come from `soundkit_dataset_events`; NULL is ignored.
 */
void soundkit_events_free(struct SoundkitEvents *events);

/*
 Parses a field bound as `tags`.

 # Safety
 `dataset` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_tags(const struct SoundkitDataset *dataset,
                                          const char *clip,
                                          const char *field,
                                          struct SoundkitTags **out);

/*
 Number of tags; 0 for NULL.

 # Safety
 `tags` must be NULL or a live handle.
 */
size_t soundkit_tags_len(const struct SoundkitTags *tags);

/*
 Tag at `index`; see `soundkit_events_get` for the out-parameter rules.

 # Safety
 `tags` must be a live handle; non-NULL out-pointers writable.
 */
enum SoundkitStatus soundkit_tags_get(const struct SoundkitTags *tags,
                                      size_t index,
                                      const char **label,
                                      double *confidence,
                                      int *has_confidence);

/*
 # Safety
 `tags` must come from `soundkit_dataset_tags`; NULL is ignored.
 */
void soundkit_tags_free(struct SoundkitTags *tags);

/*
 Decodes a field bound as `audio_wav`.

 # Safety
 `dataset` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum SoundkitStatus soundkit_dataset_audio(const struct SoundkitDataset *dataset,
                                           const char *clip,
                                           const char *field,
                                           struct SoundkitAudio **out);

/*
 Sample rate in Hz, channel count and frames per channel. Any out-pointer
 may be NULL.

 # Safety
 `audio` must be a live handle; non-NULL out-pointers writable.
 */
enum SoundkitStatus soundkit_audio_info(const struct SoundkitAudio *audio,
                                        uint32_t *sample_rate,
                                        size_t *channels,
                                        size_t *frames);

/*
 Samples of one channel in [-1, 1], borrowed from the handle; the slice
 has as many elements as `frames` from `soundkit_audio_info`.

 # Safety
 `audio` must be a live handle; `out` writable.
 */
enum SoundkitStatus soundkit_audio_channel(const struct SoundkitAudio *audio,
                                           size_t channel,
                                           const float **out);

/*
 # Safety
 `audio` must come from `soundkit_dataset_audio`; NULL is ignored.
 */
void soundkit_audio_free(struct SoundkitAudio *audio);

#endif  /* SOUNDKIT_H */
