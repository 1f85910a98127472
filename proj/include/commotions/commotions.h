#ifndef COMMOTIONS_COMMOTIONS_H
#define COMMOTIONS_COMMOTIONS_H

/* C interface of the commotions library. A configuration is an opaque bag of
 * string key=value pairs; cm_run executes one pipeline command against it and
 * writes every result to files under out_dir. All functions are safe to call
 * from multiple threads as long as each cm_config is used by one thread at a
 * time. */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cm_config cm_config;

typedef enum cm_status {
    CM_OK = 0,
    CM_ERR_INVALID_ARGUMENT = 1,
    CM_ERR_IO = 2,
    CM_ERR_PARSE = 3,
    CM_ERR_DOMAIN = 4,
    CM_ERR_NUMERIC = 5,
    CM_ERR_INTERNAL = 6
} cm_status;

/* library version as "major.minor.patch" */
const char* cm_version(void);

/* empty configuration; free with cm_config_free (NULL is ignored there) */
cm_config* cm_config_new(void);
void cm_config_free(cm_config* config);

/* merges "key = value" lines ('#' starts a comment) into the configuration;
 * later assignments win */
cm_status cm_config_parse_text(cm_config* config, const char* text);
cm_status cm_config_parse_file(cm_config* config, const char* file);

/* sets one key, overriding any earlier value */
cm_status cm_config_set(cm_config* config, const char* key, const char* value);

/* runs "synth", "fit", "predict", "evaluate" or "compare"; outputs go under
 * out_dir, which is created if needed */
cm_status cm_run(const cm_config* config, const char* command, const char* out_dir);

/* message of the most recent failure on the calling thread, "" if none */
const char* cm_last_error(void);

#ifdef __cplusplus
}
#endif

#endif
