#include "commotions/commotions.h"

#include <string>

#include "runner.hpp"
#include "util/error.hpp"
#include "util/kv.hpp"

struct cm_config {
    commotions::Config cfg;
};

namespace {

thread_local std::string last_error;

cm_status status_of(commotions::Error::Code code) {
    using Code = commotions::Error::Code;
    switch (code) {
        case Code::invalid_argument: return CM_ERR_INVALID_ARGUMENT;
        case Code::io: return CM_ERR_IO;
        case Code::parse: return CM_ERR_PARSE;
        case Code::domain: return CM_ERR_DOMAIN;
        case Code::numeric: return CM_ERR_NUMERIC;
        case Code::internal: return CM_ERR_INTERNAL;
    }
    return CM_ERR_INTERNAL;
}

template <typename Fn>
cm_status guarded(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return CM_OK;
    } catch (const commotions::Error& e) {
        last_error = e.what();
        return status_of(e.code);
    } catch (const std::exception& e) {
        last_error = e.what();
        return CM_ERR_INTERNAL;
    }
}

cm_status require(bool ok, const char* what) {
    if (ok) return CM_OK;
    last_error = std::string(what) + " must not be NULL";
    return CM_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* cm_version(void) {
#ifdef COMMOTIONS_VERSION
    return COMMOTIONS_VERSION;
#else
    return "0.0.0";
#endif
}

cm_config* cm_config_new(void) { return new (std::nothrow) cm_config(); }

void cm_config_free(cm_config* config) { delete config; }

cm_status cm_config_parse_text(cm_config* config, const char* text) {
    if (auto s = require(config != nullptr, "config"); s != CM_OK) return s;
    if (auto s = require(text != nullptr, "text"); s != CM_OK) return s;
    return guarded([&] {
        const auto parsed = commotions::Config::parse_text(text);
        for (const auto& [k, v] : parsed.values()) config->cfg.set(k, v);
    });
}

cm_status cm_config_parse_file(cm_config* config, const char* file) {
    if (auto s = require(config != nullptr, "config"); s != CM_OK) return s;
    if (auto s = require(file != nullptr, "file"); s != CM_OK) return s;
    return guarded([&] {
        const auto parsed = commotions::Config::parse_file(file);
        for (const auto& [k, v] : parsed.values()) config->cfg.set(k, v);
    });
}

cm_status cm_config_set(cm_config* config, const char* key, const char* value) {
    if (auto s = require(config != nullptr, "config"); s != CM_OK) return s;
    if (auto s = require(key != nullptr, "key"); s != CM_OK) return s;
    if (auto s = require(value != nullptr, "value"); s != CM_OK) return s;
    return guarded([&] { config->cfg.set(key, value); });
}

cm_status cm_run(const cm_config* config, const char* command, const char* out_dir) {
    if (auto s = require(config != nullptr, "config"); s != CM_OK) return s;
    if (auto s = require(command != nullptr, "command"); s != CM_OK) return s;
    if (auto s = require(out_dir != nullptr, "out_dir"); s != CM_OK) return s;
    return guarded([&] { commotions::run_command(command, config->cfg, out_dir); });
}

const char* cm_last_error(void) { return last_error.c_str(); }

}  // extern "C"
