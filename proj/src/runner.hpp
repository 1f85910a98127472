#pragma once
#include <string>

#include "util/kv.hpp"

namespace commotions {

// Command implementations behind the CLI. Each reads its keys from the flat
// configuration, writes its outputs under out_dir and echoes the complete
// effective configuration (explicit keys plus every consulted default) into
// the files it produces. All randomness comes from configuration keys, so a
// rerun with identical inputs is bit-identical.
void run_synth(const Config& cfg, const std::string& out_dir);
void run_fit(const Config& cfg, const std::string& out_dir);
void run_predict(const Config& cfg, const std::string& out_dir);
void run_evaluate(const Config& cfg, const std::string& out_dir);
void run_compare(const Config& cfg, const std::string& out_dir);

void run_command(const std::string& command, const Config& cfg, const std::string& out_dir);

}  // namespace commotions
