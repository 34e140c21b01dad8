#pragma once

#include <string>

#include "dcscan/trainer.hpp"

namespace dcscan {

// The flat JSON run configuration: every module's knobs plus the output
// directory and seed. Unknown keys are hard errors.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "run";

    SyntheticSpec data;
    std::string data_manifest;   // nonempty: load this instead of generating
    bool save_dataset = false;

    NetworkConfig network;
    TrainConfig train;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);
std::string dump_run_config(const RunConfig& cfg);

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
int cli_run(int argc, const char* const* argv);

}  // namespace dcscan
