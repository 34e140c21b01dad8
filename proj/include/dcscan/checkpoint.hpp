#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcscan/network.hpp"

namespace dcscan {

// A parameter directory holds one DCT1 file per tensor plus manifest.txt:
//   dcscan-params v1
//   meta <key> <value>          (repeated)
//   param <name> <file>         (repeated, file relative to the directory)
void write_param_dir(const std::string& dir,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<NamedParam>& params);
std::map<std::string, std::string> read_param_meta(const std::string& dir);
// Loads values into already-shaped tensors; every expected name must be
// present with a matching shape.
void read_params_into(const std::string& dir, std::vector<NamedParam> params);

// Network checkpoint = parameter directory whose meta carries the config and
// the route_set tag.
void save_network(const std::string& dir, SegNetwork& net);
SegNetwork load_network(const std::string& dir);

void save_projector(const std::string& dir, Projector& proj);
Projector load_projector(const std::string& dir);

}  // namespace dcscan
