#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalgen/nn.hpp"

namespace causalgen {

// Checkpoint file layout:
//   8-byte magic "CGCKPT1\n"
//   uint64 little-endian header length
//   header JSON: caller metadata plus an "arrays" list of {name, rows, cols}
//   raw float64 little-endian array data, column-major, in list order
// Round-trips are bit-exact.
struct Checkpoint {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

const Eigen::MatrixXd& checkpoint_array(const Checkpoint& ck,
                                        const std::string& name);

// Stores the spec under meta["mlps"][prefix] and the parameters as
// "<prefix>/w<l>" and "<prefix>/b<l>".
void add_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& mlp);
Mlp read_mlp(const Checkpoint& ck, const std::string& prefix);

}  // namespace causalgen
