#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalgen/scm.hpp"

namespace causalgen {

struct LabelDataset {
  std::vector<std::string> labels;
  Eigen::MatrixXd rows;
};

// CelebA attribute list format: line 1 is the row count, line 2 the
// whitespace-separated attribute names, every following line a filename and
// one +-1 flag per attribute. Flags map -1 -> 0, +1 -> 1 and columns are
// reordered to `selected` (empty keeps the file order).
LabelDataset ingest_celeba_attrs(const std::string& path,
                                 const std::vector<std::string>& selected);

// Inverse of ingest: writes 0/1 rows as +-1 flags with generated filenames.
void write_celeba_attrs(const std::string& path,
                        const std::vector<std::string>& names,
                        const Eigen::MatrixXd& rows);

// Plain CSV with one header row; values written at full precision.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);
LabelDataset read_csv(const std::string& path);

// Nine-label Bernoulli network whose exact joint matches the CelebA
// attribute statistics the controller experiments check against: marginals,
// the (Young, Male) pairwise table, and zero mass on {Male=0, Mustache=1}.
// Stands in for the real attribute file when none is supplied.
Scm celeba_standin_scm();

// Label order shared by the stand-in and the bundled graph files.
const std::vector<std::string>& celeba_labels();

// Streaming FNV-1a over the file's bytes.
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

// Run manifest: format version, command, resolved config, and a content
// hash per input file so reruns can verify their inputs.
nlohmann::ordered_json make_manifest(
    const std::string& command, const nlohmann::ordered_json& config,
    const std::vector<std::pair<std::string, std::string>>& inputs);

}  // namespace causalgen
