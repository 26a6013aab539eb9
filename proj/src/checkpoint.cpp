#include "causalgen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "causalgen/errors.hpp"

namespace causalgen {
namespace {

constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '1', '\n'};
constexpr std::uint64_t kMaxHeaderBytes = 1ull << 30;

void write_u64le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64le(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw SchemaError("checkpoint truncated in header length");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::ordered_json header = ck.meta;
  if (!header.is_object())
    throw SchemaError("checkpoint meta must be a JSON object");
  auto arrays = nlohmann::ordered_json::array();
  for (const auto& [name, mat] : ck.arrays) {
    arrays.push_back({{"name", name},
                      {"rows", mat.rows()},
                      {"cols", mat.cols()}});
  }
  header["arrays"] = std::move(arrays);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::string header_bytes = header.dump();
  write_u64le(out, header_bytes.size());
  out.write(header_bytes.data(),
            static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& [name, mat] : ck.arrays) {
    static_assert(std::numeric_limits<double>::is_iec559, "IEEE 754 required");
    // Eigen::MatrixXd is column-major, so data() is already in file order.
    out.write(reinterpret_cast<const char*>(mat.data()),
              static_cast<std::streamsize>(sizeof(double)) * mat.size());
  }
  out.flush();
  if (!out) throw ParseError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw SchemaError("not a checkpoint file: " + path);

  const std::uint64_t header_len = read_u64le(in);
  if (header_len == 0 || header_len > kMaxHeaderBytes)
    throw SchemaError("checkpoint header length out of range");
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw SchemaError("checkpoint truncated in header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(header_bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("checkpoint header is not valid JSON: ") +
                      e.what());
  }
  if (!header.is_object() || !header.contains("arrays") ||
      !header["arrays"].is_array())
    throw SchemaError("checkpoint header missing arrays list");

  Checkpoint ck;
  for (const auto& entry : header["arrays"]) {
    if (!entry.is_object() || !entry.contains("name") ||
        !entry["name"].is_string() || !entry.contains("rows") ||
        !entry["rows"].is_number_integer() || !entry.contains("cols") ||
        !entry["cols"].is_number_integer())
      throw SchemaError("malformed checkpoint array entry");
    const auto rows = entry["rows"].get<std::int64_t>();
    const auto cols = entry["cols"].get<std::int64_t>();
    if (rows < 0 || cols < 0 || (rows > 0 && cols > (1 << 28) / rows))
      throw SchemaError("checkpoint array shape out of range");
    Eigen::MatrixXd mat(rows, cols);
    in.read(reinterpret_cast<char*>(mat.data()),
            static_cast<std::streamsize>(sizeof(double)) * mat.size());
    if (!in) throw SchemaError("checkpoint truncated in array data");
    ck.arrays.emplace_back(entry["name"].get<std::string>(), std::move(mat));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw SchemaError("trailing bytes after checkpoint data");

  header.erase("arrays");
  ck.meta = std::move(header);
  return ck;
}

const Eigen::MatrixXd& checkpoint_array(const Checkpoint& ck,
                                        const std::string& name) {
  for (const auto& [n, mat] : ck.arrays)
    if (n == name) return mat;
  throw SchemaError("checkpoint has no array named " + name);
}

void add_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& mlp) {
  nlohmann::ordered_json spec;
  spec["widths"] = mlp.spec.widths;
  spec["hidden"] = activation_name(mlp.spec.hidden);
  spec["output"] = activation_name(mlp.spec.output);
  ck.meta["mlps"][prefix] = std::move(spec);
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    ck.arrays.emplace_back(prefix + "/w" + std::to_string(l), mlp.weights[l]);
    ck.arrays.emplace_back(prefix + "/b" + std::to_string(l), mlp.biases[l]);
  }
}

Mlp read_mlp(const Checkpoint& ck, const std::string& prefix) {
  if (!ck.meta.contains("mlps") || !ck.meta["mlps"].contains(prefix))
    throw SchemaError("checkpoint has no mlp named " + prefix);
  const auto& spec_json = ck.meta["mlps"][prefix];
  if (!spec_json.contains("widths") || !spec_json["widths"].is_array())
    throw SchemaError("mlp spec missing widths: " + prefix);

  Mlp mlp;
  mlp.spec.widths = spec_json["widths"].get<std::vector<int>>();
  mlp.spec.hidden = activation_from_name(spec_json.value("hidden", "relu"));
  mlp.spec.output = activation_from_name(spec_json.value("output", "identity"));
  if (mlp.spec.widths.size() < 2)
    throw SchemaError("mlp spec needs at least two widths: " + prefix);

  const std::size_t layers = mlp.spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& w =
        checkpoint_array(ck, prefix + "/w" + std::to_string(l));
    const Eigen::MatrixXd& b =
        checkpoint_array(ck, prefix + "/b" + std::to_string(l));
    if (w.rows() != mlp.spec.widths[l + 1] || w.cols() != mlp.spec.widths[l])
      throw SchemaError("mlp weight shape mismatch: " + prefix);
    if (b.rows() != 1 || b.cols() != mlp.spec.widths[l + 1])
      throw SchemaError("mlp bias shape mismatch: " + prefix);
    mlp.weights.push_back(w);
    mlp.biases.push_back(b);
  }
  return mlp;
}

}  // namespace causalgen
