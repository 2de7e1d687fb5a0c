#include "svdkd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "byte_io.hpp"
#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'U', '1'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json model_json(const StudentModel& model) {
  const auto& s = model.shape;
  std::size_t rank = 0;
  for (const auto& layer : model.trunk) {
    if (layer.lora) rank = layer.lora->rank();
  }
  nlohmann::json frozen = nlohmann::json::array();
  for (const auto& layer : model.trunk) frozen.push_back(layer.frozen);
  return {{"input_dim", s.input_dim},
          {"hidden_dim", s.hidden_dim},
          {"depth", s.depth},
          {"output_dim", s.output_dim},
          {"classes", s.classes},
          {"lora_layers", model.adapted_layers()},
          {"lora_rank", rank},
          {"trunk_frozen", frozen}};
}

StudentModel skeleton_from(const nlohmann::json& m) {
  StudentShape shape;
  try {
    shape.input_dim = m.at("input_dim").get<std::size_t>();
    shape.hidden_dim = m.at("hidden_dim").get<std::size_t>();
    shape.depth = m.at("depth").get<std::size_t>();
    shape.output_dim = m.at("output_dim").get<std::size_t>();
    shape.classes = m.at("classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("STU1 model description malformed: ") + e.what());
  }
  StudentModel model = zeros_like(StudentModel::initialize(shape, 0));
  const auto layers = m.value("lora_layers", std::vector<std::size_t>{});
  const auto rank = m.value("lora_rank", std::size_t{0});
  for (std::size_t l : layers) {
    if (l < 1 || l > model.trunk.size() || rank == 0) {
      throw FormatError("STU1 adapter placement is inconsistent with the model depth");
    }
    auto& layer = model.trunk[l - 1];
    layer.lora = LoraAdapter{Matrix::Zero(static_cast<Eigen::Index>(rank), layer.weight.cols()),
                             Matrix::Zero(layer.weight.rows(), static_cast<Eigen::Index>(rank))};
  }
  const auto frozen = m.value("trunk_frozen", std::vector<bool>{});
  for (std::size_t l = 0; l < frozen.size() && l < model.trunk.size(); ++l) {
    model.trunk[l].frozen = frozen[l];
  }
  return model;
}

}  // namespace

void save_student(const StudentModel& model, const std::filesystem::path& path,
                  const nlohmann::json& extra) {
  nlohmann::json config = {{"model", model_json(model)}, {"train", extra}};
  const std::string text = config.dump();

  StudentModel copy = model;
  const auto blocks = parameter_blocks(copy);
  detail::ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put_le<std::uint32_t>(kVersion);
  w.put_le<std::uint64_t>(text.size());
  w.put_bytes(text.data(), text.size());
  w.put_le<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& block : blocks) {
    w.put_le<std::uint32_t>(static_cast<std::uint32_t>(block.name.size()));
    w.put_bytes(block.name.data(), block.name.size());
    w.put_le<std::uint64_t>(block.values.size());
    for (double v : block.values) w.put_f64(v);
  }
  detail::write_file(path, w.bytes().data(), w.bytes().size());
}

LoadedStudent load_student(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_file(path));
  char magic[4];
  r.header_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + ": bad magic, not a STU1 checkpoint");
  }
  const auto version = r.header_le<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported STU1 version " + std::to_string(version));
  }
  const auto json_len = r.payload_le<std::uint64_t>("config length");
  LoadedStudent out;
  try {
    out.config = nlohmann::json::parse(r.payload_string(json_len, "config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": STU1 config is not valid JSON: " + e.what());
  }
  if (!out.config.contains("model")) throw FormatError(path.string() + ": STU1 config lacks 'model'");
  out.model = skeleton_from(out.config.at("model"));

  auto blocks = parameter_blocks(out.model);
  const auto count = r.payload_le<std::uint32_t>("block count");
  if (count != blocks.size()) {
    throw FormatError(path.string() + ": STU1 holds " + std::to_string(count) +
                      " parameter blocks, the described model has " +
                      std::to_string(blocks.size()));
  }
  for (auto& block : blocks) {
    const auto name_len = r.payload_le<std::uint32_t>("block name length");
    const std::string name = r.payload_string(name_len, "block name");
    if (name != block.name) {
      throw FormatError(path.string() + ": expected block '" + block.name + "', found '" + name + "'");
    }
    const auto n = r.payload_le<std::uint64_t>("block size");
    if (n != block.values.size()) {
      throw FormatError(path.string() + ": block '" + name + "' has " + std::to_string(n) +
                        " values, expected " + std::to_string(block.values.size()));
    }
    for (double& v : block.values) v = std::bit_cast<double>(r.payload_le<std::uint64_t>(name));
  }
  if (!r.exhausted()) throw DataError(path.string() + ": trailing bytes after STU1 payload");
  return out;
}

}  // namespace svdkd
