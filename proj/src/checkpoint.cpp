#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "scriptalign/error.hpp"
#include "scriptalign/siamese.hpp"

namespace scriptalign {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'C', 'R', 'A', 'L', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out_.write(bytes.data(), sizeof(T));
  }

  void put_block(const std::vector<double>& values) {
    put<std::uint64_t>(values.size());
    for (double v : values) put(v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  template <typename T>
  T get() {
    std::array<char, sizeof(T)> bytes;
    if (!in_.read(bytes.data(), sizeof(T))) throw CheckpointError(name_ + ": truncated checkpoint");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  std::vector<double> get_block(std::size_t expected) {
    const auto n = get<std::uint64_t>();
    if (n != expected) {
      throw CheckpointError(name_ + ": parameter block has " + std::to_string(n) +
                            " values, layer chain expects " + std::to_string(expected));
    }
    std::vector<double> values(n);
    for (double& v : values) v = get<double>();
    return values;
  }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SiameseModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  Writer w(out);
  w.put(kVersion);
  w.put<std::uint64_t>(model.canvas.target_height);
  w.put<std::uint64_t>(model.canvas.target_width);
  w.put(model.multiplier);
  w.put<std::uint64_t>(model.specs.size());
  for (const auto& spec : model.specs) {
    w.put(static_cast<std::uint8_t>(spec.kind));
    w.put<std::uint64_t>(spec.filters);
    w.put<std::uint64_t>(spec.kernel_h);
    w.put<std::uint64_t>(spec.kernel_w);
    w.put(spec.rate);
  }
  for (const auto& layer : model.twin.layers) {
    w.put_block(layer.weights);
    w.put_block(layer.bias);
  }
  w.put_block(model.head_weights);
  w.put(model.head_bias);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

SiameseModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError(path.string() + ": not a scriptalign checkpoint");
  }
  Reader r(in, path.string());
  if (const auto version = r.get<std::uint32_t>(); version != kVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  SiameseModel model;
  model.canvas.target_height = r.get<std::uint64_t>();
  model.canvas.target_width = r.get<std::uint64_t>();
  model.multiplier = r.get<double>();
  const auto layers = r.get<std::uint64_t>();
  if (layers > 4096) throw CheckpointError(path.string() + ": implausible layer count");
  for (std::uint64_t i = 0; i < layers; ++i) {
    nn::LayerSpec spec;
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(nn::LayerKind::Dropout)) {
      throw CheckpointError(path.string() + ": unknown layer kind " + std::to_string(kind));
    }
    spec.kind = static_cast<nn::LayerKind>(kind);
    spec.filters = r.get<std::uint64_t>();
    spec.kernel_h = r.get<std::uint64_t>();
    spec.kernel_w = r.get<std::uint64_t>();
    spec.rate = r.get<double>();
    model.specs.push_back(spec);
  }
  // The geometry check also sizes every parameter block.
  const auto shape_template = nn::init_params(model.specs, model.canvas, 0.0, 0);
  model.twin.layers.resize(model.specs.size());
  for (std::size_t l = 0; l < model.specs.size(); ++l) {
    model.twin.layers[l].weights = r.get_block(shape_template.layers[l].weights.size());
    model.twin.layers[l].bias = r.get_block(shape_template.layers[l].bias.size());
  }
  model.head_weights = r.get_block(nn::infer_shapes(model.specs, model.canvas).back().size());
  model.head_bias = r.get<double>();
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError(path.string() + ": trailing bytes after parameters");
  }
  return model;
}

}  // namespace scriptalign
