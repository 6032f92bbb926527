#include "mir/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mir/errors.hpp"
#include "mir/model.hpp"

namespace mir {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'I', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put<double>(out, v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ValidationError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParameters& params, const ModelConfig& config) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string cfg = nlohmann::json(config).dump();
  put<std::uint64_t>(out, cfg.size());
  out += cfg;

  const AdamState& st = params.optimizer;
  const std::uint64_t count = params.entries().size() + st.first_moment.size() + st.second_moment.size() + 1;
  put<std::uint64_t>(out, count);
  for (const auto& [name, p] : params.entries()) put_tensor(out, name, p.value);
  for (const auto& [name, t] : st.first_moment) put_tensor(out, "adam.m/" + name, t);
  for (const auto& [name, t] : st.second_moment) put_tensor(out, "adam.v/" + name, t);
  put_tensor(out, "adam.step", Tensor::scalar(static_cast<double>(st.step)));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw ValidationError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = in.get<std::uint64_t>("config length");
  Checkpoint ck;
  try {
    ck.config = nlohmann::json::parse(in.get_string(cfg_len, "config")).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint config: ") + e.what());
  }
  ck.params = init_parameters(ck.config);

  const auto count = in.get<std::uint64_t>("tensor count");
  std::map<std::string, bool> seen;
  bool step_seen = false;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>("name length");
    const std::string name = in.get_string(name_len, "tensor name");
    const auto rank = in.get<std::uint32_t>("rank");
    Shape shape;
    std::size_t size = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(in.get<std::uint32_t>("dims"));
      size *= shape.back();
    }
    std::vector<double> values(size);
    for (double& v : values) v = in.get<double>("tensor values");
    Tensor t(shape, std::move(values));

    if (name == "adam.step") {
      ck.params.optimizer.step = static_cast<std::uint64_t>(t.item());
      step_seen = true;
      continue;
    }
    const bool first = name.rfind("adam.m/", 0) == 0;
    const bool second = name.rfind("adam.v/", 0) == 0;
    const std::string base = first || second ? name.substr(7) : name;
    if (!ck.params.contains(base)) throw ValidationError("checkpoint tensor '" + name + "' is not part of the model");
    const Tensor& expected = ck.params.value(base);
    if (!expected.same_shape(t)) {
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + t.shape_string() + ", model expects " +
                            expected.shape_string());
    }
    if (first) {
      ck.params.optimizer.first_moment[base] = std::move(t);
    } else if (second) {
      ck.params.optimizer.second_moment[base] = std::move(t);
    } else {
      ck.params.value(base) = std::move(t);
      seen[base] = true;
    }
  }
  if (!in.done()) throw ValidationError("checkpoint has trailing bytes");
  if (!step_seen) throw ValidationError("checkpoint lacks adam.step");
  for (const std::string& name : ck.params.names())
    if (!seen.count(name)) throw ValidationError("checkpoint is missing tensor '" + name + "'");
  return ck;
}

void save_checkpoint(const ModelParameters& params, const ModelConfig& config, const std::string& path) {
  const std::string bytes = serialize_checkpoint(params, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  check_compatible(ck.config, expected);
  return ck;
}

}  // namespace mir
