#include "fusiongan/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace fusiongan {

namespace {

constexpr const char* kCkptMagic = "#fusiongan-ckpt v1";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_token(const std::string& s, const char* what) {
  if (s.empty()) throw InputError(std::string(what) + " must not be empty");
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=')
      throw InputError(std::string(what) + " `" + s + "` contains a reserved character");
}

void append_float_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_float_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_checkpoint(const CheckpointData& data, const std::filesystem::path& path) {
  std::ostringstream header;
  header << kCkptMagic << '\n';
  for (const auto& [key, value] : data.meta) {
    check_token(key, "meta key");
    check_token(value, "meta value");
    header << "meta " << key << '=' << value << '\n';
  }
  std::size_t offset = 0;
  for (const auto& t : data.tensors) {
    check_token(t.name, "tensor name");
    header << "tensor " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << ' '
           << offset << '\n';
    offset += static_cast<std::size_t>(t.value.size());
  }
  header << "data " << offset << '\n';

  std::string blob;
  blob.reserve(offset * 4);
  for (const auto& t : data.tensors)
    for (Eigen::Index k = 0; k < t.value.size(); ++k)
      append_float_le(blob, static_cast<float>(t.value.data()[k]));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << header.str();
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  CheckpointData data;
  struct Entry {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    std::size_t offset = 0;
  };
  std::vector<Entry> entries;
  std::size_t float_count = 0;
  std::size_t pos = 0;
  bool saw_magic = false, saw_data = false;
  while (pos < content.size()) {
    const std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos)
      throw InputError(path.string() + ": truncated header");
    const std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (!saw_magic) {
      if (line != kCkptMagic)
        throw InputError(path.string() + ": bad magic `" + line + "`");
      saw_magic = true;
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string kv;
      ls >> kv;
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw InputError(path.string() + ": bad meta line `" + line + "`");
      data.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
    } else if (tag == "tensor") {
      Entry e;
      if (!(ls >> e.name >> e.rows >> e.cols >> e.offset))
        throw InputError(path.string() + ": bad tensor line `" + line + "`");
      entries.push_back(std::move(e));
    } else if (tag == "data") {
      if (!(ls >> float_count))
        throw InputError(path.string() + ": bad data line `" + line + "`");
      saw_data = true;
      break;
    } else {
      throw InputError(path.string() + ": unknown header line `" + line + "`");
    }
  }
  if (!saw_data) throw InputError(path.string() + ": missing data section");
  if (content.size() - pos != float_count * 4)
    throw InputError(path.string() + ": data section has " +
                     std::to_string(content.size() - pos) + " bytes, expected " +
                     std::to_string(float_count * 4));
  const auto* bytes = reinterpret_cast<const unsigned char*>(content.data() + pos);
  for (const auto& e : entries) {
    const std::size_t n = static_cast<std::size_t>(e.rows) * static_cast<std::size_t>(e.cols);
    if (e.offset + n > float_count)
      throw InputError(path.string() + ": tensor `" + e.name + "` exceeds the data section");
    NamedTensor t;
    t.name = e.name;
    t.value.resize(e.rows, e.cols);
    for (std::size_t k = 0; k < n; ++k)
      t.value.data()[static_cast<Eigen::Index>(k)] =
          static_cast<double>(read_float_le(bytes + (e.offset + k) * 4));
    data.tensors.push_back(std::move(t));
  }
  return data;
}

namespace {

void pack_params_with_state(const std::string& prefix,
                            const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& ts,
                            const AdamStateD& opt, CheckpointData& out) {
  for (const auto& [name, tensor] : ts)
    out.tensors.push_back({prefix + name, *tensor});
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(ts[k].second->rows(), ts[k].second->cols());
    out.tensors.push_back({prefix + "adam.m." + ts[k].first,
                           k < opt.m.size() ? opt.m[k] : zero});
    out.tensors.push_back({prefix + "adam.v." + ts[k].first,
                           k < opt.v.size() ? opt.v[k] : zero});
  }
  Eigen::MatrixXd step(1, 1);
  step(0, 0) = static_cast<double>(opt.step);
  out.tensors.push_back({prefix + "adam.step", step});
}

const Eigen::MatrixXd& find_tensor(
    const std::unordered_map<std::string, const Eigen::MatrixXd*>& index,
    const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw InputError("checkpoint is missing tensor `" + name + "`");
  return *it->second;
}

AdamStateD unpack_state(const std::unordered_map<std::string, const Eigen::MatrixXd*>& index,
                        const std::string& prefix,
                        const std::vector<std::pair<std::string, Eigen::MatrixXd*>>& ts) {
  AdamStateD opt;
  for (const auto& [name, tensor] : ts) {
    opt.m.push_back(find_tensor(index, prefix + "adam.m." + name));
    opt.v.push_back(find_tensor(index, prefix + "adam.v." + name));
  }
  opt.step = static_cast<long>(find_tensor(index, prefix + "adam.step")(0, 0));
  return opt;
}

}  // namespace

void pack_bundle(const DomainBundle& bundle, const std::string& prefix,
                 CheckpointData& out) {
  pack_params_with_state(prefix + "gen.", bundle.generator.tensors(), bundle.gen_opt, out);
  pack_params_with_state(prefix + "critic.", bundle.critic.tensors(), bundle.critic_opt,
                         out);
  Eigen::MatrixXd baseline(bundle.baseline.value.size(), 1);
  baseline.col(0) = bundle.baseline.value;
  out.tensors.push_back({prefix + "baseline", baseline});
  const auto& entries = bundle.corpus.vocab.entries();
  Eigen::MatrixXd vocab(static_cast<Eigen::Index>(entries.size()), 2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    vocab(static_cast<Eigen::Index>(i), 0) = entries[i].pitch;
    vocab(static_cast<Eigen::Index>(i), 1) = entries[i].duration_bin;
  }
  out.tensors.push_back({prefix + "vocab", vocab});
}

DomainBundle unpack_bundle(const CheckpointData& data, const std::string& prefix, int T,
                           double clip_bound) {
  std::unordered_map<std::string, const Eigen::MatrixXd*> index;
  for (const auto& t : data.tensors) index[t.name] = &t.value;

  DomainBundle b;
  b.generator.embedding = find_tensor(index, prefix + "gen.embedding");
  b.generator.lstm_w = find_tensor(index, prefix + "gen.lstm.weight");
  b.generator.lstm_b = find_tensor(index, prefix + "gen.lstm.bias");
  b.generator.out_w = find_tensor(index, prefix + "gen.out.weight");
  b.generator.out_b = find_tensor(index, prefix + "gen.out.bias");
  const int v = b.generator.vocab_size();
  const int e = b.generator.embed_dim();
  const int h = b.generator.hidden_dim();
  if (b.generator.lstm_w.rows() != e + h || b.generator.lstm_w.cols() != 4 * h ||
      b.generator.lstm_b.rows() != 4 * h || b.generator.out_w.cols() != v ||
      b.generator.out_b.rows() != v)
    throw InputError("checkpoint generator tensors have inconsistent shapes");

  b.critic.clip_bound = clip_bound;
  b.critic.embedding = find_tensor(index, prefix + "critic.embedding");
  for (const auto& t : data.tensors) {
    const std::string conv_prefix = prefix + "critic.conv";
    if (t.name.rfind(conv_prefix, 0) != 0) continue;
    const std::string rest = t.name.substr(conv_prefix.size());
    const std::size_t dot = rest.find('.');
    if (dot == std::string::npos || rest.substr(dot + 1) != "filters") continue;
    CriticParamsD::ConvBank bank;
    bank.width = std::stoi(rest.substr(0, dot));
    bank.filters = t.value;
    bank.bias = find_tensor(index, conv_prefix + rest.substr(0, dot) + ".bias");
    if (bank.filters.cols() != static_cast<Eigen::Index>(bank.width) * e ||
        bank.bias.rows() != bank.filters.rows())
      throw InputError("checkpoint critic conv tensors have inconsistent shapes");
    b.critic.banks.push_back(std::move(bank));
  }
  if (b.critic.banks.empty()) throw InputError("checkpoint has no critic conv banks");
  b.critic.head_w = find_tensor(index, prefix + "critic.head.weight");
  b.critic.head_b = find_tensor(index, prefix + "critic.head.bias");

  b.gen_opt = unpack_state(index, prefix + "gen.", b.generator.tensors());
  b.critic_opt = unpack_state(index, prefix + "critic.", b.critic.tensors());
  b.baseline.value = find_tensor(index, prefix + "baseline").col(0);

  const Eigen::MatrixXd& vocab = find_tensor(index, prefix + "vocab");
  if (vocab.cols() != 2 || vocab.rows() + 1 != v)
    throw InputError("checkpoint vocabulary does not match the embedding size");
  std::vector<QuantizedEvent> entries;
  entries.reserve(static_cast<std::size_t>(vocab.rows()));
  for (Eigen::Index i = 0; i < vocab.rows(); ++i) {
    const double pitch = vocab(i, 0), bin = vocab(i, 1);
    if (pitch != std::floor(pitch) || bin != std::floor(bin))
      throw InputError("checkpoint vocabulary entries must be integers");
    entries.push_back({static_cast<int>(pitch), static_cast<int>(bin)});
  }
  b.corpus.vocab = Vocabulary::from_entries(std::move(entries));
  b.corpus.T = T;
  return b;
}

namespace {

std::string widths_string(const CriticParamsD& critic) {
  std::string out;
  for (const auto& bank : critic.banks) {
    if (!out.empty()) out += ',';
    out += std::to_string(bank.width);
  }
  return out;
}

}  // namespace

void save_bundle(const DomainBundle& bundle, const TrainConfig& cfg,
                 const std::filesystem::path& path) {
  CheckpointData data;
  data.meta["kind"] = "bundle";
  data.meta["domain"] = std::string(1, bundle.label);
  data.meta["T"] = std::to_string(cfg.T);
  data.meta["clip"] = format_double(cfg.clip_bound);
  data.meta["widths"] = widths_string(bundle.critic);
  pack_bundle(bundle, "", data);
  save_checkpoint(data, path);
}

namespace {

int parse_meta_int(const CheckpointData& d, const std::string& key) {
  auto it = d.meta.find(key);
  if (it == d.meta.end()) throw InputError("checkpoint is missing meta key `" + key + "`");
  return std::stoi(it->second);
}

double parse_meta_double(const CheckpointData& d, const std::string& key) {
  auto it = d.meta.find(key);
  if (it == d.meta.end()) throw InputError("checkpoint is missing meta key `" + key + "`");
  return std::stod(it->second);
}

std::string meta_or(const CheckpointData& d, const std::string& key,
                    const std::string& fallback) {
  auto it = d.meta.find(key);
  return it == d.meta.end() ? fallback : it->second;
}

}  // namespace

DomainBundle load_bundle(const std::filesystem::path& path, int* T_out, double* clip_out) {
  CheckpointData data = load_checkpoint(path);
  if (meta_or(data, "kind", "") != "bundle")
    throw InputError(path.string() + " is not a bundle checkpoint");
  const int T = parse_meta_int(data, "T");
  const double clip = parse_meta_double(data, "clip");
  DomainBundle b = unpack_bundle(data, "", T, clip);
  const std::string domain = meta_or(data, "domain", "A");
  b.label = domain.empty() ? 'A' : domain[0];
  if (T_out) *T_out = T;
  if (clip_out) *clip_out = clip;
  return b;
}

void save_trio(const DomainBundle& a, const DomainBundle& b, const DomainBundle& f,
               const TrainConfig& cfg, const std::filesystem::path& path) {
  CheckpointData data;
  data.meta["kind"] = "trio";
  data.meta["T"] = std::to_string(cfg.T);
  data.meta["clip"] = format_double(cfg.clip_bound);
  data.meta["widths"] = widths_string(f.critic);
  pack_bundle(a, "A.", data);
  pack_bundle(b, "B.", data);
  pack_bundle(f, "F.", data);
  save_checkpoint(data, path);
}

TrioCheckpoint load_trio(const std::filesystem::path& path) {
  CheckpointData data = load_checkpoint(path);
  if (meta_or(data, "kind", "") != "trio")
    throw InputError(path.string() + " is not a trio checkpoint");
  TrioCheckpoint out;
  out.T = parse_meta_int(data, "T");
  out.clip_bound = parse_meta_double(data, "clip");
  out.a = unpack_bundle(data, "A.", out.T, out.clip_bound);
  out.b = unpack_bundle(data, "B.", out.T, out.clip_bound);
  out.f = unpack_bundle(data, "F.", out.T, out.clip_bound);
  out.a.label = 'A';
  out.b.label = 'B';
  out.f.label = 'F';
  return out;
}

}  // namespace fusiongan
