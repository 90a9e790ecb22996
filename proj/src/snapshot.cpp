#include "cryptoens/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cryptoens/errors.hpp"
#include "cryptoens/hash.hpp"

namespace cryptoens::nn {
namespace {

constexpr char kMagic[8] = {'C', 'E', 'N', 'S', 'N', 'A', 'P', '1'};

void put_doubles(std::string& out, const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const char*>(v.data());
  out.append(p, v.size() * sizeof(double));
}

std::vector<double> get_doubles(const std::string& in, std::size_t& pos, std::size_t n) {
  if (pos + n * sizeof(double) > in.size()) throw ModelError("snapshot truncated");
  std::vector<double> v(n);
  std::memcpy(v.data(), in.data() + pos, n * sizeof(double));
  pos += n * sizeof(double);
  return v;
}

}  // namespace

std::string encode_snapshot(const Snapshot& snap) {
  const auto& w = snap.weights;
  const auto& s = w.shape;
  nlohmann::json h;
  h["format_version"] = 1;
  h["shape"] = {{"input_dim", s.input_dim}, {"seq_len", s.seq_len},       {"fc_units", s.fc_units},
                {"hidden", s.hidden},       {"lstm_layers", s.lstm_layers}, {"actions", s.actions},
                {"cov_head", s.cov_head}};
  h["meta"] = {{"config_hash", snap.meta.config_hash}, {"window", snap.meta.window},
               {"period", snap.meta.period},           {"epoch", snap.meta.epoch},
               {"smoothed_return", snap.meta.smoothed_return}};
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& [name, block] : w.layout.named())
    arrays.push_back({{"name", name}, {"rows", block.rows}, {"cols", block.cols}});
  h["blocks"] = arrays;
  h["bn_initialized"] = w.bn_initialized;
  h["param_count"] = w.params.size();
  const std::string header = h.dump();

  std::string out(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint32_t>(header.size());
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += header;
  put_doubles(out, w.params);
  put_doubles(out, w.bn_running_mean);
  put_doubles(out, w.bn_running_var);
  return out;
}

Snapshot decode_snapshot(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ModelError("not a snapshot file (bad magic)");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof(kMagic), sizeof(len));
  std::size_t pos = sizeof(kMagic) + sizeof(len);
  if (pos + len > bytes.size()) throw ModelError("snapshot header truncated");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("snapshot header: ") + e.what());
  }
  pos += len;
  if (h.value("format_version", 0) != 1) throw ModelError("unsupported snapshot version");

  NetShape s;
  const auto& js = h.at("shape");
  s.input_dim = js.at("input_dim");
  s.seq_len = js.at("seq_len");
  s.fc_units = js.at("fc_units");
  s.hidden = js.at("hidden");
  s.lstm_layers = js.at("lstm_layers");
  s.actions = js.at("actions");
  s.cov_head = js.at("cov_head");

  Snapshot snap{NetworkWeights(s), {}};
  auto& w = snap.weights;
  if (h.at("param_count").get<std::size_t>() != w.layout.total)
    throw ModelError("snapshot parameter count does not match its shape");
  w.params = get_doubles(bytes, pos, w.layout.total);
  w.bn_running_mean = get_doubles(bytes, pos, s.hidden);
  w.bn_running_var = get_doubles(bytes, pos, s.hidden);
  w.bn_initialized = h.at("bn_initialized");
  if (pos != bytes.size()) throw ModelError("trailing bytes in snapshot");

  const auto& m = h.at("meta");
  snap.meta.config_hash = m.at("config_hash");
  snap.meta.window = m.at("window");
  snap.meta.period = m.at("period");
  snap.meta.epoch = m.at("epoch");
  snap.meta.smoothed_return = m.at("smoothed_return");
  return snap;
}

void save_snapshot(const std::filesystem::path& path, const Snapshot& snap) {
  const std::string bytes = encode_snapshot(snap);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ModelError("cannot write snapshot " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ModelError("failed writing snapshot " + path.string());
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelError("missing snapshot " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return decode_snapshot(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("corrupt snapshot " + path.string() + ": " + e.what());
  }
}

std::string snapshot_hash(const Snapshot& snap) { return fnv1a_hex(encode_snapshot(snap)); }

}  // namespace cryptoens::nn
