#include "dsam/arrayfile.hpp"

#include <fstream>
#include <stdexcept>

namespace dsam {

namespace {
constexpr const char* kMagic = "dsam-arrays";
constexpr int kFormatVersion = 1;

long shape_count(const std::vector<long>& shape) {
  long n = 1;
  for (long s : shape) {
    if (s < 0) throw std::invalid_argument("array file: negative dimension");
    n *= s;
  }
  return n;
}
}  // namespace

void ArrayFile::put_f32(const std::string& name, std::vector<float> data,
                        std::vector<long> shape) {
  if (shape_count(shape) != static_cast<long>(data.size()))
    throw std::invalid_argument("array file: shape does not match data for " + name);
  if (!entries_.count(name)) order_.push_back(name);
  entries_[name] = ArrayEntry{"f32", std::move(shape), std::move(data), {}};
}

void ArrayFile::put_f64(const std::string& name, std::vector<double> data,
                        std::vector<long> shape) {
  if (shape_count(shape) != static_cast<long>(data.size()))
    throw std::invalid_argument("array file: shape does not match data for " + name);
  if (!entries_.count(name)) order_.push_back(name);
  entries_[name] = ArrayEntry{"f64", std::move(shape), {}, std::move(data)};
}

const ArrayEntry& ArrayFile::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("array file: missing array " + name);
  return it->second;
}

void ArrayFile::write(const std::string& path) const {
  nlohmann::json manifest;
  manifest["magic"] = kMagic;
  manifest["version"] = kFormatVersion;
  manifest["meta"] = meta;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& name : order_) {
    const ArrayEntry& e = entries_.at(name);
    dir.push_back({{"name", name}, {"dtype", e.dtype}, {"shape", e.shape}});
  }
  manifest["arrays"] = dir;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("array file: cannot open " + path + " for writing");
  out << manifest.dump() << '\n';
  for (const auto& name : order_) {
    const ArrayEntry& e = entries_.at(name);
    if (e.dtype == "f32")
      out.write(reinterpret_cast<const char*>(e.f32.data()),
                static_cast<std::streamsize>(e.f32.size() * sizeof(float)));
    else
      out.write(reinterpret_cast<const char*>(e.f64.data()),
                static_cast<std::streamsize>(e.f64.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("array file: write failed for " + path);
}

ArrayFile ArrayFile::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("array file: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("array file: missing manifest in " + path);
  nlohmann::json manifest = nlohmann::json::parse(line);
  if (manifest.value("magic", "") != kMagic)
    throw std::runtime_error("array file: bad magic in " + path);
  if (manifest.value("version", 0) != kFormatVersion)
    throw std::runtime_error("array file: unsupported version in " + path);

  ArrayFile f;
  f.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& d : manifest.at("arrays")) {
    const std::string name = d.at("name");
    const std::string dtype = d.at("dtype");
    const std::vector<long> shape = d.at("shape").get<std::vector<long>>();
    const long n = shape_count(shape);
    if (dtype == "f32") {
      std::vector<float> data(static_cast<size_t>(n));
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
      f.put_f32(name, std::move(data), shape);
    } else if (dtype == "f64") {
      std::vector<double> data(static_cast<size_t>(n));
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
      f.put_f64(name, std::move(data), shape);
    } else {
      throw std::runtime_error("array file: unknown dtype " + dtype + " in " + path);
    }
    if (!in) throw std::runtime_error("array file: truncated payload in " + path);
  }
  return f;
}

}  // namespace dsam
