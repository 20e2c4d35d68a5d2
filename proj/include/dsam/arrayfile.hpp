#pragma once

// Named-array container backing weight files and checkpoints: one JSON
// manifest line (magic, format version, free-form metadata, array directory),
// then the raw little-endian array payloads concatenated in directory order.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace dsam {

struct ArrayEntry {
  std::string dtype;           // "f32" or "f64"
  std::vector<long> shape;     // row-major
  std::vector<float> f32;      // exactly one of these holds the payload
  std::vector<double> f64;

  long count() const {
    long n = 1;
    for (long s : shape) n *= s;
    return n;
  }
};

class ArrayFile {
 public:
  nlohmann::json meta;  // free-form; survives the round trip untouched

  void put_f32(const std::string& name, std::vector<float> data, std::vector<long> shape);
  void put_f64(const std::string& name, std::vector<double> data, std::vector<long> shape);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  const ArrayEntry& get(const std::string& name) const;
  const std::vector<std::string>& order() const { return order_; }

  void write(const std::string& path) const;
  static ArrayFile read(const std::string& path);

 private:
  std::map<std::string, ArrayEntry> entries_;
  std::vector<std::string> order_;
};

}  // namespace dsam
