#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace panosum::report {

/// Minimal JSON value for deterministic emission: object keys are kept
/// sorted, floats print with 9 significant digits, output is byte-stable
/// for equal values. Writer only; parsing lives elsewhere.
class Json {
 public:
  Json() : kind_(Kind::Null) {}

  static Json null() { return Json(); }
  static Json boolean(bool v);
  static Json integer(long long v);
  static Json uinteger(unsigned long long v);
  static Json number(double v);
  static Json string(std::string v);
  static Json array();
  static Json object();

  void push_back(Json v);               // array only
  Json& operator[](const std::string& key);  // object only, inserts null

  bool is_null() const { return kind_ == Kind::Null; }

  /// Pretty-printed UTF-8 with 2-space indent and a trailing newline.
  std::string dump() const;

 private:
  enum class Kind { Null, Bool, Int, UInt, Double, String, Array, Object };

  void write(std::string& out, int depth) const;

  Kind kind_;
  bool bool_ = false;
  long long int_ = 0;
  unsigned long long uint_ = 0;
  double double_ = 0.0;
  std::string string_;
  std::vector<Json> array_;
  std::map<std::string, Json> object_;
};

/// %.9g with non-finite values mapped to null keyword (JSON has no inf/nan).
std::string format_double(double v);

struct KeyframeEntry {
  int id = 0;
  int frame_index = 0;
  bool has_pose = false;
  std::array<double, 4> q{1, 0, 0, 0};  // wxyz
  std::array<double, 3> t{0, 0, 0};
};

struct ClusterEntry {
  int id = 0;
  std::vector<int> members;
  double cohesiveness = 0.0;
  std::vector<std::string> panoramas;
};

struct RunReport {
  Json config = Json::object();
  std::vector<KeyframeEntry> keyframes;
  std::vector<ClusterEntry> clusters;
  std::vector<int> unassigned;
  std::map<std::string, double> timings_ms;
  int map_points = 0;
  bool vo_initialized = false;
};

Json to_json(const RunReport& report);

/// Serialized report; identical state yields identical bytes.
std::string serialize_report(const RunReport& report);

void write_report(const RunReport& report, const std::string& path);

}  // namespace panosum::report
