#include "panosum/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "panosum/errors.hpp"

namespace panosum::report {

Json Json::boolean(bool v) {
  Json j;
  j.kind_ = Kind::Bool;
  j.bool_ = v;
  return j;
}

Json Json::integer(long long v) {
  Json j;
  j.kind_ = Kind::Int;
  j.int_ = v;
  return j;
}

Json Json::uinteger(unsigned long long v) {
  Json j;
  j.kind_ = Kind::UInt;
  j.uint_ = v;
  return j;
}

Json Json::number(double v) {
  Json j;
  j.kind_ = Kind::Double;
  j.double_ = v;
  return j;
}

Json Json::string(std::string v) {
  Json j;
  j.kind_ = Kind::String;
  j.string_ = std::move(v);
  return j;
}

Json Json::array() {
  Json j;
  j.kind_ = Kind::Array;
  return j;
}

Json Json::object() {
  Json j;
  j.kind_ = Kind::Object;
  return j;
}

void Json::push_back(Json v) {
  if (kind_ != Kind::Array) throw InvalidValue("Json::push_back on non-array");
  array_.push_back(std::move(v));
}

Json& Json::operator[](const std::string& key) {
  if (kind_ != Kind::Object) throw InvalidValue("Json::operator[] on non-object");
  return object_[key];
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace {

void write_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

}  // namespace

void Json::write(std::string& out, int depth) const {
  switch (kind_) {
    case Kind::Null:
      out += "null";
      break;
    case Kind::Bool:
      out += bool_ ? "true" : "false";
      break;
    case Kind::Int:
      out += std::to_string(int_);
      break;
    case Kind::UInt:
      out += std::to_string(uint_);
      break;
    case Kind::Double:
      out += format_double(double_);
      break;
    case Kind::String:
      write_escaped(out, string_);
      break;
    case Kind::Array:
      if (array_.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < array_.size(); ++i) {
        indent(out, depth + 1);
        array_[i].write(out, depth + 1);
        if (i + 1 < array_.size()) out += ',';
        out += '\n';
      }
      indent(out, depth);
      out += ']';
      break;
    case Kind::Object:
      if (object_.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      {
        std::size_t i = 0;
        for (const auto& [key, value] : object_) {
          indent(out, depth + 1);
          write_escaped(out, key);
          out += ": ";
          value.write(out, depth + 1);
          if (++i < object_.size()) out += ',';
          out += '\n';
        }
      }
      indent(out, depth);
      out += '}';
      break;
  }
}

std::string Json::dump() const {
  std::string out;
  write(out, 0);
  out += '\n';
  return out;
}

Json to_json(const RunReport& report) {
  Json root = Json::object();
  root["config"] = report.config;

  Json keyframes = Json::array();
  for (const auto& kf : report.keyframes) {
    Json entry = Json::object();
    entry["id"] = Json::integer(kf.id);
    entry["frame_index"] = Json::integer(kf.frame_index);
    if (kf.has_pose) {
      Json pose = Json::object();
      Json q = Json::array();
      for (double v : kf.q) q.push_back(Json::number(v));
      Json t = Json::array();
      for (double v : kf.t) t.push_back(Json::number(v));
      pose["q"] = std::move(q);
      pose["t"] = std::move(t);
      entry["pose"] = std::move(pose);
    } else {
      entry["pose"] = Json::null();
    }
    keyframes.push_back(std::move(entry));
  }
  root["keyframes"] = std::move(keyframes);

  Json clusters = Json::array();
  for (const auto& cluster : report.clusters) {
    Json entry = Json::object();
    entry["id"] = Json::integer(cluster.id);
    Json members = Json::array();
    for (int m : cluster.members) members.push_back(Json::integer(m));
    entry["members"] = std::move(members);
    entry["cohesiveness"] = Json::number(cluster.cohesiveness);
    Json panoramas = Json::array();
    for (const auto& name : cluster.panoramas) panoramas.push_back(Json::string(name));
    entry["panoramas"] = std::move(panoramas);
    clusters.push_back(std::move(entry));
  }
  root["clusters"] = std::move(clusters);

  Json unassigned = Json::array();
  for (int id : report.unassigned) unassigned.push_back(Json::integer(id));
  root["unassigned"] = std::move(unassigned);

  Json diagnostics = Json::object();
  Json timings = Json::object();
  for (const auto& [phase, ms] : report.timings_ms) timings[phase] = Json::number(ms);
  diagnostics["timings_ms"] = std::move(timings);
  diagnostics["map_points"] = Json::integer(report.map_points);
  diagnostics["vo_initialized"] = Json::boolean(report.vo_initialized);
  root["diagnostics"] = std::move(diagnostics);
  return root;
}

std::string serialize_report(const RunReport& report) { return to_json(report).dump(); }

void write_report(const RunReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report file for writing: " + path);
  const std::string text = serialize_report(report);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write on report file: " + path);
}

}  // namespace panosum::report
