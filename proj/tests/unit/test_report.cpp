#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "panosum/cluster_plot.hpp"
#include "panosum/errors.hpp"
#include "panosum/report.hpp"
#include "temp_dir.hpp"

using namespace panosum;
using report::Json;

namespace {

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

report::RunReport small_report() {
  report::RunReport r;
  r.config = Json::object();
  r.config["seed"] = Json::uinteger(42);
  r.config["sigma_pos"] = Json::number(0.5);

  report::KeyframeEntry kf0;
  kf0.id = 0;
  kf0.frame_index = 0;
  kf0.has_pose = true;
  r.keyframes.push_back(kf0);
  report::KeyframeEntry kf1;
  kf1.id = 1;
  kf1.frame_index = 5;
  kf1.has_pose = false;
  r.keyframes.push_back(kf1);

  report::ClusterEntry c;
  c.id = 0;
  c.members = {0};
  c.cohesiveness = 0.75;
  c.panoramas = {"panorama_0_0.png"};
  r.clusters.push_back(c);

  r.unassigned = {1};
  r.timings_ms = {{"load", 1.5}, {"vo", 2.0}};
  r.map_points = 3;
  r.vo_initialized = true;
  return r;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("format_double") {
  CHECK(report::format_double(0.0) == "0");
  CHECK(report::format_double(-0.0) == "-0");
  CHECK(report::format_double(0.5) == "0.5");
  CHECK(report::format_double(1.0) == "1");
  CHECK(report::format_double(1.0 / 3.0) == "0.333333333");
  CHECK(report::format_double(1e300) == "1e+300");
  CHECK(report::format_double(2.5e-7) == "2.5e-07");
  CHECK(report::format_double(123456789.0) == "123456789");
  CHECK(report::format_double(1234567890.0) == "1.23456789e+09");
  CHECK(report::format_double(std::nan("")) == "null");
  CHECK(report::format_double(std::numeric_limits<double>::infinity()) == "null");
  CHECK(report::format_double(-std::numeric_limits<double>::infinity()) == "null");
}

TEST_CASE("Json emission") {
  SUBCASE("object keys are sorted") {
    Json j = Json::object();
    j["zeta"] = Json::integer(1);
    j["alpha"] = Json::integer(2);
    j["mid"] = Json::integer(3);
    CHECK(j.dump() == "{\n  \"alpha\": 2,\n  \"mid\": 3,\n  \"zeta\": 1\n}\n");
  }
  SUBCASE("string escaping") {
    Json j = Json::array();
    j.push_back(Json::string("a\"b\\c\nd\te\x01"
                             "f"));
    CHECK(j.dump() == "[\n  \"a\\\"b\\\\c\\nd\\te\\u0001f\"\n]\n");
  }
  SUBCASE("empty containers and scalars") {
    CHECK(Json::array().dump() == "[]\n");
    CHECK(Json::object().dump() == "{}\n");
    CHECK(Json::null().dump() == "null\n");
    CHECK(Json::boolean(true).dump() == "true\n");
    CHECK(Json::boolean(false).dump() == "false\n");
    CHECK(Json::integer(-7).dump() == "-7\n");
    CHECK(Json::uinteger(18446744073709551615ull).dump() == "18446744073709551615\n");
  }
  SUBCASE("container misuse throws") {
    Json arr = Json::array();
    CHECK_THROWS_AS(arr["key"], InvalidValue);
    Json obj = Json::object();
    CHECK_THROWS_AS(obj.push_back(Json::null()), InvalidValue);
  }
}

TEST_CASE("serialize_report golden bytes") {
  const std::string expected = R"json({
  "clusters": [
    {
      "cohesiveness": 0.75,
      "id": 0,
      "members": [
        0
      ],
      "panoramas": [
        "panorama_0_0.png"
      ]
    }
  ],
  "config": {
    "seed": 42,
    "sigma_pos": 0.5
  },
  "diagnostics": {
    "map_points": 3,
    "timings_ms": {
      "load": 1.5,
      "vo": 2
    },
    "vo_initialized": true
  },
  "keyframes": [
    {
      "frame_index": 0,
      "id": 0,
      "pose": {
        "q": [
          1,
          0,
          0,
          0
        ],
        "t": [
          0,
          0,
          0
        ]
      }
    },
    {
      "frame_index": 5,
      "id": 1,
      "pose": null
    }
  ],
  "unassigned": [
    1
  ]
}
)json";
  CHECK(report::serialize_report(small_report()) == expected);
}

TEST_CASE("serialize_report round trips through an independent parser") {
  const std::string text = report::serialize_report(small_report());
  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j["config"]["seed"] == 42);
  CHECK(j["config"]["sigma_pos"] == 0.5);
  CHECK(j["keyframes"].size() == 2);
  CHECK(j["keyframes"][0]["pose"]["q"][0] == 1.0);
  CHECK(j["keyframes"][1]["pose"].is_null());
  CHECK(j["clusters"][0]["members"] == nlohmann::json::array({0}));
  CHECK(j["clusters"][0]["panoramas"][0] == "panorama_0_0.png");
  CHECK(j["unassigned"] == nlohmann::json::array({1}));
  CHECK(j["diagnostics"]["map_points"] == 3);
  CHECK(j["diagnostics"]["vo_initialized"] == true);
  CHECK(j["diagnostics"]["timings_ms"]["load"] == 1.5);
}

TEST_CASE("serialize_report is byte-stable") {
  const report::RunReport r = small_report();
  CHECK(report::serialize_report(r) == report::serialize_report(r));
}

TEST_CASE("write_report writes the serialized bytes") {
  const testsupport::TempDir dir("report");
  const std::string path = dir.str() + "/report.json";
  const report::RunReport r = small_report();
  report::write_report(r, path);
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  const std::string disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(disk == report::serialize_report(r));

  CHECK_THROWS_AS(report::write_report(r, dir.str() + "/missing_dir/report.json"), IoError);
}

TEST_CASE("render_cluster_plot") {
  SUBCASE("no keyframes throws") {
    CHECK_THROWS_AS(plot::render_cluster_plot({}, {}), InvalidValue);
  }
  SUBCASE("single unclustered keyframe") {
    plot::PlotPoint p;
    p.keyframe_id = 0;
    p.has_center = true;
    const std::string svg = plot::render_cluster_plot({p}, {});
    CHECK(count_of(svg, "<circle") == 1);
    CHECK(count_of(svg, "#999999") == 2);  // circle fill + legend swatch
    CHECK(count_of(svg, "unassigned") == 1);
    CHECK(count_of(svg, "cluster ") == 0);
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
  SUBCASE("clusters color circles and fill the legend") {
    std::vector<plot::PlotPoint> pts(3);
    for (int i = 0; i < 3; ++i) {
      pts[static_cast<std::size_t>(i)].keyframe_id = i;
      pts[static_cast<std::size_t>(i)].has_center = true;
      pts[static_cast<std::size_t>(i)].center = Eigen::Vector3d(i, 0.2 * i, 0);
    }
    const std::string svg = plot::render_cluster_plot(pts, {{0, {0, 1}}});
    CHECK(count_of(svg, "<circle") == 3);
    CHECK(count_of(svg, "#e6194b") == 3);  // two member circles + legend swatch
    CHECK(count_of(svg, "#999999") == 2);  // unassigned circle + legend swatch
    CHECK(svg.find("cluster 0 (2)") != std::string::npos);
    CHECK(count_of(svg, "unassigned") == 1);
  }
  SUBCASE("fully clustered plots omit the unassigned row") {
    std::vector<plot::PlotPoint> pts(2);
    pts[0].keyframe_id = 0;
    pts[1].keyframe_id = 1;
    const std::string svg = plot::render_cluster_plot(pts, {{0, {0, 1}}});
    CHECK(count_of(svg, "unassigned") == 0);
    CHECK(count_of(svg, "cluster 0 (2)") == 1);
  }
  SUBCASE("byte-stable output") {
    std::vector<plot::PlotPoint> pts(4);
    for (int i = 0; i < 4; ++i) {
      pts[static_cast<std::size_t>(i)].keyframe_id = i;
      pts[static_cast<std::size_t>(i)].has_center = (i != 3);
      pts[static_cast<std::size_t>(i)].center = Eigen::Vector3d(i, i * i, 1);
    }
    const std::vector<std::pair<int, std::vector<int>>> clusters = {{1, {2, 3}}, {0, {0, 1}}};
    CHECK(plot::render_cluster_plot(pts, clusters) == plot::render_cluster_plot(pts, clusters));
  }
}

}  // TEST_SUITE
