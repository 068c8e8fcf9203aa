#include "panosum/stitcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

#include "panosum/errors.hpp"
#include "panosum/features.hpp"
#include "panosum/rng.hpp"
#include "panosum/warp.hpp"

namespace panosum::stitch {
namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

std::vector<AlignmentTree> build_alignment_tree(const std::vector<int>& image_ids,
                                                const std::vector<PairwiseMatchResult>& pairwise,
                                                int min_edge_inliers) {
  std::map<int, int> pos_of;
  for (std::size_t i = 0; i < image_ids.size(); ++i) pos_of[image_ids[i]] = static_cast<int>(i);
  const int n = static_cast<int>(image_ids.size());

  std::vector<PairwiseMatchResult> edges;
  for (const auto& e : pairwise) {
    if (e.inliers < min_edge_inliers) continue;
    if (!pos_of.count(e.id_a) || !pos_of.count(e.id_b) || e.id_a == e.id_b) continue;
    edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end(), [](const PairwiseMatchResult& a, const PairwiseMatchResult& b) {
    if (a.inliers != b.inliers) return a.inliers > b.inliers;
    const auto ka = std::minmax(a.id_a, a.id_b);
    const auto kb = std::minmax(b.id_a, b.id_b);
    return ka < kb;
  });

  UnionFind uf(n);
  std::vector<const PairwiseMatchResult*> tree_edges;
  for (const auto& e : edges) {
    if (uf.unite(pos_of[e.id_a], pos_of[e.id_b])) tree_edges.push_back(&e);
  }

  // Incident inlier totals count every kept graph edge, not just tree edges.
  std::map<int, long long> incident;
  for (int id : image_ids) incident[id] = 0;
  for (const auto& e : edges) {
    incident[e.id_a] += e.inliers;
    incident[e.id_b] += e.inliers;
  }

  std::map<int, std::vector<int>> components;  // root id -> members
  for (int id : image_ids) components[image_ids[uf.find(pos_of[id])]].push_back(id);

  std::vector<std::vector<int>> ordered;
  for (auto& [root, members] : components) {
    std::sort(members.begin(), members.end());
    ordered.push_back(members);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });

  std::vector<AlignmentTree> trees;
  for (const auto& members : ordered) {
    AlignmentTree tree;
    tree.image_ids = members;
    tree.reference = members.front();
    long long best = std::numeric_limits<long long>::min();
    for (int id : members) {
      if (incident[id] > best) {
        best = incident[id];
        tree.reference = id;
      }
    }

    std::map<int, std::vector<const PairwiseMatchResult*>> adjacency;
    std::set<int> member_set(members.begin(), members.end());
    for (const auto* e : tree_edges) {
      if (!member_set.count(e->id_a)) continue;
      adjacency[e->id_a].push_back(e);
      adjacency[e->id_b].push_back(e);
      tree.edges.emplace_back(std::min(e->id_a, e->id_b), std::max(e->id_a, e->id_b));
    }
    std::sort(tree.edges.begin(), tree.edges.end());

    tree.transforms[tree.reference] = Eigen::Matrix3d::Identity();
    std::vector<int> frontier{tree.reference};
    while (!frontier.empty()) {
      const int u = frontier.back();
      frontier.pop_back();
      for (const auto* e : adjacency[u]) {
        const int v = (e->id_a == u) ? e->id_b : e->id_a;
        if (tree.transforms.count(v)) continue;
        // Stored h_ab maps id_a coords to id_b coords. T_v must map v to the
        // reference, so go v -> u first, then apply T_u.
        const Eigen::Matrix3d v_to_u = (e->id_a == v) ? e->h_ab : Eigen::Matrix3d(e->h_ab.inverse());
        tree.transforms[v] = tree.transforms[u] * v_to_u;
        frontier.push_back(v);
      }
    }
    trees.push_back(std::move(tree));
  }
  return trees;
}

namespace {

io::Image to_rgb(const io::Image& image) {
  if (image.channels == 3) return image;
  io::Image out;
  out.width = image.width;
  out.height = image.height;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.pixels[3 * i] = image.pixels[i];
    out.pixels[3 * i + 1] = image.pixels[i];
    out.pixels[3 * i + 2] = image.pixels[i];
  }
  return out;
}

struct MemberLayer {
  io::Image image;               // warped (or original) pixels
  std::vector<std::uint8_t> mask;  // 1 where image holds valid content
  std::vector<features::Keypoint> keypoints;
  std::vector<features::Descriptor> descriptors;
};

bool mask_square_valid(const std::vector<std::uint8_t>& mask, int w, int h, double x, double y, int r) {
  const int x0 = static_cast<int>(std::floor(x)) - r;
  const int y0 = static_cast<int>(std::floor(y)) - r;
  const int x1 = static_cast<int>(std::ceil(x)) + r;
  const int y1 = static_cast<int>(std::ceil(y)) + r;
  if (x0 < 0 || y0 < 0 || x1 >= w || y1 >= h) return false;
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx)
      if (!mask[static_cast<std::size_t>(yy) * w + xx]) return false;
  return true;
}

void extract_layer_features(MemberLayer& layer, const StitchConfig& config) {
  const int margin = features::kDescribeMargin + 2;
  io::Image gray = io::to_grayscale(layer.image);
  std::vector<features::Keypoint> kps;
  try {
    kps = features::detect_corners(gray, config.fast_threshold, config.max_keypoints, margin);
  } catch (const ImageTooSmall&) {
    return;
  }
  const bool full = std::all_of(layer.mask.begin(), layer.mask.end(), [](std::uint8_t m) { return m != 0; });
  if (!full) {
    // Warp borders put hard content/void edges in the frame; corners whose
    // descriptor support touches void pixels are artifacts of the warp, not
    // the scene, and match each other across images.
    std::vector<features::Keypoint> kept;
    for (const auto& kp : kps) {
      if (mask_square_valid(layer.mask, gray.width, gray.height, kp.x, kp.y, features::kDescribeMargin))
        kept.push_back(kp);
    }
    kps = std::move(kept);
  }
  if (config.subpixel_refine) features::refine_keypoints_centroid(gray, kps, features::kDescribeMargin);
  const io::Image smoothed = io::gaussian_smooth(gray);
  layer.descriptors = features::describe_all(smoothed, kps);
  layer.keypoints = std::move(kps);
}

double bilinear_mask(const std::vector<std::uint8_t>& mask, int w, int h, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  if (x0 < 0 || y0 < 0 || x0 >= w || y0 >= h) return 0.0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  auto m = [&](int xx, int yy) { return static_cast<double>(mask[static_cast<std::size_t>(yy) * w + xx]); };
  const double top = m(x0, y0) * (1.0 - fx) + m(x1, y0) * fx;
  const double bot = m(x0, y1) * (1.0 - fx) + m(x1, y1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

Panorama singleton_panorama(int cluster_id, int component, int keyframe_id, const io::Image& original) {
  Panorama pano;
  pano.canvas = original;
  pano.origin_x = 0;
  pano.origin_y = 0;
  pano.keyframe_ids = {keyframe_id};
  pano.cluster_id = cluster_id;
  pano.component = component;
  return pano;
}

std::vector<std::pair<int, int>> select_pairs(int n, const Eigen::MatrixXd* affinity, const StitchConfig& config) {
  std::set<std::pair<int, int>> pairs;
  if (n <= config.all_pairs_limit || affinity == nullptr) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace(i, j);
    return {pairs.begin(), pairs.end()};
  }
  for (int i = 0; i < n; ++i) {
    std::vector<int> others;
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::sort(others.begin(), others.end(), [&](int a, int b) {
      const double wa = (*affinity)(i, a);
      const double wb = (*affinity)(i, b);
      if (wa != wb) return wa > wb;
      return a < b;
    });
    const int fanout = std::min<int>(config.pair_fanout, static_cast<int>(others.size()));
    for (int k = 0; k < fanout; ++k) pairs.emplace(std::min(i, others[k]), std::max(i, others[k]));
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace

std::vector<Panorama> stitch_cluster(int cluster_id,
                                     const std::vector<int>& member_keyframe_ids,
                                     const std::vector<io::Image>& member_images,
                                     const io::CameraIntrinsics& intrinsics,
                                     const Eigen::MatrixXd* member_affinity,
                                     const StitchConfig& config) {
  if (member_keyframe_ids.size() != member_images.size())
    throw DimensionMismatch("stitch_cluster: ids and images differ in count");
  const int n = static_cast<int>(member_images.size());
  if (n == 0) return {};

  const bool any_color = std::any_of(member_images.begin(), member_images.end(),
                                     [](const io::Image& im) { return im.channels == 3; });
  std::vector<io::Image> originals(member_images.begin(), member_images.end());
  if (any_color)
    for (auto& im : originals) im = to_rgb(im);

  std::vector<MemberLayer> layers(n);
  for (int i = 0; i < n; ++i) {
    if (config.cylindrical) {
      WarpResult warped =
          cylindrical_warp(originals[i], intrinsics.fx, intrinsics.cx, intrinsics.cy);
      layers[i].image = std::move(warped.image);
      layers[i].mask = std::move(warped.mask);
    } else {
      layers[i].image = originals[i];
      layers[i].mask.assign(static_cast<std::size_t>(originals[i].width) * originals[i].height, 1);
    }
    extract_layer_features(layers[i], config);
  }

  std::vector<PairwiseMatchResult> pairwise;
  for (const auto& [i, j] : select_pairs(n, member_affinity, config)) {
    if (layers[i].descriptors.empty() || layers[j].descriptors.empty()) continue;
    const auto matches =
        features::match_descriptors(layers[i].descriptors, layers[j].descriptors, config.match_ratio, true);
    if (matches.size() < 4) continue;
    const std::uint64_t index = (static_cast<std::uint64_t>(cluster_id) << 40) |
                                (static_cast<std::uint64_t>(i) << 20) | static_cast<std::uint64_t>(j);
    try {
      HomographyResult res =
          estimate_homography_ransac(matches, layers[i].keypoints, layers[j].keypoints,
                                     config.ransac_threshold_px, config.ransac_max_iters,
                                     derive_seed(config.seed, 3, index));
      pairwise.push_back({i, j, res.h.H, static_cast<int>(res.inliers.size())});
    } catch (const Error&) {
      continue;
    }
  }

  std::vector<int> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  const auto trees = build_alignment_tree(positions, pairwise, config.min_edge_inliers);

  std::vector<Panorama> panoramas;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const AlignmentTree& tree = trees[t];
    const int component = static_cast<int>(t);

    auto emit_singletons = [&]() {
      for (int pos : tree.image_ids)
        panoramas.push_back(
            singleton_panorama(cluster_id, component, member_keyframe_ids[pos], originals[pos]));
    };

    if (tree.image_ids.size() == 1) {
      emit_singletons();
      continue;
    }

    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    bool degenerate = false;
    for (int pos : tree.image_ids) {
      const Eigen::Matrix3d& T = tree.transforms.at(pos);
      const double w1 = layers[pos].image.width - 1.0;
      const double h1 = layers[pos].image.height - 1.0;
      const double corners[4][2] = {{0, 0}, {w1, 0}, {0, h1}, {w1, h1}};
      for (const auto& c : corners) {
        Eigen::Vector3d p = T * Eigen::Vector3d(c[0], c[1], 1.0);
        if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || std::abs(p.z()) < 1e-9) {
          degenerate = true;
          break;
        }
        const double x = p.x() / p.z();
        const double y = p.y() / p.z();
        if (!std::isfinite(x) || !std::isfinite(y)) {
          degenerate = true;
          break;
        }
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
      if (degenerate) break;
    }
    const double kMaxSide = 12000.0;
    if (degenerate || max_x - min_x > kMaxSide || max_y - min_y > kMaxSide) {
      emit_singletons();
      continue;
    }

    const double origin_x = std::floor(min_x);
    const double origin_y = std::floor(min_y);
    const int cw = static_cast<int>(std::ceil(max_x) - origin_x) + 1;
    const int ch = static_cast<int>(std::ceil(max_y) - origin_y) + 1;
    const int cc = any_color ? 3 : 1;

    std::vector<ImageF> canvases;
    std::vector<std::vector<std::uint8_t>> canvas_masks;
    for (int pos : tree.image_ids) {
      const Eigen::Matrix3d T_inv = tree.transforms.at(pos).inverse();
      const io::Image& src = layers[pos].image;
      ImageF layer;
      layer.width = cw;
      layer.height = ch;
      layer.channels = cc;
      layer.data.assign(static_cast<std::size_t>(cw) * ch * cc, 0.0f);
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(cw) * ch, 0);
      for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
          const Eigen::Vector3d s = T_inv * Eigen::Vector3d(origin_x + x, origin_y + y, 1.0);
          if (std::abs(s.z()) < 1e-12) continue;
          const double sx = s.x() / s.z();
          const double sy = s.y() / s.z();
          if (sx < 0.0 || sy < 0.0 || sx > src.width - 1.0 || sy > src.height - 1.0) continue;
          if (bilinear_mask(layers[pos].mask, src.width, src.height, sx, sy) <= 0.999) continue;
          for (int c = 0; c < cc; ++c)
            layer.at(x, y, c) = static_cast<float>(bilinear_sample(src, sx, sy, c));
          mask[static_cast<std::size_t>(y) * cw + x] = 1;
        }
      }
      canvases.push_back(std::move(layer));
      canvas_masks.push_back(std::move(mask));
    }

    const std::vector<double> gains = gain_compensate(canvases, canvas_masks, config.gain_lambda);
    for (std::size_t i = 0; i < canvases.size(); ++i) {
      const float g = static_cast<float>(gains[i]);
      for (float& v : canvases[i].data) v *= g;
    }

    std::vector<std::vector<float>> weights;
    for (const auto& mask : canvas_masks) weights.push_back(chamfer_distance(mask, cw, ch));
    for (std::size_t p = 0; p < static_cast<std::size_t>(cw) * ch; ++p) {
      double wsum = 0.0;
      for (const auto& w : weights) wsum += w[p];
      if (wsum <= 0.0) continue;
      for (auto& w : weights) w[p] = static_cast<float>(w[p] / wsum);
    }

    Panorama pano;
    pano.canvas = multiband_blend(canvases, weights, config.blend_levels);
    pano.origin_x = origin_x;
    pano.origin_y = origin_y;
    for (int pos : tree.image_ids) pano.keyframe_ids.push_back(member_keyframe_ids[pos]);
    std::sort(pano.keyframe_ids.begin(), pano.keyframe_ids.end());
    pano.cluster_id = cluster_id;
    pano.component = component;
    panoramas.push_back(std::move(pano));
  }

  // One panorama per connected piece: degraded trees fall apart into
  // singletons, so every entry is its own component. Renumber densely.
  for (std::size_t i = 0; i < panoramas.size(); ++i) panoramas[i].component = static_cast<int>(i);
  return panoramas;
}

}  // namespace panosum::stitch
