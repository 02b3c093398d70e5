#pragma once

#include <limits>
#include <string>
#include <vector>

#include "shapeocr/edges.hpp"
#include "shapeocr/image.hpp"

namespace shapeocr {

enum class ConstraintKind { kContour, kDistant, kBridge };

const char* to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& text);

struct PoolVariable {
  Landmark landmark;  // model-frame position and orientation
  int window = 0;     // half-width of the translation pool used at training time
};

// Hard pairwise factor: the displacement of b relative to a may differ from the model's by
// at most `radius` pixels on each axis.
struct LateralConstraint {
  int a = 0;
  int b = 0;
  int radius = 0;
  ConstraintKind kind = ConstraintKind::kContour;

  friend bool operator==(const LateralConstraint&, const LateralConstraint&) = default;
};

struct Contour {
  std::vector<int> pools;  // traversal order
  bool closed = false;

  friend bool operator==(const Contour&, const Contour&) = default;
};

struct BuildParams {
  EdgeParams edges;
  int suppression_radius = 3;
  int perturbation_radius = 2;    // r: slack of a direct constraint between touching pools
  double radius_per_pixel = 0.3;  // extra slack per pixel of landmark separation
  double gamma = 3.0;
  int window = 8;
  double normalized_height = 48.0;

  // Slack granted to a direct constraint between two pools `dist` pixels apart.
  int radius_for(double dist) const;

  friend bool operator==(const BuildParams&, const BuildParams&) = default;
};

struct CharacterModel {
  char label = '?';
  std::string font_id;
  std::vector<PoolVariable> pools;
  std::vector<LateralConstraint> constraints;
  std::vector<Contour> contours;
  double normalized_height = 48.0;

  Point position(int pool) const { return pools[std::size_t(pool)].landmark.position(); }
};

inline constexpr int kUnbounded = std::numeric_limits<int>::max();

// Chains of landmarks following connected edge pixels. Each landmark claims the edge pixels
// nearest to it (by path length along the edge); landmarks whose claims touch are neighbors.
std::vector<Contour> trace_contours(const LandmarkSet& landmarks, const OrientedEdgeMap& edges);

// All-pairs minimum total radius over the constraint graph; kUnbounded when disconnected.
std::vector<std::vector<int>> deformation_bounds(int pool_count,
                                                 const std::vector<LateralConstraint>& constraints);
int deformation_bound(const CharacterModel& model, int i, int j);

bool constraint_graph_connected(int pool_count, const std::vector<LateralConstraint>& constraints);

CharacterModel build_model(char label, const std::string& font_id, const LandmarkSet& landmarks,
                           const OrientedEdgeMap& edges, const BuildParams& params);

// Edge detection, sparsification and construction from a clean glyph image.
CharacterModel build_model_from_glyph(char label, const std::string& font_id,
                                      const GrayImage& glyph, const BuildParams& params);

// Throws kInvalidModel when indices, radii, contours or connectivity are inconsistent.
void validate_model(const CharacterModel& model);

}  // namespace shapeocr
