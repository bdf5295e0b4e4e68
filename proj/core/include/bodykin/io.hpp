#pragma once

#include <string>

#include "bodykin/body_model.hpp"
#include "bodykin/cloud_fitter.hpp"
#include "bodykin/kinematics.hpp"
#include "bodykin/mesh_hierarchy.hpp"
#include "bodykin/types.hpp"
#include "bodykin/vote_fusion.hpp"

namespace bodykin {

/// All loaders throw IoError for missing/unreadable/malformed files and
/// propagate ParamError/NumericError when the parsed data violates the
/// type's invariants. All savers write atomically (temp file + rename) so a
/// crash never leaves a half-written file, and serialize doubles with
/// round-trip precision.

/// Wavefront OBJ, `v`/`f` records only (meters). Faces must be triangles.
Mesh load_obj(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

/// Binary little-endian PLY with float32 x/y/z properties.
PointCloud load_ply(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path);

/// Whitespace-separated x y z text, one point per line.
PointCloud load_xyz(const std::string& path);
void save_xyz(const PointCloud& cloud, const std::string& path);

/// Dispatch on extension: .ply or .xyz.
PointCloud load_cloud(const std::string& path);

/// JSON body model (documented schema, format_version 1). save/load round
/// trips are bitwise exact.
BodyModel load_model(const std::string& path);
void save_model(const BodyModel& model, const std::string& path);

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& skeleton, const std::string& path);

PoseState load_pose(const std::string& path);
void save_pose(const PoseState& pose, const std::string& path);

ShapeState load_shape(const std::string& path);
void save_shape(const ShapeState& shape, const std::string& path);

VoteSet load_votes(const std::string& path);
void save_votes(const VoteSet& votes, const std::string& path);

IkResult load_ik_result(const std::string& path);
void save_ik_result(const IkResult& result, const std::string& path);

FitResult load_fit_result(const std::string& path);
void save_fit_result(const FitResult& result, const std::string& path);

void save_hierarchy(const MeshHierarchy& hierarchy, const std::string& path);

/// Write bytes to `path` via a temporary file in the same directory followed
/// by an atomic rename.
void write_file_atomic(const std::string& path, const std::string& bytes);

/// Whole file as a string; IoError when unreadable.
std::string read_file(const std::string& path);

}  // namespace bodykin
