#include "bodykin/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "bodykin/errors.hpp"

namespace bodykin {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

json parse_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid JSON: " + e.what());
  }
}

void check_version(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("format_version") ||
      !j["format_version"].is_number_integer() ||
      j["format_version"].get<int>() != 1) {
    throw IoError(path + ": missing or unsupported format_version");
  }
}

json points_to_json(const Points& p) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    rows.push_back({p(i, 0), p(i, 1), p(i, 2)});
  }
  return rows;
}

Points points_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected an array of points");
  Points p(static_cast<Eigen::Index>(j.size()), 3);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != 3) {
      throw IoError(where + ": row " + std::to_string(i) +
                    " is not a 3-vector");
    }
    for (int c = 0; c < 3; ++c) {
      if (!row[c].is_number()) {
        throw IoError(where + ": non-numeric coordinate at row " +
                      std::to_string(i));
      }
      p(static_cast<Eigen::Index>(i), c) = row[c].get<double>();
    }
  }
  return p;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw IoError(where + ": expected a non-empty 2D array");
  }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw IoError(where + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw IoError(where + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j[i][c].get<double>();
    }
  }
  return m;
}

json vec3_to_json(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw IoError(where + ": expected a 3-vector");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json mat3_to_json(const Mat3& m) {
  json row_major = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) row_major.push_back(m(r, c));
  }
  return row_major;
}

Mat3 mat3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 9) {
    throw IoError(where + ": expected 9 row-major entries");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j[3 * r + c].get<double>();
  }
  return m;
}

json pose_to_json(const PoseState& pose) {
  return json{{"joint_rotations", points_to_json(pose.joint_rotations)},
              {"root_translation", vec3_to_json(pose.root_translation)}};
}

PoseState pose_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("joint_rotations")) {
    throw IoError(where + ": expected a pose object");
  }
  PoseState pose;
  pose.joint_rotations =
      points_from_json(j["joint_rotations"], where + ".joint_rotations");
  if (j.contains("root_translation")) {
    pose.root_translation =
        vec3_from_json(j["root_translation"], where + ".root_translation");
  }
  return pose;
}

void dump_atomic(const json& j, const std::string& path) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError(path + ": read failed");
  return buffer.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path parent =
      target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);  // best effort; open() reports failures
  const fs::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(temp.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(temp.string() + ": write failed");
  }
  fs::rename(temp, target, ec);
  if (ec) {
    throw IoError(path + ": atomic rename failed: " + ec.message());
  }
}

Mesh load_obj(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream lines(text);
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(fields >> v.x() >> v.y() >> v.z())) {
        throw IoError(path + ":" + std::to_string(line_no) +
                      ": malformed vertex record");
      }
      vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> face{};
      std::string extra;
      for (int c = 0; c < 3; ++c) {
        std::string token;
        if (!(fields >> token)) {
          throw IoError(path + ":" + std::to_string(line_no) +
                        ": face needs 3 indices");
        }
        // Accept "v", "v/vt", "v/vt/vn" forms; only the vertex index is used.
        const std::size_t slash = token.find('/');
        const std::string head =
            slash == std::string::npos ? token : token.substr(0, slash);
        try {
          face[c] = std::stoi(head) - 1;  // OBJ is 1-based
        } catch (const std::exception&) {
          throw IoError(path + ":" + std::to_string(line_no) +
                        ": bad face index '" + token + "'");
        }
      }
      if (fields >> extra) {
        throw IoError(path + ":" + std::to_string(line_no) +
                      ": only triangles are supported");
      }
      faces.push_back(face);
    }
    // Every other record type (vn, vt, comments, groups) is ignored.
  }

  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    mesh.vertices.row(static_cast<Eigen::Index>(i)) = vertices[i].transpose();
  }
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const int v = faces[i][c];
      if (v < 0 || v >= static_cast<int>(vertices.size())) {
        throw IoError(path + ": face " + std::to_string(i) +
                      " references vertex " + std::to_string(v + 1) +
                      " out of range");
      }
      mesh.faces(static_cast<Eigen::Index>(i), c) = v;
    }
  }
  return mesh;
}

void save_obj(const Mesh& mesh, const std::string& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertex_count()) * 48);
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    out += "v " + format_double(mesh.vertices(i, 0)) + " " +
           format_double(mesh.vertices(i, 1)) + " " +
           format_double(mesh.vertices(i, 2)) + "\n";
  }
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    out += "f " + std::to_string(mesh.faces(f, 0) + 1) + " " +
           std::to_string(mesh.faces(f, 1) + 1) + " " +
           std::to_string(mesh.faces(f, 2) + 1) + "\n";
  }
  write_file_atomic(path, out);
}

PointCloud load_ply(const std::string& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw IoError(path + ": not a PLY file");
  }
  std::size_t count = 0;
  bool binary_le = false;
  std::vector<std::string> properties;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "format") {
      std::string fmt;
      fields >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (tag == "element") {
      std::string name;
      fields >> name >> count;
      if (name != "vertex") {
        throw IoError(path + ": unsupported element '" + name + "'");
      }
    } else if (tag == "property") {
      std::string type, name;
      fields >> type >> name;
      if (type != "float") {
        throw IoError(path + ": unsupported property type '" + type + "'");
      }
      properties.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!binary_le) {
    throw IoError(path + ": only binary_little_endian PLY is supported");
  }
  if (properties != std::vector<std::string>{"x", "y", "z"}) {
    throw IoError(path + ": expected exactly x, y, z float properties");
  }

  const std::size_t header_size = static_cast<std::size_t>(in.tellg());
  const std::size_t need = count * 3 * sizeof(float);
  if (bytes.size() < header_size + need) {
    throw IoError(path + ": truncated vertex data");
  }
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(count), 3);
  const char* cursor = bytes.data() + header_size;
  for (std::size_t i = 0; i < count; ++i) {
    float xyz[3];
    std::memcpy(xyz, cursor, sizeof(xyz));
    cursor += sizeof(xyz);
    for (int c = 0; c < 3; ++c) {
      cloud.points(static_cast<Eigen::Index>(i), c) = xyz[c];
    }
  }
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n"
                    "end_header\n";
  out.reserve(out.size() + static_cast<std::size_t>(cloud.size()) * 12);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const float xyz[3] = {static_cast<float>(cloud.points(i, 0)),
                          static_cast<float>(cloud.points(i, 1)),
                          static_cast<float>(cloud.points(i, 2))};
    out.append(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  write_file_atomic(path, out);
}

PointCloud load_xyz(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::vector<Vec3> points;
  double x, y, z;
  while (in >> x >> y >> z) points.emplace_back(x, y, z);
  if (!in.eof()) {
    throw IoError(path + ": malformed XYZ record near point " +
                  std::to_string(points.size()));
  }
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    cloud.points.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return cloud;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(cloud.size()) * 48);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    out += format_double(cloud.points(i, 0)) + " " +
           format_double(cloud.points(i, 1)) + " " +
           format_double(cloud.points(i, 2)) + "\n";
  }
  write_file_atomic(path, out);
}

PointCloud load_cloud(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".ply") return load_ply(path);
  if (ext == ".xyz") return load_xyz(path);
  throw IoError(path + ": unknown point cloud extension '" + ext +
                "' (expected .ply or .xyz)");
}

BodyModel load_model(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  for (const char* key :
       {"template_vertices", "faces", "lbs_weights", "parents",
        "joint_regressor"}) {
    if (!j.contains(key)) {
      throw IoError(path + ": missing field '" + key + "'");
    }
  }

  BodyModel model;
  model.name = j.value("name", std::string{});
  model.template_vertices =
      points_from_json(j["template_vertices"], path + ".template_vertices");

  const auto& faces = j["faces"];
  model.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!faces[f].is_array() || faces[f].size() != 3) {
      throw IoError(path + ": face " + std::to_string(f) +
                    " is not an index triple");
    }
    for (int c = 0; c < 3; ++c) {
      model.faces(static_cast<Eigen::Index>(f), c) = faces[f][c].get<int>();
    }
  }

  model.lbs_weights = matrix_from_json(j["lbs_weights"], path + ".lbs_weights");
  model.joint_regressor =
      matrix_from_json(j["joint_regressor"], path + ".joint_regressor");
  model.parents.clear();
  for (const auto& p : j["parents"]) model.parents.push_back(p.get<int>());
  if (j.contains("shape_basis")) {
    for (const auto& basis : j["shape_basis"]) {
      model.shape_basis.push_back(
          points_from_json(basis, path + ".shape_basis"));
    }
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw IoError(path + ": invalid model: " + e.what());
  }
  return model;
}

void save_model(const BodyModel& model, const std::string& path) {
  json j{{"format_version", 1},
         {"name", model.name},
         {"template_vertices", points_to_json(model.template_vertices)},
         {"lbs_weights", matrix_to_json(model.lbs_weights)},
         {"joint_regressor", matrix_to_json(model.joint_regressor)},
         {"parents", model.parents}};
  json faces = json::array();
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    faces.push_back(
        {model.faces(f, 0), model.faces(f, 1), model.faces(f, 2)});
  }
  j["faces"] = std::move(faces);
  if (!model.shape_basis.empty()) {
    json basis = json::array();
    for (const auto& b : model.shape_basis) basis.push_back(points_to_json(b));
    j["shape_basis"] = std::move(basis);
  }
  dump_atomic(j, path);
}

Skeleton load_skeleton(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  if (!j.contains("joints")) throw IoError(path + ": missing 'joints'");
  Skeleton s;
  s.joints = points_from_json(j["joints"], path + ".joints");
  if (j.contains("joint_names")) {
    for (const auto& name : j["joint_names"]) {
      s.joint_names.push_back(name.get<std::string>());
    }
    if (!s.joint_names.empty() &&
        static_cast<Eigen::Index>(s.joint_names.size()) != s.joint_count()) {
      throw IoError(path + ": joint_names count != joints count");
    }
  }
  return s;
}

void save_skeleton(const Skeleton& skeleton, const std::string& path) {
  json j{{"format_version", 1}, {"joints", points_to_json(skeleton.joints)}};
  if (!skeleton.joint_names.empty()) j["joint_names"] = skeleton.joint_names;
  dump_atomic(j, path);
}

PoseState load_pose(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  return pose_from_json(j, path);
}

void save_pose(const PoseState& pose, const std::string& path) {
  json j = pose_to_json(pose);
  j["format_version"] = 1;
  dump_atomic(j, path);
}

ShapeState load_shape(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  if (!j.contains("coefficients")) {
    throw IoError(path + ": missing 'coefficients'");
  }
  ShapeState shape;
  const auto& coeffs = j["coefficients"];
  shape.coefficients.resize(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    shape.coefficients[static_cast<Eigen::Index>(i)] = coeffs[i].get<double>();
  }
  return shape;
}

void save_shape(const ShapeState& shape, const std::string& path) {
  json coeffs = json::array();
  for (Eigen::Index i = 0; i < shape.size(); ++i) {
    coeffs.push_back(shape.coefficients[i]);
  }
  dump_atomic(json{{"format_version", 1}, {"coefficients", std::move(coeffs)}},
              path);
}

VoteSet load_votes(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  if (!j.contains("offsets") || !j.contains("confidences")) {
    throw IoError(path + ": missing 'offsets' or 'confidences'");
  }
  VoteSet votes;
  votes.offsets = points_from_json(j["offsets"], path + ".offsets");
  votes.confidences =
      matrix_from_json(j["confidences"], path + ".confidences");
  votes.validate();
  return votes;
}

void save_votes(const VoteSet& votes, const std::string& path) {
  dump_atomic(json{{"format_version", 1},
                   {"offsets", points_to_json(votes.offsets)},
                   {"confidences", matrix_to_json(votes.confidences)}},
              path);
}

IkResult load_ik_result(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  IkResult result;
  for (const auto& m : j.at("local_rotations")) {
    result.local_rotations.push_back(mat3_from_json(m, path));
  }
  for (const auto& m : j.at("global_rotations")) {
    result.global_rotations.push_back(mat3_from_json(m, path));
  }
  result.pose = pose_from_json(j.at("pose"), path + ".pose");
  const auto& residuals = j.at("per_joint_residual");
  result.per_joint_residual.resize(
      static_cast<Eigen::Index>(residuals.size()));
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    result.per_joint_residual[static_cast<Eigen::Index>(i)] =
        residuals[i].get<double>();
  }
  return result;
}

void save_ik_result(const IkResult& result, const std::string& path) {
  json locals = json::array(), globals = json::array();
  for (const auto& m : result.local_rotations) locals.push_back(mat3_to_json(m));
  for (const auto& m : result.global_rotations) {
    globals.push_back(mat3_to_json(m));
  }
  json residuals = json::array();
  for (Eigen::Index i = 0; i < result.per_joint_residual.size(); ++i) {
    residuals.push_back(result.per_joint_residual[i]);
  }
  dump_atomic(json{{"format_version", 1},
                   {"local_rotations", std::move(locals)},
                   {"global_rotations", std::move(globals)},
                   {"pose", pose_to_json(result.pose)},
                   {"per_joint_residual", std::move(residuals)}},
              path);
}

FitResult load_fit_result(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  FitResult result;
  result.pose = pose_from_json(j.at("pose"), path + ".pose");
  const auto& coeffs = j.at("shape").at("coefficients");
  result.shape.coefficients.resize(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    result.shape.coefficients[static_cast<Eigen::Index>(i)] =
        coeffs[i].get<double>();
  }
  result.objective_trace =
      j.at("objective_trace").get<std::vector<double>>();
  result.final_objective = j.at("final_objective").get<double>();
  result.final_mpjpe_cm = j.at("final_mpjpe_cm").get<double>();
  result.converged = j.at("converged").get<bool>();
  result.iterations = j.at("iterations").get<int>();
  return result;
}

void save_fit_result(const FitResult& result, const std::string& path) {
  json coeffs = json::array();
  for (Eigen::Index i = 0; i < result.shape.size(); ++i) {
    coeffs.push_back(result.shape.coefficients[i]);
  }
  dump_atomic(
      json{{"format_version", 1},
           {"pose", pose_to_json(result.pose)},
           {"shape", json{{"coefficients", std::move(coeffs)}}},
           {"translation", vec3_to_json(result.pose.root_translation)},
           {"objective_trace", result.objective_trace},
           {"final_objective", result.final_objective},
           {"final_mpjpe_cm", result.final_mpjpe_cm},
           {"converged", result.converged},
           {"iterations", result.iterations}},
      path);
}

void save_hierarchy(const MeshHierarchy& hierarchy, const std::string& path) {
  json levels = json::array();
  for (const auto& level : hierarchy.levels) {
    json edges = json::array();
    for (const auto& e : level.edges) edges.push_back({e[0], e[1]});
    levels.push_back(json{{"vertex_count", level.vertex_count},
                          {"edges", std::move(edges)},
                          {"positions", points_to_json(level.positions)}});
  }
  dump_atomic(json{{"format_version", 1},
                   {"requested_levels", hierarchy.requested_levels},
                   {"achieved_levels", hierarchy.achieved_levels},
                   {"levels", std::move(levels)},
                   {"parent_of", hierarchy.parent_of},
                   {"children_of", hierarchy.children_of}},
              path);
}

}  // namespace bodykin
