// bodykin: batch CLI over the body-kinematics toolkit.
//
// Subcommands: lbs, ik, scan, coarsen, fit, eval. Every command writes its
// primary outputs atomically plus a run manifest, takes JSON config files
// where noted, and lets flags override file values (flag > file > default).
// Exit codes: 0 success, 2 parse/IO/usage, 3 numeric or degenerate data
// (including non-converged fits and all-degenerate IK).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bodykin/body_model.hpp"
#include "bodykin/cloud_fitter.hpp"
#include "bodykin/errors.hpp"
#include "bodykin/io.hpp"
#include "bodykin/kinematics.hpp"
#include "bodykin/mesh_hierarchy.hpp"
#include "bodykin/metrics.hpp"
#include "bodykin/scan_sim.hpp"
#include "bodykin/version.hpp"

namespace {

namespace bk = bodykin;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

constexpr const char* kModelEnvVar = "BODYKIN_MODEL";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

// One manifest per run, written next to the first primary output.
void write_manifest(const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    std::optional<std::uint64_t> seed, double duration,
                    std::string manifest_path) {
  if (manifest_path.empty()) {
    if (outputs.empty()) return;
    manifest_path = outputs.front() + ".manifest.json";
  }
  json m{{"command", command},
         {"toolkit_version", bk::version()},
         {"config", config},
         {"inputs", inputs},
         {"outputs", outputs},
         {"duration_seconds", duration}};
  if (seed.has_value()) m["seed"] = *seed;
  bk::write_file_atomic(manifest_path, m.dump(2) + "\n");
}

std::string resolve_model_path(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kModelEnvVar); env != nullptr && *env) {
    return env;
  }
  throw bk::ParamError(std::string("no model given: pass --model or set ") +
                       kModelEnvVar);
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(bk::read_file(path));
  } catch (const json::exception& e) {
    throw bk::IoError(path + ": invalid JSON: " + e.what());
  }
}

double json_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw bk::IoError(std::string("config field '") + key +
                      "' must be a number");
  }
  return j[key].get<double>();
}

// ---------------------------------------------------------------------------
// lbs

void cmd_lbs(CLI::App& app) {
  auto model_path = std::make_shared<std::string>();
  auto pose_path = std::make_shared<std::string>();
  auto shape_path = std::make_shared<std::string>();
  auto out_mesh = std::make_shared<std::string>();
  auto out_joints = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();

  CLI::App* cmd = app.add_subcommand(
      "lbs", "Pose a body model: write the skinned mesh and its joints");
  cmd->add_option("--model", *model_path,
                  "Body model JSON (default: $" + std::string(kModelEnvVar) +
                      ")");
  cmd->add_option("--pose", *pose_path, "Pose JSON (axis-angle per joint)")
      ->required();
  cmd->add_option("--shape", *shape_path, "Shape coefficients JSON");
  cmd->add_option("--out-mesh", *out_mesh, "Output OBJ path")->required();
  cmd->add_option("--out-joints", *out_joints,
                  "Output joints JSON (default: <out-mesh>.joints.json)");
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    const std::string model_file = resolve_model_path(*model_path);
    const bk::BodyModel model = bk::load_model(model_file);
    const bk::PoseState pose = bk::load_pose(*pose_path);
    bk::ShapeState shape;
    if (!shape_path->empty()) shape = bk::load_shape(*shape_path);

    const bk::LbsResult result = bk::lbs_forward(model, pose, shape);
    const std::string joints_path =
        out_joints->empty() ? *out_mesh + ".joints.json" : *out_joints;
    bk::save_obj(result.mesh, *out_mesh);
    bk::Skeleton joints;
    joints.joints = result.joints;
    bk::save_skeleton(joints, joints_path);

    std::vector<std::string> inputs{model_file, *pose_path};
    if (!shape_path->empty()) inputs.push_back(*shape_path);
    write_manifest("lbs", json::object(), inputs, {*out_mesh, joints_path},
                   std::nullopt, watch.seconds(), *manifest);
  });
}

// ---------------------------------------------------------------------------
// ik

void cmd_ik(CLI::App& app) {
  auto model_path = std::make_shared<std::string>();
  auto mesh_path = std::make_shared<std::string>();
  auto shape_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();
  auto threshold = std::make_shared<double>(0.85);

  CLI::App* cmd = app.add_subcommand(
      "ik", "Recover pose parameters from a mesh with the model's topology");
  cmd->add_option("--model", *model_path, "Body model JSON");
  cmd->add_option("--mesh", *mesh_path, "Input OBJ mesh")->required();
  cmd->add_option("--shape", *shape_path, "Shape coefficients JSON");
  cmd->add_option("--threshold", *threshold,
                  "Skinning-weight selection threshold (default 0.85)");
  cmd->add_option("--out", *out_path, "Output IK result JSON")->required();
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    const std::string model_file = resolve_model_path(*model_path);
    const bk::BodyModel model = bk::load_model(model_file);
    const bk::Mesh mesh = bk::load_obj(*mesh_path);
    bk::ShapeState shape;
    if (!shape_path->empty()) shape = bk::load_shape(*shape_path);

    const bk::JointVertexSelection selection =
        bk::select_vertices(model, *threshold);
    const bk::IkResult result = bk::meshik(model, mesh, shape, selection);
    bk::save_ik_result(result, *out_path);

    std::vector<std::string> inputs{model_file, *mesh_path};
    if (!shape_path->empty()) inputs.push_back(*shape_path);
    write_manifest("ik", json{{"threshold", *threshold}}, inputs, {*out_path},
                   std::nullopt, watch.seconds(), *manifest);

    int solved = 0;
    for (Eigen::Index i = 0; i < result.per_joint_residual.size(); ++i) {
      if (result.per_joint_residual[i] >= 0.0) ++solved;
    }
    if (solved == 0) {
      throw bk::DegenerateError("ik: every joint fell back to identity");
    }
    if (solved < result.per_joint_residual.size()) {
      std::cerr << "warning: " << result.per_joint_residual.size() - solved
                << " joint(s) fell back to identity\n";
    }
  });
}

// ---------------------------------------------------------------------------
// scan

void cmd_scan(CLI::App& app) {
  auto mesh_path = std::make_shared<std::string>();
  auto config_path = std::make_shared<std::string>();
  auto out_ply = std::make_shared<std::string>();
  auto out_xyz = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto sigma = std::make_shared<double>(0.0);
  auto dropout = std::make_shared<double>(0.0);
  auto origin = std::make_shared<std::vector<double>>();
  auto crop_skeleton = std::make_shared<std::string>();
  auto crop_mode = std::make_shared<std::string>("eval");
  auto cube_side = std::make_shared<double>(2.0);
  auto target_points = std::make_shared<int>(1024);

  CLI::App* cmd = app.add_subcommand(
      "scan", "Simulate a LiDAR raster scan of a mesh");
  cmd->add_option("--mesh", *mesh_path, "Posed OBJ mesh")->required();
  cmd->add_option("--config", *config_path,
                  "Scan config JSON (flags override file values)");
  cmd->add_option("--seed", *seed, "Random seed");
  cmd->add_option("--sigma", *sigma, "Along-ray range noise sigma, meters");
  cmd->add_option("--dropout", *dropout, "Per-ray dropout probability");
  cmd->add_option("--origin", *origin, "Sensor origin x y z")->expected(3);
  cmd->add_option("--crop-skeleton", *crop_skeleton,
                  "Skeleton JSON whose first joint is the crop pelvis; "
                  "enables crop + resample");
  cmd->add_option("--crop-mode", *crop_mode, "train or eval (default eval)")
      ->check(CLI::IsMember({"train", "eval"}));
  cmd->add_option("--cube-side", *cube_side, "Crop cube side, meters");
  cmd->add_option("--target-points", *target_points,
                  "Resample size after cropping (default 1024)");
  cmd->add_option("--out-ply", *out_ply, "Output binary PLY");
  cmd->add_option("--out-xyz", *out_xyz, "Output XYZ text");
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    if (out_ply->empty() && out_xyz->empty()) {
      throw bk::ParamError("scan: pass --out-ply and/or --out-xyz");
    }
    const json file = load_config_file(*config_path);

    bk::ScanConfig config;
    if (file.contains("sensor_origin")) {
      const auto& o = file["sensor_origin"];
      if (!o.is_array() || o.size() != 3) {
        throw bk::IoError("scan config: sensor_origin must be a 3-vector");
      }
      config.sensor_origin =
          bk::Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
    }
    if (file.contains("azimuth")) {
      config.azimuth_min = json_number(file["azimuth"], "min", config.azimuth_min);
      config.azimuth_max = json_number(file["azimuth"], "max", config.azimuth_max);
      config.azimuth_step =
          json_number(file["azimuth"], "step", config.azimuth_step);
    }
    if (file.contains("elevation")) {
      config.elevation_min =
          json_number(file["elevation"], "min", config.elevation_min);
      config.elevation_max =
          json_number(file["elevation"], "max", config.elevation_max);
      config.elevation_step =
          json_number(file["elevation"], "step", config.elevation_step);
    }
    config.range_noise_sigma =
        json_number(file, "range_noise_sigma", config.range_noise_sigma);
    config.dropout_probability =
        json_number(file, "dropout_probability", config.dropout_probability);
    if (file.contains("seed")) config.seed = file["seed"].get<std::uint64_t>();

    if (cmd->count("--seed") > 0) config.seed = *seed;
    if (cmd->count("--sigma") > 0) config.range_noise_sigma = *sigma;
    if (cmd->count("--dropout") > 0) config.dropout_probability = *dropout;
    if (cmd->count("--origin") > 0) {
      config.sensor_origin =
          bk::Vec3((*origin)[0], (*origin)[1], (*origin)[2]);
    }

    bk::CropAugmentConfig crop;
    bk::AugmentMode mode = bk::AugmentMode::eval;
    bool do_crop = !crop_skeleton->empty();
    if (file.contains("crop")) {
      const json& c = file["crop"];
      crop.cube_side = json_number(c, "cube_side", crop.cube_side);
      crop.translation_jitter =
          json_number(c, "translation_jitter", crop.translation_jitter);
      crop.rotation_jitter =
          json_number(c, "rotation_jitter", crop.rotation_jitter);
      if (c.contains("target_points")) {
        crop.target_points = c["target_points"].get<int>();
      }
      if (c.contains("mode")) {
        mode = c["mode"].get<std::string>() == "train" ? bk::AugmentMode::train
                                                       : bk::AugmentMode::eval;
      }
    }
    if (cmd->count("--cube-side") > 0) crop.cube_side = *cube_side;
    if (cmd->count("--target-points") > 0) {
      crop.target_points = *target_points;
    }
    if (cmd->count("--crop-mode") > 0) {
      mode = *crop_mode == "train" ? bk::AugmentMode::train
                                   : bk::AugmentMode::eval;
    }
    crop.seed = config.seed;

    const bk::Mesh mesh = bk::load_obj(*mesh_path);
    bk::PointCloud cloud = bk::scan(mesh, config);
    if (cloud.empty()) std::cerr << "warning: no ray hit the mesh\n";

    if (do_crop && !cloud.empty()) {
      const bk::Skeleton skel = bk::load_skeleton(*crop_skeleton);
      const bk::Vec3 pelvis = skel.joints.row(0).transpose();
      cloud = bk::crop_and_augment(cloud, pelvis, crop, mode).cloud;
    }

    std::vector<std::string> outputs;
    if (!out_ply->empty()) {
      bk::save_ply(cloud, *out_ply);
      outputs.push_back(*out_ply);
    }
    if (!out_xyz->empty()) {
      bk::save_xyz(cloud, *out_xyz);
      outputs.push_back(*out_xyz);
    }

    json snapshot{{"range_noise_sigma", config.range_noise_sigma},
                  {"dropout_probability", config.dropout_probability},
                  {"azimuth",
                   {{"min", config.azimuth_min},
                    {"max", config.azimuth_max},
                    {"step", config.azimuth_step}}},
                  {"elevation",
                   {{"min", config.elevation_min},
                    {"max", config.elevation_max},
                    {"step", config.elevation_step}}},
                  {"points", cloud.size()}};
    if (do_crop) {
      snapshot["crop"] = {{"cube_side", crop.cube_side},
                          {"target_points", crop.target_points},
                          {"mode", mode == bk::AugmentMode::train ? "train"
                                                                  : "eval"}};
    }
    std::vector<std::string> inputs{*mesh_path};
    if (!config_path->empty()) inputs.push_back(*config_path);
    if (do_crop) inputs.push_back(*crop_skeleton);
    write_manifest("scan", snapshot, inputs, outputs, config.seed,
                   watch.seconds(), *manifest);
  });
}

// ---------------------------------------------------------------------------
// coarsen

void cmd_coarsen(CLI::App& app) {
  auto mesh_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto obj_prefix = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();
  auto levels = std::make_shared<int>(1);
  auto weighting = std::make_shared<std::string>("inverse_length");

  CLI::App* cmd = app.add_subcommand(
      "coarsen", "Build a heavy-edge-matching mesh hierarchy");
  cmd->add_option("--mesh", *mesh_path, "Input OBJ mesh")->required();
  cmd->add_option("--levels", *levels, "Coarsening steps")->required();
  cmd->add_option("--weighting", *weighting, "inverse_length or unit")
      ->check(CLI::IsMember({"inverse_length", "unit"}));
  cmd->add_option("--out", *out_path, "Output hierarchy JSON")->required();
  cmd->add_option("--out-obj-prefix", *obj_prefix,
                  "Also write <prefix>.level<k>.obj per level (vertices + "
                  "edge lines)");
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    const bk::Mesh mesh = bk::load_obj(*mesh_path);
    const bk::EdgeWeighting w = *weighting == "unit"
                                    ? bk::EdgeWeighting::unit
                                    : bk::EdgeWeighting::inverse_length;
    const bk::MeshHierarchy hierarchy = bk::coarsen(mesh, *levels, w);
    bk::save_hierarchy(hierarchy, *out_path);

    std::vector<std::string> outputs{*out_path};
    if (!obj_prefix->empty()) {
      for (std::size_t l = 0; l < hierarchy.levels.size(); ++l) {
        const auto& level = hierarchy.levels[l];
        std::string obj;
        for (Eigen::Index v = 0; v < level.positions.rows(); ++v) {
          char line[128];
          std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n",
                        level.positions(v, 0), level.positions(v, 1),
                        level.positions(v, 2));
          obj += line;
        }
        for (const auto& e : level.edges) {
          obj += "l " + std::to_string(e[0] + 1) + " " +
                 std::to_string(e[1] + 1) + "\n";
        }
        const std::string path =
            *obj_prefix + ".level" + std::to_string(l) + ".obj";
        bk::write_file_atomic(path, obj);
        outputs.push_back(path);
      }
    }
    if (hierarchy.achieved_levels < hierarchy.requested_levels) {
      std::cerr << "warning: stopped after " << hierarchy.achieved_levels
                << " of " << hierarchy.requested_levels
                << " levels (next level would be a single vertex)\n";
    }
    write_manifest("coarsen",
                   json{{"levels", *levels}, {"weighting", *weighting}},
                   {*mesh_path}, outputs, std::nullopt, watch.seconds(),
                   *manifest);
  });
}

// ---------------------------------------------------------------------------
// fit

void cmd_fit(CLI::App& app) {
  auto model_path = std::make_shared<std::string>();
  auto targets_path = std::make_shared<std::string>();
  auto targets_dir = std::make_shared<std::string>();
  auto config_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto out_mesh = std::make_shared<std::string>();
  auto out_joints = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();
  auto lambda_joint = std::make_shared<double>(1.0);
  auto lambda_prior = std::make_shared<double>(1e-3);
  auto max_iterations = std::make_shared<int>(200);
  auto tol = std::make_shared<double>(1e-10);

  CLI::App* cmd = app.add_subcommand(
      "fit", "Fit model parameters to target joints");
  cmd->add_option("--model", *model_path, "Body model JSON");
  cmd->add_option("--targets", *targets_path, "Target skeleton JSON");
  cmd->add_option("--targets-dir", *targets_dir,
                  "Directory of skeleton JSONs for batch fitting");
  cmd->add_option("--config", *config_path,
                  "Fit config JSON (flags override file values)");
  cmd->add_option("--lambda-joint", *lambda_joint, "Data term weight");
  cmd->add_option("--lambda-prior", *lambda_prior, "Prior term weight");
  cmd->add_option("--max-iterations", *max_iterations, "Iteration budget");
  cmd->add_option("--tol", *tol, "Convergence tolerance on decrease");
  cmd->add_option("--out", *out_path, "Fit result JSON (single target)");
  cmd->add_option("--out-mesh", *out_mesh, "Fitted mesh OBJ (single target)");
  cmd->add_option("--out-joints", *out_joints,
                  "Fitted joints as skeleton JSON (single target)");
  cmd->add_option("--out-dir", *out_dir, "Output directory (batch)");
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    if (targets_path->empty() == targets_dir->empty()) {
      throw bk::ParamError("fit: pass exactly one of --targets/--targets-dir");
    }

    const json file = load_config_file(*config_path);
    bk::FitConfig config;
    config.lambda_joint = json_number(file, "lambda_joint", config.lambda_joint);
    config.lambda_prior = json_number(file, "lambda_prior", config.lambda_prior);
    if (file.contains("max_iterations")) {
      config.max_iterations = file["max_iterations"].get<int>();
    }
    config.convergence_tol =
        json_number(file, "convergence_tol", config.convergence_tol);
    if (file.contains("staged")) config.staged = file["staged"].get<bool>();

    if (cmd->count("--lambda-joint") > 0) config.lambda_joint = *lambda_joint;
    if (cmd->count("--lambda-prior") > 0) config.lambda_prior = *lambda_prior;
    if (cmd->count("--max-iterations") > 0) {
      config.max_iterations = *max_iterations;
    }
    if (cmd->count("--tol") > 0) config.convergence_tol = *tol;

    const std::string model_file = resolve_model_path(*model_path);
    const bk::BodyModel model = bk::load_model(model_file);
    const json snapshot{{"lambda_joint", config.lambda_joint},
                        {"lambda_prior", config.lambda_prior},
                        {"max_iterations", config.max_iterations},
                        {"convergence_tol", config.convergence_tol},
                        {"staged", config.staged}};

    if (!targets_path->empty()) {
      if (out_path->empty()) throw bk::ParamError("fit: --out is required");
      const bk::Skeleton targets = bk::load_skeleton(*targets_path);
      const bk::FitResult result = bk::fit(model, targets, config);
      bk::save_fit_result(result, *out_path);
      std::vector<std::string> outputs{*out_path};
      if (!out_mesh->empty() || !out_joints->empty()) {
        const bk::LbsResult lbs =
            bk::lbs_forward(model, result.pose, result.shape);
        if (!out_mesh->empty()) {
          bk::save_obj(lbs.mesh, *out_mesh);
          outputs.push_back(*out_mesh);
        }
        if (!out_joints->empty()) {
          bk::Skeleton fitted;
          fitted.joints = lbs.joints;
          bk::save_skeleton(fitted, *out_joints);
          outputs.push_back(*out_joints);
        }
      }
      write_manifest("fit", snapshot, {model_file, *targets_path}, outputs,
                     std::nullopt, watch.seconds(), *manifest);
      if (!result.converged) {
        throw bk::NumericError("fit did not converge within " +
                               std::to_string(config.max_iterations) +
                               " iterations (final MPJPE " +
                               std::to_string(result.final_mpjpe_cm) + " cm)");
      }
      return;
    }

    // Batch: every *.json under --targets-dir, sorted by name.
    if (out_dir->empty()) throw bk::ParamError("fit: --out-dir is required");
    std::vector<std::string> files;
    for (const auto& entry :
         std::filesystem::directory_iterator(*targets_dir)) {
      if (entry.path().extension() == ".json") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw bk::IoError(*targets_dir + ": no skeleton JSON files found");
    }
    std::vector<bk::Skeleton> targets;
    targets.reserve(files.size());
    for (const auto& f : files) targets.push_back(bk::load_skeleton(f));

    const auto items = bk::fit_batch(model, targets, config);
    std::filesystem::create_directories(*out_dir);
    std::vector<std::string> outputs;
    int failures = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string stem = std::filesystem::path(files[i]).stem().string();
      if (!items[i].ok) {
        ++failures;
        std::cerr << "error: " << files[i] << ": " << items[i].error << "\n";
        continue;
      }
      const std::string out = *out_dir + "/" + stem + ".fit.json";
      bk::save_fit_result(items[i].result, out);
      outputs.push_back(out);
      if (!items[i].result.converged) ++failures;
    }
    write_manifest("fit", snapshot, files, outputs, std::nullopt,
                   watch.seconds(),
                   manifest->empty() ? *out_dir + "/manifest.json" : *manifest);
    if (failures > 0) {
      throw bk::NumericError(std::to_string(failures) +
                             " of " + std::to_string(items.size()) +
                             " fits failed or did not converge");
    }
  });
}

// ---------------------------------------------------------------------------
// eval

void cmd_eval(CLI::App& app) {
  auto pred_skel = std::make_shared<std::string>();
  auto gt_skel = std::make_shared<std::string>();
  auto pred_mesh = std::make_shared<std::string>();
  auto gt_mesh = std::make_shared<std::string>();
  auto model_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto csv_path = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();

  CLI::App* cmd = app.add_subcommand(
      "eval", "Compute metrics between prediction and ground truth");
  cmd->add_option("--pred-skeleton", *pred_skel, "Predicted skeleton JSON");
  cmd->add_option("--gt-skeleton", *gt_skel, "Ground-truth skeleton JSON");
  cmd->add_option("--pred-mesh", *pred_mesh, "Predicted OBJ mesh");
  cmd->add_option("--gt-mesh", *gt_mesh, "Ground-truth OBJ mesh");
  cmd->add_option("--model", *model_path,
                  "Body model JSON (enables the composite mesh loss)");
  cmd->add_option("--out", *out_path, "Metrics report JSON")->required();
  cmd->add_option("--csv", *csv_path, "Append a CSV row to this file");
  cmd->add_option("--manifest", *manifest, "Manifest path override");

  cmd->callback([=]() {
    Stopwatch watch;
    const bool skeletons = !pred_skel->empty() && !gt_skel->empty();
    const bool meshes = !pred_mesh->empty() && !gt_mesh->empty();
    if (!skeletons && !meshes) {
      throw bk::ParamError(
          "eval: pass --pred-skeleton/--gt-skeleton and/or "
          "--pred-mesh/--gt-mesh");
    }

    json report{{"format_version", 1}};
    std::vector<std::string> inputs;
    if (skeletons) {
      const bk::Skeleton pred = bk::load_skeleton(*pred_skel);
      const bk::Skeleton gt = bk::load_skeleton(*gt_skel);
      report["mpjpe_cm"] = bk::mpjpe(pred, gt);
      report["pa_mpjpe_cm"] = bk::pa_mpjpe(pred, gt);
      inputs.push_back(*pred_skel);
      inputs.push_back(*gt_skel);
    }
    if (meshes) {
      const bk::Mesh pred = bk::load_obj(*pred_mesh);
      const bk::Mesh gt = bk::load_obj(*gt_mesh);
      report["mpvpe_cm"] = bk::mpvpe(pred, gt);
      report["mpere"] = bk::mpere(pred, gt);
      inputs.push_back(*pred_mesh);
      inputs.push_back(*gt_mesh);
      if (!model_path->empty()) {
        const bk::BodyModel model = bk::load_model(*model_path);
        const bk::MeshLossTerms loss = bk::mesh_loss(pred, gt, model);
        report["mesh_loss"] = {
            {"vertex", loss.vertex},
            {"joint", loss.joint},
            {"normal", loss.normal},
            {"edge", loss.edge},
            {"total", loss.total},
            {"degenerate_faces_skipped", loss.degenerate_faces_skipped}};
        inputs.push_back(*model_path);
      }
    }
    bk::write_file_atomic(*out_path, report.dump(2) + "\n");

    if (!csv_path->empty()) {
      const bool fresh = !std::filesystem::exists(*csv_path);
      std::string row;
      if (fresh) row += "mpjpe_cm,pa_mpjpe_cm,mpvpe_cm,mpere\n";
      auto cell = [&report](const char* key) {
        return report.contains(key) ? std::to_string(report[key].get<double>())
                                    : std::string{};
      };
      row += cell("mpjpe_cm") + "," + cell("pa_mpjpe_cm") + "," +
             cell("mpvpe_cm") + "," + cell("mpere") + "\n";
      const std::string existing =
          fresh ? std::string{} : bk::read_file(*csv_path);
      bk::write_file_atomic(*csv_path, existing + row);
    }

    write_manifest("eval", json::object(), inputs, {*out_path}, std::nullopt,
                   watch.seconds(), *manifest);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bodykin: body-model kinematics toolkit"};
  app.set_version_flag("--version", bk::version());
  app.require_subcommand(1);

  cmd_lbs(app);
  cmd_ik(app);
  cmd_scan(app);
  cmd_coarsen(app);
  cmd_fit(app);
  cmd_eval(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const bk::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bk::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bk::UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bk::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const bk::DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
