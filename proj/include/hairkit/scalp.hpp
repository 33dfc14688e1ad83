// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <string>

namespace hairkit {

/// Analytic ellipsoid head. The scalp chart covers the polar cap
/// theta in [cap_theta_min, cap_theta_max] measured from the +z pole.
struct HeadModel {
    Eigen::Vector3d center{0.0, 0.0, 0.0};
    Eigen::Vector3d radii{0.08, 0.095, 0.11};
    double cap_theta_min = 0.0;
    double cap_theta_max = 1.9;
};

/// Signed distance to the head: negative inside, zero on the surface.
/// Exact for spheres; for general ellipsoids this is the first-order
/// estimate |q|*(|q|-1)/|q'| with q = p/r and q' = p/r^2. For head-like
/// aspect ratios the Lipschitz constant stays below 1.05 on the shell
/// |p/r| >= 0.75 (all strand geometry lives there); the estimate is only
/// directional-radius accurate toward the center.
double head_sdf(const HeadModel& head, const Eigen::Vector3d& p);

/// Gradient of head_sdf. Zero at the center where the distance field has
/// no preferred direction.
Eigen::Vector3d head_sdf_gradient(const HeadModel& head, const Eigen::Vector3d& p);

struct ScalpSample {
    Eigen::Vector3d position;
    // Columns: tangent_u, tangent_v, outward normal; orthonormal.
    Eigen::Matrix3d frame;
};

/// Chart over the scalp cap; u is azimuth, v runs from the cap rim (0) to
/// the pole (1). v is clamped to [0.001, 0.999] to keep tangents nondegenerate.
ScalpSample scalp_point(const HeadModel& head, double u, double v);

/// Inverse of the chart for points on (or near) the scalp surface.
void scalp_uv_for_position(const HeadModel& head, const Eigen::Vector3d& p,
                           double& u, double& v);

/// Pinhole camera, right-handed: camera looks down +z, image y points down.
struct CameraModel {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world-to-camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    int width = 0, height = 0;
};

struct Projection {
    Eigen::Vector2d pixel{0.0, 0.0};
    double depth = 0.0;
    bool valid = false;
};

constexpr double kCameraNearPlane = 1e-6;

Projection project(const CameraModel& cam, const Eigen::Vector3d& p);
Eigen::Vector3d unproject(const CameraModel& cam, const Eigen::Vector2d& pixel, double depth);

/// Camera placed on a sphere around `target`, looking at it, world +z up.
CameraModel make_lookat_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                               double focal, int width, int height);

// Line-oriented key-value descriptors ("cam.kv" / "head.kv").
void save_camera_kv(const std::string& path, const CameraModel& cam);
CameraModel load_camera_kv(const std::string& path);
void save_head_kv(const std::string& path, const HeadModel& head);
HeadModel load_head_kv(const std::string& path);

}  // namespace hairkit
