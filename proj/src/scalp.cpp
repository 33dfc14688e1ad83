// SPDX-License-Identifier: Apache-2.0
#include "hairkit/scalp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hairkit {

double head_sdf(const HeadModel& head, const Eigen::Vector3d& p) {
    const Eigen::Vector3d d = p - head.center;
    const Eigen::Vector3d q = d.cwiseQuotient(head.radii);
    const Eigen::Vector3d q2 = q.cwiseQuotient(head.radii);
    const double k0 = q.norm();
    const double k1 = q2.norm();
    if (k1 < 1e-300) return -head.radii.minCoeff();
    return k0 * (k0 - 1.0) / k1;
}

Eigen::Vector3d head_sdf_gradient(const HeadModel& head, const Eigen::Vector3d& p) {
    const Eigen::Vector3d d = p - head.center;
    const Eigen::Vector3d w1 = head.radii.cwiseInverse();
    const Eigen::Vector3d w2 = w1.cwiseProduct(w1);
    const Eigen::Vector3d u = d.cwiseProduct(w1);
    const Eigen::Vector3d v = d.cwiseProduct(w2);
    const double k0 = u.norm();
    const double k1 = v.norm();
    if (k0 < 1e-300 || k1 < 1e-300) return Eigen::Vector3d::Zero();
    const Eigen::Vector3d dk0 = w1.cwiseProduct(u) / k0;
    const Eigen::Vector3d dk1 = w2.cwiseProduct(v) / k1;
    // s = (k0^2 - k0) / k1
    return ((2.0 * k0 - 1.0) * dk0 * k1 - (k0 * k0 - k0) * dk1) / (k1 * k1);
}

ScalpSample scalp_point(const HeadModel& head, double u, double v) {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0)
        throw std::invalid_argument("scalp_point: u and v must lie in [0, 1]");
    const double vc = std::clamp(v, 0.001, 0.999);
    const double theta = head.cap_theta_max - vc * (head.cap_theta_max - head.cap_theta_min);
    const double phi = 2.0 * std::numbers::pi * u;
    const double st = std::sin(theta), ct = std::cos(theta);
    const double cp = std::cos(phi), sp = std::sin(phi);

    ScalpSample out;
    const Eigen::Vector3d unit(st * cp, st * sp, ct);
    out.position = head.center + head.radii.cwiseProduct(unit);

    // Ellipsoid outward normal, then Gram-Schmidt on the azimuthal tangent.
    const Eigen::Vector3d normal =
        unit.cwiseQuotient(head.radii).normalized();
    Eigen::Vector3d tangent_u(-head.radii.x() * st * sp, head.radii.y() * st * cp, 0.0);
    tangent_u -= tangent_u.dot(normal) * normal;
    const double tu_norm = tangent_u.norm();
    if (tu_norm < 1e-12) {
        // Exactly at a pole after clamping cannot happen for nonzero cap
        // range, but keep a deterministic fallback.
        tangent_u = Eigen::Vector3d(1.0, 0.0, 0.0) -
                    normal.x() * normal;
        tangent_u.normalize();
    } else {
        tangent_u /= tu_norm;
    }
    const Eigen::Vector3d tangent_v = normal.cross(tangent_u);
    out.frame.col(0) = tangent_u;
    out.frame.col(1) = tangent_v;
    out.frame.col(2) = normal;
    return out;
}

void scalp_uv_for_position(const HeadModel& head, const Eigen::Vector3d& p,
                           double& u, double& v) {
    const Eigen::Vector3d q = (p - head.center).cwiseQuotient(head.radii);
    const double r = q.norm();
    const Eigen::Vector3d unit = r > 1e-300 ? Eigen::Vector3d(q / r) : Eigen::Vector3d(0, 0, 1);
    const double theta = std::acos(std::clamp(unit.z(), -1.0, 1.0));
    double phi = std::atan2(unit.y(), unit.x());
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    u = phi / (2.0 * std::numbers::pi);
    const double span = head.cap_theta_max - head.cap_theta_min;
    v = span > 0 ? std::clamp((head.cap_theta_max - theta) / span, 0.0, 1.0) : 0.0;
}

Projection project(const CameraModel& cam, const Eigen::Vector3d& p) {
    const Eigen::Vector3d q = cam.rotation * p + cam.translation;
    Projection out;
    out.depth = q.z();
    if (q.z() <= kCameraNearPlane) return out;  // behind camera: invalid
    out.pixel.x() = cam.fx * q.x() / q.z() + cam.cx;
    out.pixel.y() = cam.fy * q.y() / q.z() + cam.cy;
    out.valid = true;
    return out;
}

Eigen::Vector3d unproject(const CameraModel& cam, const Eigen::Vector2d& pixel, double depth) {
    const Eigen::Vector3d q((pixel.x() - cam.cx) / cam.fx * depth,
                            (pixel.y() - cam.cy) / cam.fy * depth, depth);
    return cam.rotation.transpose() * (q - cam.translation);
}

CameraModel make_lookat_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                               double focal, int width, int height) {
    CameraModel cam;
    cam.fx = cam.fy = focal;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
    if (right.norm() < 1e-9) right = forward.cross(Eigen::Vector3d::UnitY());
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);  // y points down in image
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

namespace {

std::map<std::string, std::vector<double>> read_kv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::vector<double>> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        std::vector<double> vals;
        double x;
        while (ls >> x) vals.push_back(x);
        kv[key] = vals;
    }
    return kv;
}

const std::vector<double>& expect(const std::map<std::string, std::vector<double>>& kv,
                                  const std::string& key, std::size_t n,
                                  const std::string& path) {
    auto it = kv.find(key);
    if (it == kv.end())
        throw std::runtime_error(path + ": missing key '" + key + "'");
    if (it->second.size() != n)
        throw std::runtime_error(path + ": key '" + key + "' expects " +
                                 std::to_string(n) + " values");
    return it->second;
}

}  // namespace

void save_camera_kv(const std::string& path, const CameraModel& cam) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_camera_kv: cannot open " + path);
    out.precision(17);
    out << "fx " << cam.fx << "\nfy " << cam.fy << "\ncx " << cam.cx << "\ncy " << cam.cy << "\n";
    out << "R";
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out << " " << cam.rotation(r, c);
    out << "\nt " << cam.translation.x() << " " << cam.translation.y() << " "
        << cam.translation.z() << "\n";
    out << "W " << cam.width << "\nH " << cam.height << "\n";
}

CameraModel load_camera_kv(const std::string& path) {
    const auto kv = read_kv(path);
    CameraModel cam;
    cam.fx = expect(kv, "fx", 1, path)[0];
    cam.fy = expect(kv, "fy", 1, path)[0];
    cam.cx = expect(kv, "cx", 1, path)[0];
    cam.cy = expect(kv, "cy", 1, path)[0];
    const auto& R = expect(kv, "R", 9, path);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = R[r * 3 + c];
    const auto& t = expect(kv, "t", 3, path);
    cam.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    cam.width = static_cast<int>(expect(kv, "W", 1, path)[0]);
    cam.height = static_cast<int>(expect(kv, "H", 1, path)[0]);
    if (cam.fx <= 0 || cam.fy <= 0)
        throw std::runtime_error(path + ": focal lengths must be positive");
    const Eigen::Matrix3d gram = cam.rotation * cam.rotation.transpose();
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw std::runtime_error(path + ": rotation is not orthonormal");
    return cam;
}

void save_head_kv(const std::string& path, const HeadModel& head) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_head_kv: cannot open " + path);
    out.precision(17);
    out << "center " << head.center.x() << " " << head.center.y() << " " << head.center.z()
        << "\n";
    out << "radii " << head.radii.x() << " " << head.radii.y() << " " << head.radii.z() << "\n";
    out << "cap " << head.cap_theta_min << " " << head.cap_theta_max << "\n";
}

HeadModel load_head_kv(const std::string& path) {
    const auto kv = read_kv(path);
    HeadModel head;
    const auto& c = expect(kv, "center", 3, path);
    head.center = Eigen::Vector3d(c[0], c[1], c[2]);
    const auto& r = expect(kv, "radii", 3, path);
    head.radii = Eigen::Vector3d(r[0], r[1], r[2]);
    const auto& cap = expect(kv, "cap", 2, path);
    head.cap_theta_min = cap[0];
    head.cap_theta_max = cap[1];
    if (head.radii.minCoeff() <= 0)
        throw std::runtime_error(path + ": radii must be positive");
    return head;
}

}  // namespace hairkit
