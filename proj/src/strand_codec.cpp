// SPDX-License-Identifier: Apache-2.0
#include "hairkit/strand_codec.hpp"

#include <Eigen/SVD>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace hairkit {

namespace {

static_assert(std::endian::native == std::endian::little,
              "basis file I/O assumes a little-endian host");

constexpr char kBasisMagic[5] = {'S', 'B', 'A', 'S', '1'};
constexpr char kNormalizationTag[8] = {'u', 'n', 'i', 't', 'a', 'r', 'y', '\0'};

}  // namespace

void validate_strand(const Strand& strand) {
    if (strand.size() < 2)
        throw std::invalid_argument("strand must have at least 2 points");
    for (const auto& p : strand.points)
        if (!p.allFinite())
            throw std::invalid_argument("strand has non-finite coordinates");
}

SegmentDirections segment_directions(const Strand& strand) {
    validate_strand(strand);
    const int segments = strand.size() - 1;
    SegmentDirections out;
    out.directions.resize(segments);
    out.lengths.resize(segments);
    Eigen::Vector3d previous(0.0, 0.0, 1.0);  // root fallback: +z of the root frame
    for (int j = 0; j < segments; ++j) {
        const Eigen::Vector3d v = strand.points[j + 1] - strand.points[j];
        const double len = v.norm();
        out.lengths[j] = len;
        if (len < kDegenerateSegmentLength) {
            out.directions[j] = previous;
            out.degenerate.push_back(j);
        } else {
            out.directions[j] = v / len;
            previous = out.directions[j];
        }
    }
    return out;
}

CurvatureResult curvature(const Strand& strand) {
    if (strand.size() < 3)
        throw std::invalid_argument("curvature needs at least 3 points");
    const SegmentDirections segs = segment_directions(strand);
    CurvatureResult out;
    out.degenerate_segments = segs.degenerate;
    out.values.resize(strand.size() - 2);
    for (int j = 0; j + 1 < static_cast<int>(segs.directions.size()); ++j) {
        const double g = segs.directions[j].cross(segs.directions[j + 1]).norm();
        out.values[j] = std::min(g, 1.0);  // clamp rounding excursions above 1
    }
    return out;
}

DftPlan::DftPlan(int length) : length_(length), bands_(bands_for_length(length)) {
    if (length < 2) throw std::invalid_argument("DftPlan: length must be >= 2");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(length));
    cos_table_.resize(bands_, length_);
    sin_table_.resize(bands_, length_);
    synthesis_.resize(length_, 2 * bands_);
    for (int m = 0; m < bands_; ++m) {
        // Interior bands appear twice in the full spectrum of a real signal.
        const bool paired = m != 0 && !(length_ % 2 == 0 && m == length_ / 2);
        const double weight = paired ? 2.0 : 1.0;
        for (int j = 0; j < length_; ++j) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) *
                                 static_cast<double>(m) / static_cast<double>(length_);
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            cos_table_(m, j) = c * inv_sqrt;
            sin_table_(m, j) = s * inv_sqrt;
            synthesis_(j, 2 * m) = weight * c * inv_sqrt;
            synthesis_(j, 2 * m + 1) = -weight * s * inv_sqrt;
        }
    }
}

FrequencyStrand dft_strand(const Strand& strand) {
    validate_strand(strand);
    const int length = strand.size();
    const DftPlan plan(length);
    Eigen::MatrixXd signal(length, 3);
    for (int j = 0; j < length; ++j) signal.row(j) = strand.points[j].transpose();
    const Eigen::MatrixXd re = plan.cos_table() * signal;   // k x 3
    const Eigen::MatrixXd im = -(plan.sin_table() * signal);  // k x 3
    FrequencyStrand out;
    out.bands.resize(plan.bands());
    for (int m = 0; m < plan.bands(); ++m)
        for (int c = 0; c < 3; ++c)
            out.bands[m][c] = {re(m, c), im(m, c)};
    return out;
}

Strand idft_strand(const FrequencyStrand& freq, int length) {
    if (freq.band_count() != bands_for_length(length))
        throw std::invalid_argument("idft_strand: band count does not match length");
    const DftPlan plan(length);
    Eigen::MatrixXd packed(2 * plan.bands(), 3);
    for (int m = 0; m < plan.bands(); ++m)
        for (int c = 0; c < 3; ++c) {
            packed(2 * m, c) = freq.bands[m][c].real();
            packed(2 * m + 1, c) = freq.bands[m][c].imag();
        }
    const Eigen::MatrixXd pts = plan.synthesis() * packed;  // L x 3
    Strand out;
    out.points.resize(length);
    for (int j = 0; j < length; ++j) out.points[j] = pts.row(j).transpose();
    return out;
}

Eigen::VectorXd flatten_frequency(const FrequencyStrand& freq) {
    const int k = freq.band_count();
    Eigen::VectorXd flat(6 * k);
    for (int m = 0; m < k; ++m)
        for (int c = 0; c < 3; ++c) {
            flat(6 * m + 2 * c) = freq.bands[m][c].real();
            flat(6 * m + 2 * c + 1) = freq.bands[m][c].imag();
        }
    return flat;
}

FrequencyStrand unflatten_frequency(const Eigen::VectorXd& flat) {
    if (flat.size() % 6 != 0)
        throw std::invalid_argument("unflatten_frequency: size must be a multiple of 6");
    const int k = static_cast<int>(flat.size()) / 6;
    FrequencyStrand out;
    out.bands.resize(k);
    for (int m = 0; m < k; ++m)
        for (int c = 0; c < 3; ++c)
            out.bands[m][c] = {flat(6 * m + 2 * c), flat(6 * m + 2 * c + 1)};
    return out;
}

namespace {

Eigen::VectorXd strand_spectrum(const Strand& strand, const DftPlan& plan) {
    Eigen::MatrixXd signal(plan.length(), 3);
    for (int j = 0; j < plan.length(); ++j) signal.row(j) = strand.points[j].transpose();
    const Eigen::MatrixXd re = plan.cos_table() * signal;
    const Eigen::MatrixXd im = -(plan.sin_table() * signal);
    Eigen::VectorXd flat(6 * plan.bands());
    for (int m = 0; m < plan.bands(); ++m)
        for (int c = 0; c < 3; ++c) {
            flat(6 * m + 2 * c) = re(m, c);
            flat(6 * m + 2 * c + 1) = im(m, c);
        }
    return flat;
}

/// Deterministic sign convention: the entry of largest magnitude in each
/// component is made positive (first such entry on ties).
void fix_component_signs(Eigen::MatrixXd& components) {
    for (Eigen::Index r = 0; r < components.rows(); ++r) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index c = 0; c < components.cols(); ++c) {
            const double a = std::abs(components(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = c;
            }
        }
        if (components(r, best) < 0.0) components.row(r) = -components.row(r);
    }
}

}  // namespace

StrandBasis fit_basis(const std::vector<Strand>& strands, int num_components,
                      int batch_size) {
    if (num_components < 1) throw std::invalid_argument("fit_basis: num_components < 1");
    if (static_cast<int>(strands.size()) < num_components)
        throw std::invalid_argument("fit_basis: need at least num_components strands");
    if (batch_size < num_components) batch_size = num_components;
    const int length = strands.front().size();
    for (const auto& s : strands) {
        validate_strand(s);
        if (s.size() != length)
            throw std::invalid_argument("fit_basis: strands have mixed point counts");
    }
    const DftPlan plan(length);
    const int dim = 6 * plan.bands();
    if (num_components > dim)
        throw std::invalid_argument("fit_basis: num_components exceeds 6k");

    // Pass 1: mean spectrum.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : strands) mean += strand_spectrum(s, plan);
    mean /= static_cast<double>(strands.size());

    // Pass 2: centered batches merged through an SVD update. A slack rank
    // above the requested component count keeps the approximation tight.
    const int slack_rank = std::min(dim, num_components * 2 + 16);
    Eigen::MatrixXd stacked;  // previous factor rows + batch rows
    Eigen::MatrixXd factor;   // rank x dim, rows are sigma_i * v_i^T
    const int total = static_cast<int>(strands.size());
    for (int start = 0; start < total; start += batch_size) {
        const int count = std::min(batch_size, total - start);
        const int prior = static_cast<int>(factor.rows());
        stacked.resize(prior + count, dim);
        if (prior > 0) stacked.topRows(prior) = factor;
        for (int i = 0; i < count; ++i)
            stacked.row(prior + i) = (strand_spectrum(strands[start + i], plan) - mean).transpose();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
        const int keep = std::min<int>(slack_rank, static_cast<int>(svd.singularValues().size()));
        factor.resize(keep, dim);
        for (int r = 0; r < keep; ++r)
            factor.row(r) = svd.singularValues()(r) * svd.matrixV().col(r).transpose();
    }

    StrandBasis basis;
    basis.length = length;
    basis.mean = mean;
    basis.components.resize(num_components, dim);
    for (int r = 0; r < num_components; ++r) {
        Eigen::VectorXd row = r < factor.rows()
                                  ? Eigen::VectorXd(factor.row(r).transpose())
                                  : Eigen::VectorXd(Eigen::VectorXd::Zero(dim));
        const double norm = row.norm();
        if (norm > 0) {
            basis.components.row(r) = (row / norm).transpose();
        } else {
            // Zero-variance corpus directions: fill with deterministic
            // canonical axes orthogonal to the rows found so far.
            Eigen::VectorXd candidate = Eigen::VectorXd::Zero(dim);
            for (int axis = 0; axis < dim; ++axis) {
                candidate.setZero();
                candidate(axis) = 1.0;
                for (int q = 0; q < r; ++q)
                    candidate -= basis.components.row(q).dot(candidate) *
                                 basis.components.row(q).transpose();
                if (candidate.norm() > 0.5) break;
            }
            basis.components.row(r) = (candidate / candidate.norm()).transpose();
        }
    }
    fix_component_signs(basis.components);
    return basis;
}

StrandCoefficients encode_strand(const Strand& strand, const StrandBasis& basis) {
    validate_strand(strand);
    if (strand.size() != basis.length)
        throw std::invalid_argument("encode_strand: strand length does not match basis");
    const DftPlan plan(basis.length);
    const Eigen::VectorXd centered = strand_spectrum(strand, plan) - basis.mean;
    return StrandCoefficients{basis.components * centered};
}

Strand decode_strand(const StrandCoefficients& gamma, const StrandBasis& basis) {
    if (gamma.gamma.size() != basis.num_components())
        throw std::invalid_argument("decode_strand: coefficient count does not match basis");
    const Eigen::VectorXd flat = basis.mean + basis.components.transpose() * gamma.gamma;
    return idft_strand(unflatten_frequency(flat), basis.length);
}

Eigen::VectorXd decode_strand_vjp(const std::vector<Eigen::Vector3d>& point_grads,
                                  const StrandBasis& basis) {
    if (static_cast<int>(point_grads.size()) != basis.length)
        throw std::invalid_argument("decode_strand_vjp: gradient count does not match basis");
    const DftPlan plan(basis.length);
    Eigen::MatrixXd grads(basis.length, 3);
    for (int j = 0; j < basis.length; ++j) grads.row(j) = point_grads[j].transpose();
    const Eigen::MatrixXd packed_grad = plan.synthesis().transpose() * grads;  // 2k x 3
    Eigen::VectorXd flat_grad(basis.flat_size());
    const int k = plan.bands();
    for (int m = 0; m < k; ++m)
        for (int c = 0; c < 3; ++c) {
            flat_grad(6 * m + 2 * c) = packed_grad(2 * m, c);
            flat_grad(6 * m + 2 * c + 1) = packed_grad(2 * m + 1, c);
        }
    return basis.components * flat_grad;
}

DecodeOperator build_decode_operator(const StrandBasis& basis) {
    const DftPlan plan(basis.length);
    const int k = plan.bands();
    const int dim = basis.flat_size();
    // Per-channel scatter of the flattened layout into synthesis inputs.
    // points(j, c) = sum_m synthesis(j, 2m..2m+1) . flat(6m + 2c .. 6m + 2c + 1)
    Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(3 * basis.length, dim);
    for (int j = 0; j < basis.length; ++j)
        for (int c = 0; c < 3; ++c)
            for (int m = 0; m < k; ++m) {
                lift(3 * j + c, 6 * m + 2 * c) = plan.synthesis()(j, 2 * m);
                lift(3 * j + c, 6 * m + 2 * c + 1) = plan.synthesis()(j, 2 * m + 1);
            }
    DecodeOperator op;
    op.matrix = lift * basis.components.transpose();
    op.offset = lift * basis.mean;
    return op;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

}  // namespace

void save_basis(const std::string& path, const StrandBasis& basis) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_basis: cannot open " + path);
    out.write(kBasisMagic, sizeof(kBasisMagic));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(basis.length));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(basis.bands()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(basis.num_components()));
    out.write(kNormalizationTag, sizeof(kNormalizationTag));
    out.write(reinterpret_cast<const char*>(basis.mean.data()),
              static_cast<std::streamsize>(sizeof(double) * basis.mean.size()));
    // Components row-major.
    for (int r = 0; r < basis.num_components(); ++r) {
        const Eigen::VectorXd row = basis.components.row(r).transpose();
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(sizeof(double) * row.size()));
    }
    if (!out) throw std::runtime_error("save_basis: write failed for " + path);
}

StrandBasis load_basis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_basis: cannot open " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBasisMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_basis: bad magic in " + path);
    StrandBasis basis;
    basis.length = static_cast<int>(read_raw<std::uint32_t>(in));
    const auto bands = read_raw<std::uint32_t>(in);
    const auto comps = read_raw<std::uint32_t>(in);
    char tag[8];
    in.read(tag, sizeof(tag));
    if (!in || std::memcmp(tag, kNormalizationTag, sizeof(tag)) != 0)
        throw std::runtime_error("load_basis: unknown normalization tag in " + path);
    if (static_cast<int>(bands) != bands_for_length(basis.length))
        throw std::runtime_error("load_basis: band count inconsistent with length");
    const int dim = 6 * static_cast<int>(bands);
    basis.mean.resize(dim);
    in.read(reinterpret_cast<char*>(basis.mean.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
    basis.components.resize(comps, dim);
    for (std::uint32_t r = 0; r < comps; ++r) {
        Eigen::VectorXd row(dim);
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * dim));
        basis.components.row(r) = row.transpose();
    }
    if (!in) throw std::runtime_error("load_basis: truncated file " + path);
    return basis;
}

}  // namespace hairkit
