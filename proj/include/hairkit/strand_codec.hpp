// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace hairkit {

/// A single hair strand: an ordered 3D polyline, root first.
struct Strand {
    std::vector<Eigen::Vector3d> points;

    Strand() = default;
    explicit Strand(std::vector<Eigen::Vector3d> pts) : points(std::move(pts)) {}

    int size() const { return static_cast<int>(points.size()); }
};

/// Throws std::invalid_argument if the strand is shorter than two points or
/// carries non-finite coordinates.
void validate_strand(const Strand& strand);

constexpr double kDegenerateSegmentLength = 1e-12;

/// Unit directions and lengths for the L-1 segments of a strand. Segments
/// shorter than kDegenerateSegmentLength inherit the previous segment's
/// direction (the root segment falls back to +z) and are listed in
/// `degenerate`.
struct SegmentDirections {
    std::vector<Eigen::Vector3d> directions;
    std::vector<double> lengths;
    std::vector<int> degenerate;
};

SegmentDirections segment_directions(const Strand& strand);

/// Per-point scalar curvature g_j = |b_j x b_{j+1}| for the L-2 interior
/// points; values lie in [0, 1].
struct CurvatureResult {
    std::vector<double> values;
    std::vector<int> degenerate_segments;
};

CurvatureResult curvature(const Strand& strand);

/// One-sided spectrum of a strand: k = floor(L/2)+1 complex coefficients per
/// coordinate channel under the unitary (1/sqrt(L)) transform convention.
struct FrequencyStrand {
    // bands[m][c] is band m of channel c (x, y, z).
    std::vector<std::array<std::complex<double>, 3>> bands;

    int band_count() const { return static_cast<int>(bands.size()); }
};

inline int bands_for_length(int length) { return length / 2 + 1; }

/// Precomputed trig tables for one strand length. All strand transforms in
/// this codec share the unitary normalization: both directions carry a
/// 1/sqrt(L) factor and the inverse doubles the interior bands.
class DftPlan {
  public:
    explicit DftPlan(int length);

    int length() const { return length_; }
    int bands() const { return bands_; }

    /// Analysis matrices, bands x length; spectrum_re = cos_table * signal / sqrt(L).
    const Eigen::MatrixXd& cos_table() const { return cos_table_; }
    const Eigen::MatrixXd& sin_table() const { return sin_table_; }

    /// Synthesis matrix, length x 2*bands, acting on [re_0, im_0, re_1, im_1, ...].
    const Eigen::MatrixXd& synthesis() const { return synthesis_; }

  private:
    int length_ = 0;
    int bands_ = 0;
    Eigen::MatrixXd cos_table_;
    Eigen::MatrixXd sin_table_;
    Eigen::MatrixXd synthesis_;
};

FrequencyStrand dft_strand(const Strand& strand);
Strand idft_strand(const FrequencyStrand& freq, int length);

// Flattened frequency layout used by the PCA basis: 6k reals ordered
// [band][x,y,z][re,im].
Eigen::VectorXd flatten_frequency(const FrequencyStrand& freq);
FrequencyStrand unflatten_frequency(const Eigen::VectorXd& flat);

/// PCA basis over flattened strand spectra.
struct StrandBasis {
    int length = 0;  // point count the basis was fit for
    Eigen::MatrixXd components;  // num_components x 6k, orthonormal rows
    Eigen::VectorXd mean;        // 6k, the mean spectrum

    int bands() const { return bands_for_length(length); }
    int num_components() const { return static_cast<int>(components.rows()); }
    int flat_size() const { return static_cast<int>(mean.size()); }
};

struct StrandCoefficients {
    Eigen::VectorXd gamma;
};

/// Incremental PCA over the corpus spectra: one streaming pass for the mean,
/// then fixed-size batches merged through an SVD update, so peak memory is
/// independent of the corpus size. Deterministic for a given corpus order
/// and batch size.
StrandBasis fit_basis(const std::vector<Strand>& strands, int num_components,
                      int batch_size = 1024);

StrandCoefficients encode_strand(const Strand& strand, const StrandBasis& basis);
Strand decode_strand(const StrandCoefficients& gamma, const StrandBasis& basis);

/// Adjoint of decode_strand: maps per-point gradients to coefficient
/// gradients (decode is affine in gamma, so this is gamma-independent).
Eigen::VectorXd decode_strand_vjp(const std::vector<Eigen::Vector3d>& point_grads,
                                  const StrandBasis& basis);

/// Decode as an explicit linear map: points = reshape(D * gamma + o), with
/// D of shape 3L x num_components. Used by batch decoders and the fit loop.
struct DecodeOperator {
    Eigen::MatrixXd matrix;  // 3L x num_components; rows ordered [point][x,y,z]
    Eigen::VectorXd offset;  // 3L, the decoded mean strand
};
DecodeOperator build_decode_operator(const StrandBasis& basis);

// Basis file ("SBAS1"): header {L, k, num_components, normalization tag},
// then the mean spectrum row-major, then the components row-major, all
// little-endian 64-bit floats.
void save_basis(const std::string& path, const StrandBasis& basis);
StrandBasis load_basis(const std::string& path);

}  // namespace hairkit
