#pragma once

#include "facedose/geometry.hpp"
#include "facedose/landmarks.hpp"
#include "facedose/region_table.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>

namespace facedose {

/// Largest latent shape the library accepts (the W+ layout of a
/// 256-resolution face generator).
inline constexpr int kMaxLatentLayers = 18;
inline constexpr int kMaxLatentDims = 512;

struct LatentShape
{
    int layers = 4;
    int dims = 32;

    int size() const { return layers * dims; }
    friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// An L x D latent code stored row-major as one flat vector.
class LatentCode
{
public:
    LatentCode() = default;
    explicit LatentCode(LatentShape shape);
    LatentCode(LatentShape shape, Eigen::VectorXd values);

    static LatentCode zeros(LatentShape shape) { return LatentCode(shape); }

    LatentShape shape() const noexcept { return shape_; }
    const Eigen::VectorXd& flat() const noexcept { return values_; }
    Eigen::VectorXd& flat() noexcept { return values_; }
    double operator()(int layer, int dim) const { return values_[layer * shape_.dims + dim]; }
    double& operator()(int layer, int dim) { return values_[layer * shape_.dims + dim]; }

    LatentCode& operator+=(const LatentCode& o);
    LatentCode& operator-=(const LatentCode& o);
    LatentCode& operator*=(double s);
    friend LatentCode operator+(LatentCode a, const LatentCode& b) { return a += b; }
    friend LatentCode operator-(LatentCode a, const LatentCode& b) { return a -= b; }
    friend LatentCode operator*(double s, LatentCode a) { return a *= s; }

    double norm() const { return values_.norm(); }
    bool all_finite() const { return values_.allFinite(); }

    friend bool operator==(const LatentCode& a, const LatentCode& b)
    {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    LatentShape shape_{0, 0};
    Eigen::VectorXd values_;
};

/// Throws Error(shape_mismatch) unless both codes share a shape.
void require_same_shape(const LatentCode& a, const LatentCode& b, const char* what);

struct RefineOptions
{
    int max_steps = 30;
    /// Ridge strength toward the mean code; world default when unset.
    std::optional<double> lambda;
};

/// Generator/encoder pair over landmark observations.
///
/// decode is deterministic. encode and refine take canonical-frame
/// landmarks (align first). For on-manifold w, encode(decode(w)) ~ w.
class Generator
{
public:
    virtual ~Generator() = default;

    virtual LatentShape latent_shape() const = 0;
    virtual LandmarkSet decode(const LatentCode& w) const = 0;
    virtual LatentCode encode(const LandmarkSet& observation) const = 0;
    /// Minimizes sum_i weights_i |decode_i(w) - obs_i|^2 + lambda |w - mean|^2
    /// starting from w0; the objective never increases between steps.
    virtual LatentCode refine(const LatentCode& w0, const LandmarkSet& observation, std::span<const double> weights,
                              const RefineOptions& options = {}) const = 0;
    virtual LatentCode mean_code() const = 0;
    /// Stable fingerprint of the generator's parameters.
    virtual std::string version_hash() const = 0;
};

struct SyntheticWorldConfig
{
    std::uint64_t seed = 0;
    LatentShape shape{};
    double epsilon = 0.02;      ///< off-region coupling, in [0, 0.2]
    double noise_sigma = 0.0;   ///< observation noise for observe(), pixels
    double ridge_lambda = 1e-6; ///< ridge toward the mean code in encode
    double pixel_scale = 4.0;   ///< landmark displacement (px) per unit latent step
};

/**
 * Deterministic affine face generator: landmarks = base + mixing * w.
 *
 * The latent vector is split into six per-region blocks (ROI order) of size
 * n/8 and one shared block for everything else. A block's columns move its
 * own region's landmarks through an orthonormal basis scaled by
 * pixel_scale, and every other landmark through a second orthonormal basis
 * scaled by epsilon * pixel_scale, so the off/on displacement ratio of a
 * pure block step is exactly epsilon. The first column of each left block is
 * an anatomical droop of that region. Right blocks are mirror images of the
 * left blocks and the shared block splits into mirror-symmetric and
 * mirror-antisymmetric columns, which makes the column space closed under
 * mirroring. Eye centroids and the mouth-center points never move, so every
 * decoded face is already aligned.
 */
class SyntheticWorld final : public Generator
{
public:
    static SyntheticWorld create(const SyntheticWorldConfig& config,
                                 const RegionIndexTable& table = RegionIndexTable::standard());

    /// Rebuilds a world from stored parameters (see serialization).
    SyntheticWorld(SyntheticWorldConfig config, std::vector<Point2> base_face, Eigen::MatrixXd mixing, int block_size,
                   int rest_symmetric);

    LatentShape latent_shape() const override { return config_.shape; }
    LandmarkSet decode(const LatentCode& w) const override;
    LatentCode encode(const LandmarkSet& observation) const override;
    LatentCode refine(const LatentCode& w0, const LandmarkSet& observation, std::span<const double> weights,
                      const RefineOptions& options = {}) const override;
    LatentCode mean_code() const override { return LatentCode::zeros(config_.shape); }
    std::string version_hash() const override;

    /// decode plus isotropic Gaussian noise of noise_sigma pixels.
    LandmarkSet observe(const LatentCode& w, std::mt19937_64& rng) const;

    /// The latent code whose decoding is the mirror image of decode(w).
    LatentCode mirror_code(const LatentCode& w) const;

    /// Half-open range of flat latent indices driving `region`.
    std::pair<int, int> block(Region region) const;
    std::pair<int, int> shared_block() const;

    const SyntheticWorldConfig& config() const noexcept { return config_; }
    const std::vector<Point2>& base_face() const noexcept { return base_face_; }
    const Eigen::MatrixXd& mixing() const noexcept { return mixing_; }
    int block_size() const noexcept { return block_size_; }
    int rest_symmetric() const noexcept { return rest_symmetric_; }

private:
    Eigen::VectorXd offsets(const LandmarkSet& observation) const;

    SyntheticWorldConfig config_;
    std::vector<Point2> base_face_;
    Eigen::MatrixXd mixing_; ///< (2 * 468) x n, rows interleaved x0, y0, x1, y1, ...
    int block_size_ = 0;
    int rest_symmetric_ = 0;
    Eigen::LLT<Eigen::MatrixXd> normal_;  ///< mixing^T mixing + lambda I
    Eigen::MatrixXd encoder_;             ///< (mixing^T mixing + lambda I)^-1 mixing^T
};

/// Keeps one half of the face and replaces the other with its reflection
/// about the vertical line through the eye midpoint (reordered by the
/// correspondence). Midline points are moved onto the axis.
LandmarkSet mirror_face(const LandmarkSet& observation, const RegionIndexTable& table, Side keep);

struct SymmetricTarget
{
    LandmarkSet face;
    LatentCode code;
    LatentCode code_left;
    LatentCode code_right;
};

/// Midpoint in latent space of the encodings of the two half-mirrored faces,
/// and its decoding.
SymmetricTarget symmetric_target(const LandmarkSet& observation, const Generator& world,
                                 const RegionIndexTable& table);

/// Per-landmark weights that emphasize the eyes and mouth for refine().
std::vector<double> eye_mouth_weights(const RegionIndexTable& table, double emphasis = 10.0);

} // namespace facedose
