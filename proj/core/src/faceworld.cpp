#include "facedose/faceworld.hpp"

#include "facedose/error.hpp"
#include "facedose/face_topology.hpp"
#include "facedose/serialization.hpp"
#include "facedose/hashing.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facedose {

// ---------------------------------------------------------------- LatentCode

LatentCode::LatentCode(LatentShape shape) : LatentCode(shape, Eigen::VectorXd::Zero(shape.size())) {}

LatentCode::LatentCode(LatentShape shape, Eigen::VectorXd values) : shape_(shape), values_(std::move(values))
{
    if (shape.layers <= 0 || shape.dims <= 0 || shape.layers > kMaxLatentLayers || shape.dims > kMaxLatentDims) {
        throw Error(Errc::shape_mismatch, "latent shape out of range", "shape");
    }
    if (values_.size() != shape.size()) {
        throw Error(Errc::shape_mismatch, "latent values do not match the shape", "values");
    }
}

LatentCode& LatentCode::operator+=(const LatentCode& o)
{
    require_same_shape(*this, o, "latent addition");
    values_ += o.values_;
    return *this;
}

LatentCode& LatentCode::operator-=(const LatentCode& o)
{
    require_same_shape(*this, o, "latent subtraction");
    values_ -= o.values_;
    return *this;
}

LatentCode& LatentCode::operator*=(double s)
{
    values_ *= s;
    return *this;
}

void require_same_shape(const LatentCode& a, const LatentCode& b, const char* what)
{
    if (!(a.shape() == b.shape())) {
        throw Error(Errc::shape_mismatch, std::string(what) + ": latent shapes differ");
    }
}

// ------------------------------------------------------------ construction

namespace {

constexpr int kRows = 2 * static_cast<int>(kLandmarkCount);

/// Applies the anchor constraints in place: mouth-center rows vanish and
/// each eye's mean displacement is removed. Commutes with mirroring.
void constrain(Eigen::Ref<Eigen::MatrixXd> m, const RegionIndexTable& t)
{
    for (int i : t.mouth_center) {
        m.row(2 * i).setZero();
        m.row(2 * i + 1).setZero();
    }
    for (const auto* eye : {&t.eye_left, &t.eye_right}) {
        for (int axis = 0; axis < 2; ++axis) {
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(m.cols());
            for (int i : *eye) mean += m.row(2 * i + axis);
            mean /= static_cast<double>(eye->size());
            for (int i : *eye) m.row(2 * i + axis) -= mean;
        }
    }
}

/// Landmark mirror on displacement fields: (P d)_i = (-dx, dy) of mirror(i).
Eigen::MatrixXd mirror_rows(const Eigen::MatrixXd& m, const RegionIndexTable& t)
{
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (int i = 0; i < static_cast<int>(kLandmarkCount); ++i) {
        const int j = t.mirror[i];
        out.row(2 * i) = -m.row(2 * j);
        out.row(2 * i + 1) = m.row(2 * j + 1);
    }
    return out;
}

Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& m, const std::vector<bool>& keep)
{
    Eigen::MatrixXd out = m;
    for (int i = 0; i < static_cast<int>(kLandmarkCount); ++i) {
        if (!keep[i]) {
            out.row(2 * i).setZero();
            out.row(2 * i + 1).setZero();
        }
    }
    return out;
}

/// Orthonormal basis of the column space of `m` (which must have full
/// column rank), with column signs fixed so column j correlates positively
/// with the input column j.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    const Eigen::MatrixXd r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    for (int j = 0; j < m.cols(); ++j) {
        if (std::abs(r(j, j)) < 1e-9 * std::max(1.0, m.col(j).norm())) {
            throw Error(Errc::invalid_config, "latent block exceeds the degrees of freedom of its region");
        }
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = n01(rng);
    return m;
}

/// Droop of a left-side region, as a displacement field (pixels, y down).
Eigen::VectorXd anatomical_droop(Region region, const RegionIndexTable& t)
{
    Eigen::VectorXd d = Eigen::VectorXd::Zero(kRows);
    switch (region) {
    case Region::brow_left:
        for (std::size_t j = 0; j < t.brow_left.size(); ++j) {
            const std::size_t half = t.brow_left.size() / 2;
            const double outer = 1.0 - static_cast<double>(j % half) / static_cast<double>(half - 1);
            d[2 * t.brow_left[j] + 1] = std::pow(outer, 1.5);
        }
        break;
    case Region::eye_left: {
        const std::size_t n = t.eye_left.size();
        for (std::size_t j = n / 2 + 1; j < n; ++j) {
            const double s = 1.0 - static_cast<double>(j - n / 2) / static_cast<double>(n / 2);
            d[2 * t.eye_left[j] + 1] = std::sin(std::numbers::pi * s);
        }
        break;
    }
    case Region::mouth_left:
        for (int i : t.roi(Region::mouth_left)) d[2 * i + 1] = 0.5;
        d[2 * t.mouth_corner_left + 1] = 1.0;
        for (std::size_t j = 0; j < t.furrow_left.size(); ++j) {
            const double s = static_cast<double>(j) / static_cast<double>(t.furrow_left.size() - 1);
            d[2 * t.furrow_left[j]] = 0.4 * s;
            d[2 * t.furrow_left[j] + 1] = 0.3 * s;
        }
        break;
    default:
        throw Error(Errc::invalid_config, "droop is defined for left regions only");
    }
    return d;
}

void lift_rows(std::span<const Point2> pts, Eigen::VectorXd& v)
{
    v.resize(kRows);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        v[2 * i] = pts[i].x();
        v[2 * i + 1] = pts[i].y();
    }
}

} // namespace

SyntheticWorld SyntheticWorld::create(const SyntheticWorldConfig& config, const RegionIndexTable& t)
{
    if (!(config.epsilon >= 0.0 && config.epsilon <= 0.2)) {
        throw Error(Errc::invalid_config, "coupling epsilon must lie in [0, 0.2]", "epsilon");
    }
    if (!(config.pixel_scale > 0.0) || !(config.ridge_lambda >= 0.0) || !(config.noise_sigma >= 0.0)) {
        throw Error(Errc::invalid_config, "scale, ridge and noise must be non-negative", "config");
    }
    const int n = config.shape.size();
    const int b = n / 8;
    if (b < 1 || n - 6 * b < 2) {
        throw Error(Errc::invalid_config, "latent shape too small for six region blocks", "shape");
    }
    LatentCode probe(config.shape); // validates the shape bounds

    std::mt19937_64 rng(config.seed);
    std::vector<Point2> base = synthetic_base_face(t);
    Eigen::MatrixXd mixing = Eigen::MatrixXd::Zero(kRows, n);
    const double s = config.pixel_scale;
    const double eps = config.epsilon;

    // Left region blocks and their mirror images.
    for (Region left : {Region::brow_left, Region::eye_left, Region::mouth_left}) {
        std::vector<bool> on(kLandmarkCount, false);
        for (int i : t.roi(left)) on[i] = true;
        std::vector<bool> off(kLandmarkCount);
        for (std::size_t i = 0; i < kLandmarkCount; ++i) off[i] = !on[i];

        Eigen::MatrixXd raw_on = restrict_rows(gaussian(kRows, b, rng), on);
        raw_on.col(0) = anatomical_droop(left, t);
        constrain(raw_on, t);
        Eigen::MatrixXd raw_off = restrict_rows(gaussian(kRows, b, rng), off);
        constrain(raw_off, t);

        const Eigen::MatrixXd cols = s * (orthonormalize(raw_on) + eps * orthonormalize(raw_off));
        const int k = static_cast<int>(left);
        mixing.middleCols(k * b, b) = cols;
        mixing.middleCols((k + 1) * b, b) = mirror_rows(cols, t);
    }

    // Shared block: mirror-symmetric columns first, then antisymmetric ones.
    {
        std::vector<bool> in_roi(kLandmarkCount, false);
        for (Region r : kAllRegions)
            for (int i : t.roi(r)) in_roi[i] = true;
        std::vector<bool> rest(kLandmarkCount);
        for (std::size_t i = 0; i < kLandmarkCount; ++i) rest[i] = !in_roi[i];

        const int total = n - 6 * b;
        const int n_sym = (total + 1) / 2;
        int col = 6 * b;
        for (int parity : {+1, -1}) {
            const int count = parity > 0 ? n_sym : total - n_sym;
            Eigen::MatrixXd raw_on = restrict_rows(gaussian(kRows, count, rng), rest);
            raw_on = raw_on + parity * mirror_rows(raw_on, t);
            constrain(raw_on, t);
            Eigen::MatrixXd raw_off = restrict_rows(gaussian(kRows, count, rng), in_roi);
            raw_off = raw_off + parity * mirror_rows(raw_off, t);
            constrain(raw_off, t);
            mixing.middleCols(col, count) = s * (orthonormalize(raw_on) + eps * orthonormalize(raw_off));
            col += count;
        }
        return SyntheticWorld(config, std::move(base), std::move(mixing), b, n_sym);
    }
}

SyntheticWorld::SyntheticWorld(SyntheticWorldConfig config, std::vector<Point2> base_face, Eigen::MatrixXd mixing,
                               int block_size, int rest_symmetric)
    : config_(config), base_face_(std::move(base_face)), mixing_(std::move(mixing)), block_size_(block_size),
      rest_symmetric_(rest_symmetric)
{
    const int n = config_.shape.size();
    if (base_face_.size() != kLandmarkCount || mixing_.rows() != kRows || mixing_.cols() != n) {
        throw Error(Errc::shape_mismatch, "world parameters do not match the latent shape");
    }
    if (block_size_ < 1 || 6 * block_size_ >= n || rest_symmetric_ < 0 || rest_symmetric_ > n - 6 * block_size_) {
        throw Error(Errc::invalid_config, "inconsistent block layout");
    }
    if (!mixing_.allFinite()) {
        throw Error(Errc::invalid_data, "mixing map has non-finite entries");
    }
    Eigen::MatrixXd gram = mixing_.transpose() * mixing_;
    // Full column rank check on the unregularized Gram matrix.
    Eigen::LLT<Eigen::MatrixXd> plain(gram);
    if (plain.info() != Eigen::Success || plain.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-9) {
        throw Error(Errc::invalid_config, "mixing map does not have full column rank");
    }
    gram.diagonal().array() += config_.ridge_lambda;
    normal_.compute(gram);
    encoder_ = normal_.solve(mixing_.transpose());
}

Eigen::VectorXd SyntheticWorld::offsets(const LandmarkSet& obs) const
{
    if (obs.frame().width != static_cast<int>(kCanonicalSize) || obs.frame().height != static_cast<int>(kCanonicalSize)) {
        throw Error(Errc::shape_mismatch, "encode expects landmarks in the canonical frame", "frame");
    }
    Eigen::VectorXd y;
    lift_rows(obs.points(), y);
    Eigen::VectorXd b;
    lift_rows(base_face_, b);
    return y - b;
}

LandmarkSet SyntheticWorld::decode(const LatentCode& w) const
{
    if (!(w.shape() == config_.shape)) {
        throw Error(Errc::shape_mismatch, "latent code does not match the world shape");
    }
    if (!w.all_finite()) {
        throw Error(Errc::invalid_data, "latent code has non-finite entries");
    }
    const Eigen::VectorXd d = mixing_ * w.flat();
    std::vector<Point2> pts(kLandmarkCount);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        pts[i] = Point2(std::clamp(base_face_[i].x() + d[2 * i], 0.0, kCanonicalSize),
                        std::clamp(base_face_[i].y() + d[2 * i + 1], 0.0, kCanonicalSize));
    }
    return LandmarkSet(std::move(pts), FrameSize{static_cast<int>(kCanonicalSize), static_cast<int>(kCanonicalSize)});
}

LatentCode SyntheticWorld::encode(const LandmarkSet& observation) const
{
    // The mean code is zero, so the ridge term adds nothing to the right-hand side.
    return LatentCode(config_.shape, encoder_ * offsets(observation));
}

LatentCode SyntheticWorld::refine(const LatentCode& w0, const LandmarkSet& observation,
                                  std::span<const double> weights, const RefineOptions& options) const
{
    if (!(w0.shape() == config_.shape)) {
        throw Error(Errc::shape_mismatch, "initial code does not match the world shape");
    }
    if (weights.size() != kLandmarkCount) {
        throw Error(Errc::shape_mismatch, "refine needs one weight per landmark", "weights");
    }
    Eigen::VectorXd row_w(kRows);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw Error(Errc::invalid_data, "weights must be finite and non-negative", "weights");
        }
        row_w[2 * i] = row_w[2 * i + 1] = weights[i];
    }
    const double lambda = options.lambda.value_or(config_.ridge_lambda);
    const Eigen::VectorXd y = offsets(observation);
    const Eigen::VectorXd mean = mean_code().flat();

    // Conjugate gradients on (M^T W M + lambda I) w = M^T W y + lambda mean.
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return mixing_.transpose() * (row_w.asDiagonal() * (mixing_ * v)) + lambda * v;
    };
    const Eigen::VectorXd rhs = mixing_.transpose() * (row_w.asDiagonal() * y) + lambda * mean;
    Eigen::VectorXd w = w0.flat();
    Eigen::VectorXd r = rhs - apply(w);
    Eigen::VectorXd p = r;
    double rr = r.squaredNorm();
    const double stop = 1e-30 * std::max(1.0, rhs.squaredNorm());
    for (int step = 0; step < options.max_steps && rr > stop; ++step) {
        const Eigen::VectorXd ap = apply(p);
        const double curvature = p.dot(ap);
        if (!(curvature > 0.0)) break;
        const double a = rr / curvature;
        w += a * p;
        r -= a * ap;
        const double rr_next = r.squaredNorm();
        p = r + (rr_next / rr) * p;
        rr = rr_next;
    }
    return LatentCode(config_.shape, std::move(w));
}

std::string SyntheticWorld::version_hash() const
{
    return sha256_hex(save_world(*this));
}

LandmarkSet SyntheticWorld::observe(const LatentCode& w, std::mt19937_64& rng) const
{
    LandmarkSet clean = decode(w);
    if (config_.noise_sigma == 0.0) return clean;
    std::normal_distribution<double> noise(0.0, config_.noise_sigma);
    std::vector<Point2> pts(clean.points().begin(), clean.points().end());
    for (Point2& p : pts) p += Point2(noise(rng), noise(rng));
    return LandmarkSet(std::move(pts), clean.frame());
}

LatentCode SyntheticWorld::mirror_code(const LatentCode& w) const
{
    if (!(w.shape() == config_.shape)) {
        throw Error(Errc::shape_mismatch, "latent code does not match the world shape");
    }
    LatentCode out = w;
    const int b = block_size_;
    for (int k = 0; k < 6; k += 2) {
        out.flat().segment(k * b, b) = w.flat().segment((k + 1) * b, b);
        out.flat().segment((k + 1) * b, b) = w.flat().segment(k * b, b);
    }
    const int anti_begin = 6 * b + rest_symmetric_;
    const int n = config_.shape.size();
    out.flat().segment(anti_begin, n - anti_begin) *= -1.0;
    return out;
}

std::pair<int, int> SyntheticWorld::block(Region region) const
{
    const int k = static_cast<int>(region);
    return {k * block_size_, (k + 1) * block_size_};
}

std::pair<int, int> SyntheticWorld::shared_block() const
{
    return {6 * block_size_, config_.shape.size()};
}

// -------------------------------------------------------------- mirroring

LandmarkSet mirror_face(const LandmarkSet& observation, const RegionIndexTable& table, Side keep)
{
    if (keep == Side::midline) {
        throw Error(Errc::invalid_data, "mirror_face keeps the left or the right half");
    }
    const Anchors a = anchors_of(observation.points(), table);
    const double axis = 0.5 * (a.eye_left.x() + a.eye_right.x());
    std::vector<Point2> out(observation.points().begin(), observation.points().end());
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Side side = table.side[i];
        if (side == Side::midline) {
            out[i].x() = axis;
        } else if (side != keep) {
            const Point2& src = observation[table.mirror[i]];
            out[i] = Point2(2.0 * axis - src.x(), src.y());
        }
    }
    return LandmarkSet(std::move(out), observation.frame());
}

SymmetricTarget symmetric_target(const LandmarkSet& observation, const Generator& world,
                                 const RegionIndexTable& table)
{
    LatentCode left = world.encode(mirror_face(observation, table, Side::left));
    LatentCode right = world.encode(mirror_face(observation, table, Side::right));
    LatentCode mid = 0.5 * (left + right);
    LandmarkSet face = world.decode(mid);
    return {std::move(face), std::move(mid), std::move(left), std::move(right)};
}

std::vector<double> eye_mouth_weights(const RegionIndexTable& table, double emphasis)
{
    std::vector<double> w(kLandmarkCount, 1.0);
    for (Region r : {Region::eye_left, Region::eye_right, Region::mouth_left, Region::mouth_right}) {
        for (int i : table.roi(r)) w[i] = emphasis;
    }
    return w;
}

} // namespace facedose
