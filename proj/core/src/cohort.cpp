#include "facedose/cohort.hpp"

#include "facedose/error.hpp"
#include "facedose/geometry.hpp"
#include "facedose/serialization.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace facedose {

std::string_view phase_name(Phase p) noexcept
{
    return p == Phase::pre ? "pre" : "post";
}

void CohortConfig::validate(const MuscleMap& muscles) const
{
    if (n_patients < 2) throw Error(Errc::invalid_config, "need at least 2 patients", "n_patients");
    if (images_per_patient < 1 || images_per_patient > static_cast<int>(kExpressions.size())) {
        throw Error(Errc::invalid_config, "images_per_patient must lie in [1, 8]", "images_per_patient");
    }
    if (!(asymmetry_scale >= 0.0)) throw Error(Errc::invalid_config, "must be non-negative", "asymmetry_scale");
    if (!(saturation > 0.0)) throw Error(Errc::invalid_config, "saturation must be positive", "saturation");
    if (!(noise_sigma >= 0.0)) throw Error(Errc::invalid_config, "must be non-negative", "noise_sigma");
    if (!(dose_probability >= 0.0 && dose_probability <= 1.0)) {
        throw Error(Errc::invalid_config, "must lie in [0, 1]", "dose_probability");
    }
    if (!(max_dose > 0.5 && max_dose <= kDefaultDoseBound)) {
        throw Error(Errc::invalid_config, "must lie in (0.5, 10]", "max_dose");
    }
    if (zero_dose_every < 0) throw Error(Errc::invalid_config, "must be non-negative", "zero_dose_every");
    if (gain.size() != 0) {
        if (gain.rows() != static_cast<int>(kRegionCount) || gain.cols() != static_cast<int>(kMuscleCount)) {
            throw Error(Errc::invalid_config, "gain must be 6 x 22", "gain");
        }
        for (int k = 0; k < gain.rows(); ++k) {
            for (int j = 0; j < gain.cols(); ++j) {
                const std::string where = "gain[" + std::to_string(k) + "][" + std::to_string(j) + "]";
                if (!std::isfinite(gain(k, j)) || gain(k, j) < 0.0) {
                    throw Error(Errc::invalid_config, "gain entries must be finite and non-negative", where);
                }
                if (gain(k, j) != 0.0 && static_cast<int>(muscles.region[j]) != k) {
                    throw Error(Errc::invalid_config, "gain couples a muscle to a foreign region", where);
                }
            }
        }
    }
}

Eigen::MatrixXd default_gain(std::uint64_t seed, const MuscleMap& muscles)
{
    std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc908ULL);
    std::uniform_real_distribution<double> g(0.03, 0.08);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(kRegionCount, kMuscleCount);
    for (std::size_t j = 0; j < kMuscleCount; ++j) a(static_cast<int>(muscles.region[j]), j) = g(rng);
    return a;
}

AlphaVector dose_response(const Eigen::MatrixXd& gain, double saturation, const DoseVector& u)
{
    AlphaVector a;
    for (int k = 0; k < static_cast<int>(kRegionCount); ++k) {
        double drive = 0.0;
        for (int j = 0; j < static_cast<int>(kMuscleCount); ++j) drive += gain(k, j) * u[j];
        a[k] = -std::expm1(-saturation * drive);
    }
    return a;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 finalizer over the combined value.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

LatentCode gaussian_code(LatentShape shape, double sigma, std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, sigma);
    LatentCode w(shape);
    for (Eigen::Index i = 0; i < w.flat().size(); ++i) w.flat()[i] = n(rng);
    return w;
}

LatentCode symmetrized(const SyntheticWorld& world, const LatentCode& w)
{
    return 0.5 * (w + world.mirror_code(w));
}

constexpr double kFrame = 720.0;

// Latent amplitudes of the synthetic population. They keep every region's
// landmarks inside the default ROI rectangles (bounding box + 8 px).
constexpr double kIdentitySigma = 0.25;
constexpr double kExpressionSigma = 0.3;
constexpr double kAsymmetrySigma = 0.06;
constexpr double kDroopMin = 1.0, kDroopMax = 2.0;

LandmarkSet photograph(const LandmarkSet& canonical, double noise_sigma, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> angle(-8.0, 8.0), scale(1.3, 2.0), shift(-25.0, 25.0);
    SimilarityTransform t;
    t.rotation = angle(rng) * std::numbers::pi / 180.0;
    t.scale = scale(rng);
    const Point2 centre(kCanonicalSize / 2, kCanonicalSize / 2);
    const Point2 target(kFrame / 2 + shift(rng), kFrame / 2 + shift(rng));
    t.translation = target - t.scale * Eigen::Rotation2Dd(t.rotation).toRotationMatrix() * centre;
    std::vector<Point2> pts = t.apply(canonical.points());
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> n(0.0, noise_sigma);
        for (Point2& p : pts) p += Point2(n(rng), n(rng));
    }
    return LandmarkSet(std::move(pts), FrameSize{static_cast<int>(kFrame), static_cast<int>(kFrame)});
}

} // namespace

Cohort generate_cohort(const CohortConfig& config, const RegionIndexTable& table)
{
    const MuscleMap& muscles = MuscleMap::standard();
    config.validate(muscles);
    SyntheticWorld world = SyntheticWorld::create(config.world, table);
    const LatentShape shape = world.latent_shape();
    const RoiSet masks = default_roi_masks(table);

    SealedTruth truth;
    truth.gain = config.gain.size() != 0 ? config.gain : default_gain(config.seed, muscles);
    truth.saturation = config.saturation;
    truth.world_hash = world.version_hash();

    // Symmetric expression offsets shared by all patients; neutral is zero.
    std::vector<LatentCode> expression_offset;
    {
        std::mt19937_64 rng(derive_seed(config.seed, 0xE));
        for (int x = 0; x < config.images_per_patient; ++x) {
            LatentCode e = gaussian_code(shape, kExpressionSigma, rng);
            expression_offset.push_back(x == 0 ? LatentCode(shape) : symmetrized(world, e));
        }
    }

    std::vector<PatientRecord> records;
    for (int p = 0; p < config.n_patients; ++p) {
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(p) + 1));
        char id[32];
        std::snprintf(id, sizeof id, "P%03d", p + 1);

        LatentCode identity = symmetrized(world, gaussian_code(shape, kIdentitySigma, rng));
        LatentCode asym = gaussian_code(shape, kAsymmetrySigma, rng);
        for (int k = world.shared_block().first; k < shape.size(); ++k) asym.flat()[k] = 0.0;
        std::uniform_real_distribution<double> droop(kDroopMin, kDroopMax);
        std::bernoulli_distribution coin(0.5);
        std::string droop_sides;
        for (Region left : {Region::brow_left, Region::eye_left, Region::mouth_left}) {
            const Region r = coin(rng) ? left : mirror_region(left);
            asym.flat()[world.block(r).first] += config.asymmetry_scale * droop(rng);
            droop_sides += (droop_sides.empty() ? "" : ",") + std::string(region_name(r));
        }

        // A treated left/right pair gets one intensity shared by its muscles,
        // with per-muscle jitter and the occasional skipped muscle. Regions
        // come in (left, right) order.
        DoseVector dose;
        const bool untreated = config.zero_dose_every > 0 && p % config.zero_dose_every == 0;
        std::bernoulli_distribution treated(config.dose_probability), skipped(0.2);
        std::uniform_real_distribution<double> intensity(0.5, config.max_dose), jitter(0.7, 1.3);
        bool on = false;
        double level = 0.0;
        for (Region r : kAllRegions) {
            if (static_cast<int>(r) % 2 == 0) {
                on = treated(rng);
                level = intensity(rng);
            }
            for (int j : muscles.muscles_of(r)) {
                const bool skip = skipped(rng);
                const double u = std::min(level * jitter(rng), kDefaultDoseBound);
                if (!untreated && on && !skip) dose[j] = u;
            }
        }
        const AlphaVector alpha = dose_response(truth.gain, truth.saturation, dose);

        PatientRecord rec;
        rec.patient_id = id;
        rec.dose = dose;
        rec.metadata = {{"source", "synthetic"}, {"droop", droop_sides}};
        PatientTruth pt;
        pt.patient_id = id;
        pt.alpha = alpha;

        const std::int64_t day0 = 1'700'000'000 + static_cast<std::int64_t>(p) * 30 * 86'400;
        std::vector<Session> pre, post;
        for (int x = 0; x < config.images_per_patient; ++x) {
            const std::string expr(kExpressions[x]);
            const LatentCode w_src = identity + asym + expression_offset[x];
            const LandmarkSet src = world.decode(w_src);
            const SymmetricTarget tgt = symmetric_target(src, world, table);
            AxisBasis basis = discover_axes(src, tgt.face, masks, world, id);
            const LandmarkSet after = world.decode(combine(w_src, basis, alpha));

            pre.push_back({expr, photograph(src, config.noise_sigma, rng), day0 + 60 * x, Phase::pre});
            post.push_back({expr, photograph(after, config.noise_sigma, rng), day0 + 14 * 86'400 + 60 * x, Phase::post});
            pt.expressions.push_back(expr);
            pt.w_src.push_back(w_src);
            pt.basis.push_back(std::move(basis));
        }
        rec.sessions = std::move(pre);
        rec.sessions.insert(rec.sessions.end(), post.begin(), post.end());
        records.push_back(std::move(rec));
        truth.patients.push_back(std::move(pt));
    }
    return Cohort{std::move(world), std::move(records), std::move(truth)};
}

PatientSplit split_by_patient(std::vector<PatientRecord> records, double ratio, std::uint64_t seed)
{
    if (records.size() < 2) throw Error(Errc::insufficient_data, "splitting needs at least 2 patients");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::invalid_config, "ratio must lie in (0, 1)", "ratio");
    std::sort(records.begin(), records.end(),
              [](const PatientRecord& a, const PatientRecord& b) { return a.patient_id < b.patient_id; });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].patient_id == records[i - 1].patient_id) {
            throw Error(Errc::invalid_data, "duplicate patient id " + records[i].patient_id);
        }
    }
    const auto n = static_cast<long>(records.size());
    const long n_train = std::clamp(std::lround(ratio * static_cast<double>(n)), 1L, n - 1);

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Fisher-Yates with an explicit draw so the split does not depend on
    // the standard library's shuffle implementation.
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<bool> is_train(records.size(), false);
    for (long i = 0; i < n_train; ++i) is_train[order[i]] = true;

    PatientSplit split;
    for (std::size_t i = 0; i < records.size(); ++i) {
        (is_train[i] ? split.train : split.test).push_back(std::move(records[i]));
    }
    return split;
}

void validate_record(const PatientRecord& record, const DoseBounds& bounds)
{
    if (record.patient_id.empty()) throw Error(Errc::ingest_error, "patient id is empty", "patient_id");
    if (record.patient_id.find_first_of("/\\") != std::string::npos || record.patient_id == "." ||
        record.patient_id == "..") {
        throw Error(Errc::ingest_error, "patient id may not contain path separators", "patient_id");
    }
    for (std::size_t j = 0; j < kMuscleCount; ++j) {
        const std::string where = "dose[" + std::to_string(j) + "]";
        if (!std::isfinite(record.dose[j])) throw Error(Errc::ingest_error, "dose is not finite", where);
        if (record.dose[j] < 0.0) throw Error(Errc::ingest_error, "negative dose for muscle " + std::to_string(j), where);
        if (record.dose[j] > bounds[j]) {
            throw Error(Errc::ingest_error, "dose above the bound for muscle " + std::to_string(j), where);
        }
    }
    if (record.sessions.empty()) throw Error(Errc::ingest_error, "record has no sessions", "sessions");

    bool has_pre = false;
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> last_pre_first_post;
    for (std::size_t i = 0; i < record.sessions.size(); ++i) {
        const Session& s = record.sessions[i];
        const std::string where = "sessions[" + std::to_string(i) + "]";
        if (s.landmarks.size() != kLandmarkCount) {
            throw Error(Errc::ingest_error, "session has " + std::to_string(s.landmarks.size()) + " landmarks",
                        where + ".points");
        }
        if (s.expression.empty()) throw Error(Errc::ingest_error, "expression label is empty", where + ".expression");
        auto& [last_pre, first_post] = last_pre_first_post.try_emplace(
            s.expression, std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()).first->second;
        if (s.phase == Phase::pre) {
            has_pre = true;
            last_pre = std::max(last_pre, s.timestamp);
        } else {
            first_post = std::min(first_post, s.timestamp);
        }
        if (last_pre >= first_post) {
            throw Error(Errc::ingest_error, "post session is not later than the pre session of '" + s.expression + "'",
                        where + ".timestamp");
        }
    }
    if (!has_pre) throw Error(Errc::ingest_error, "record has no pre-treatment session", "sessions");
}

std::vector<PatientRecord> ingest(const std::filesystem::path& path, const DoseBounds& bounds)
{
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path, ec)) {
        files.push_back(path);
    } else {
        throw Error(Errc::ingest_error, "no such file or directory", path.string());
    }

    std::vector<PatientRecord> out;
    std::set<std::string> seen;
    for (const fs::path& f : files) {
        try {
            PatientRecord r = load_record(read_text_file(f));
            validate_record(r, bounds);
            if (!seen.insert(r.patient_id).second) {
                throw Error(Errc::ingest_error, "duplicate patient id " + r.patient_id, "patient_id");
            }
            out.push_back(std::move(r));
        } catch (const Error& e) {
            const std::string loc = e.location().empty() ? f.string() : f.string() + ": " + e.location();
            throw Error(Errc::ingest_error, e.message(), loc);
        }
    }
    return out;
}

void export_records(const std::vector<PatientRecord>& records, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const PatientRecord& r : records) {
        validate_record(r);
        write_text_file(dir / (r.patient_id + ".json"), save_record(r));
    }
}

PatientRecord without_post_sessions(const PatientRecord& record)
{
    PatientRecord out = record;
    std::erase_if(out.sessions, [](const Session& s) { return s.phase == Phase::post; });
    return out;
}

} // namespace facedose
