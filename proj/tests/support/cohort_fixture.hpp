#pragma once
// One generated, split and calibrated cohort per test process.

#include <facedose/cohort.hpp>
#include <facedose/doseresponse.hpp>
#include <facedose/evaluation.hpp>

#include <memory>

namespace facedose::testing {

struct CohortFixture
{
    Cohort cohort;
    PatientSplit split;
    std::vector<TrainingCase> cases; ///< calibrated, from the training patients
    GbmModel model_a;
    GbmModel model_b;
    RoiSet masks;

    const SyntheticWorld& world() const { return cohort.world; }
    const PatientTruth& truth_of(const std::string& id) const
    {
        for (const PatientTruth& t : cohort.truth.patients) {
            if (t.patient_id == id) return t;
        }
        throw std::out_of_range(id);
    }
};

inline const CohortFixture& shared_cohort()
{
    static const std::unique_ptr<CohortFixture> f = [] {
        CohortConfig config;
        config.seed = 9;
        Cohort c = generate_cohort(config);
        PatientSplit split = split_by_patient(c.records, 0.8, 9);
        const RoiSet masks = default_roi_masks();
        std::vector<TrainingCase> cases =
            build_training_cases(split.train, c.world, RegionIndexTable::standard(), masks);
        calibrate_cases(cases, c.world, RegionIndexTable::standard());
        GbmModel a = train_approach_a(cases, {});
        GbmModel b = train_approach_b(cases, {});
        return std::make_unique<CohortFixture>(
            CohortFixture{std::move(c), std::move(split), std::move(cases), std::move(a), std::move(b), masks});
    }();
    return *f;
}

} // namespace facedose::testing
