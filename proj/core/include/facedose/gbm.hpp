#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace facedose {

struct GbmConfig
{
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.05;
    int min_samples_leaf = 2;
    double subsample = 1.0;
    std::uint64_t seed = 0;

    /// Throws Error(invalid_config) naming the offending field.
    void validate() const;
    friend bool operator==(const GbmConfig&, const GbmConfig&) = default;
};

/// One node of a regression tree stored as a flat array. A node is a leaf
/// when `feature` is negative. Samples with x[feature] <= threshold go left.
struct TreeNode
{
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int samples = 0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree
{
    std::vector<TreeNode> nodes; ///< nodes[0] is the root

    double predict(std::span<const double> x) const;
    /// Index of the leaf x falls into.
    int leaf_of(std::span<const double> x) const;
    int depth() const;
    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

/// Independent least-squares boosted ensembles, one per target.
class GbmModel
{
public:
    GbmModel() = default;
    GbmModel(GbmConfig config, int n_features, std::vector<double> base, std::vector<std::vector<RegressionTree>> trees);

    std::vector<double> predict(std::span<const double> x) const;
    double predict_target(std::span<const double> x, int target) const;

    const GbmConfig& config() const noexcept { return config_; }
    int n_features() const noexcept { return n_features_; }
    int n_targets() const noexcept { return static_cast<int>(base_.size()); }
    const std::vector<double>& base_prediction() const noexcept { return base_; }
    const std::vector<std::vector<RegressionTree>>& trees() const noexcept { return trees_; }

    friend bool operator==(const GbmModel&, const GbmModel&) = default;

private:
    GbmConfig config_;
    int n_features_ = 0;
    std::vector<double> base_;
    std::vector<std::vector<RegressionTree>> trees_;
};

/// Which (row, target) entries of Y take part in training; rows left out of
/// a target do not influence that target's ensemble.
using TargetMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-target training MSE, entry 0 after the base prediction and entry s
/// after stage s.
struct GbmTrace
{
    std::vector<std::vector<double>> mse;
};

/**
 * Stage-wise least-squares boosting. Each stage fits a depth-bounded tree to
 * the current residuals by exhaustive search over midpoints between sorted
 * unique feature values, splitting only on strictly positive gain; ties go
 * to the lowest feature and then the lowest threshold. Leaf values are the
 * mean residual, shrunk by the learning rate at prediction time.
 *
 * Throws Error(insufficient_data) for fewer than 2 usable rows per target,
 * Error(invalid_data) for non-finite entries and Error(shape_mismatch) for
 * inconsistent dimensions.
 */
GbmModel train_gbm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GbmConfig& config,
                   const TargetMask* mask = nullptr, GbmTrace* trace = nullptr);

} // namespace facedose
