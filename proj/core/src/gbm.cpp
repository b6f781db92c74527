#include "facedose/gbm.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace facedose {

void GbmConfig::validate() const
{
    if (n_trees < 1) throw Error(Errc::invalid_config, "n_trees must be positive", "n_trees");
    if (max_depth < 1) throw Error(Errc::invalid_config, "max_depth must be positive", "max_depth");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw Error(Errc::invalid_config, "learning_rate must lie in (0, 1]", "learning_rate");
    }
    if (min_samples_leaf < 1) throw Error(Errc::invalid_config, "min_samples_leaf must be positive", "min_samples_leaf");
    if (!(subsample > 0.0 && subsample <= 1.0)) {
        throw Error(Errc::invalid_config, "subsample must lie in (0, 1]", "subsample");
    }
}

int RegressionTree::leaf_of(std::span<const double> x) const
{
    int i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return i;
}

double RegressionTree::predict(std::span<const double> x) const
{
    return nodes[leaf_of(x)].value;
}

int RegressionTree::depth() const
{
    std::vector<int> d(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[nodes[i].left] = d[i] + 1;
            d[nodes[i].right] = d[i] + 1;
        }
    }
    return deepest;
}

GbmModel::GbmModel(GbmConfig config, int n_features, std::vector<double> base,
                   std::vector<std::vector<RegressionTree>> trees)
    : config_(config), n_features_(n_features), base_(std::move(base)), trees_(std::move(trees))
{
    config_.validate();
    if (n_features_ < 1 || base_.empty() || trees_.size() != base_.size()) {
        throw Error(Errc::shape_mismatch, "model dimensions are inconsistent");
    }
    for (const auto& ensemble : trees_) {
        for (const RegressionTree& t : ensemble) {
            const int n = static_cast<int>(t.nodes.size());
            if (n == 0) throw Error(Errc::format_error, "empty tree");
            // Children must point forward so traversal always terminates.
            for (int i = 0; i < n; ++i) {
                const TreeNode& node = t.nodes[i];
                if (node.is_leaf()) {
                    if (!std::isfinite(node.value)) throw Error(Errc::format_error, "non-finite leaf value");
                    continue;
                }
                if (node.feature >= n_features_ || node.left <= i || node.right <= i || node.left >= n ||
                    node.right >= n) {
                    throw Error(Errc::format_error, "tree node links are invalid");
                }
            }
        }
    }
}

double GbmModel::predict_target(std::span<const double> x, int target) const
{
    if (static_cast<int>(x.size()) != n_features_) {
        throw Error(Errc::shape_mismatch,
                    "expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()), "x");
    }
    double sum = 0.0;
    for (const RegressionTree& t : trees_[target]) sum += t.predict(x);
    return base_[target] + config_.learning_rate * sum;
}

std::vector<double> GbmModel::predict(std::span<const double> x) const
{
    std::vector<double> out(base_.size());
    for (int k = 0; k < n_targets(); ++k) out[k] = predict_target(x, k);
    return out;
}

namespace {

struct SplitChoice
{
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

/// Grows one tree on `rows` (ascending sample ids) fitting `residual`.
class TreeBuilder
{
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& order, const GbmConfig& cfg)
        : x_(x), order_(order), cfg_(cfg), member_(x.rows(), -1)
    {
    }

    RegressionTree build(const std::vector<int>& rows, const Eigen::VectorXd& residual)
    {
        RegressionTree tree;
        tree.nodes.push_back(leaf(rows, residual));
        std::vector<std::pair<int, std::vector<int>>> frontier{{0, rows}};
        for (int depth = 0; depth < cfg_.max_depth && !frontier.empty(); ++depth) {
            std::vector<std::pair<int, std::vector<int>>> next;
            for (auto& [node_id, node_rows] : frontier) {
                const SplitChoice s = best_split(node_rows, residual);
                if (s.feature < 0) continue;
                std::vector<int> left, right;
                for (int r : node_rows) (x_(r, s.feature) <= s.threshold ? left : right).push_back(r);
                const int li = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(leaf(left, residual));
                tree.nodes.push_back(leaf(right, residual));
                TreeNode& parent = tree.nodes[node_id];
                parent.feature = s.feature;
                parent.threshold = s.threshold;
                parent.left = li;
                parent.right = li + 1;
                parent.value = 0.0;
                next.emplace_back(li, std::move(left));
                next.emplace_back(li + 1, std::move(right));
            }
            frontier = std::move(next);
        }
        return tree;
    }

private:
    static TreeNode leaf(const std::vector<int>& rows, const Eigen::VectorXd& residual)
    {
        double sum = 0.0;
        for (int r : rows) sum += residual[r];
        TreeNode n;
        n.value = sum / static_cast<double>(rows.size());
        n.samples = static_cast<int>(rows.size());
        return n;
    }

    SplitChoice best_split(const std::vector<int>& rows, const Eigen::VectorXd& residual)
    {
        const int n = static_cast<int>(rows.size());
        const int min_leaf = cfg_.min_samples_leaf;
        SplitChoice best;
        if (n < 2 * min_leaf) return best;

        ++stamp_;
        double total = 0.0;
        for (int r : rows) {
            member_[r] = stamp_;
            total += residual[r];
        }
        const double parent_score = total * total / n;

        for (int f = 0; f < static_cast<int>(x_.cols()); ++f) {
            double left_sum = 0.0;
            int left_n = 0;
            int prev = -1;
            for (int r : order_[f]) {
                if (member_[r] != stamp_) continue;
                if (prev >= 0 && x_(r, f) > x_(prev, f) && left_n >= min_leaf && n - left_n >= min_leaf) {
                    const double right_sum = total - left_sum;
                    const double gain =
                        left_sum * left_sum / left_n + right_sum * right_sum / (n - left_n) - parent_score;
                    if (gain > best.gain) {
                        best.gain = gain;
                        best.feature = f;
                        best.threshold = 0.5 * (x_(prev, f) + x_(r, f));
                        // Midpoints can round onto the upper value when the two
                        // are adjacent doubles; keep the split a true partition.
                        if (!(best.threshold < x_(r, f))) best.threshold = x_(prev, f);
                    }
                }
                left_sum += residual[r];
                ++left_n;
                prev = r;
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<std::vector<int>>& order_;
    const GbmConfig& cfg_;
    std::vector<int> member_;
    int stamp_ = 0;
};

double masked_mse(const Eigen::VectorXd& residual, const std::vector<int>& rows)
{
    double s = 0.0;
    for (int r : rows) s += residual[r] * residual[r];
    return s / static_cast<double>(rows.size());
}

} // namespace

GbmModel train_gbm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GbmConfig& config,
                   const TargetMask* mask, GbmTrace* trace)
{
    config.validate();
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    const int q = static_cast<int>(y.cols());
    if (y.rows() != n) throw Error(Errc::shape_mismatch, "X and Y row counts differ", "y");
    if (p < 1 || q < 1) throw Error(Errc::shape_mismatch, "need at least one feature and one target");
    if (n < 2) throw Error(Errc::insufficient_data, "need at least 2 training samples");
    if (!x.allFinite()) throw Error(Errc::invalid_data, "feature matrix has non-finite entries", "x");
    if (mask && (mask->rows() != n || mask->cols() != q)) {
        throw Error(Errc::shape_mismatch, "target mask shape differs from Y", "mask");
    }

    // Presorted sample order per feature; stable so equal values keep row order.
    std::vector<std::vector<int>> order(p, std::vector<int>(n));
    for (int f = 0; f < p; ++f) {
        std::iota(order[f].begin(), order[f].end(), 0);
        std::stable_sort(order[f].begin(), order[f].end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }

    // Row-major copy so each sample is a contiguous feature span.
    std::vector<double> xr(static_cast<std::size_t>(n) * p);
    for (int r = 0; r < n; ++r)
        for (int f = 0; f < p; ++f) xr[static_cast<std::size_t>(r) * p + f] = x(r, f);
    auto sample = [&](int r) { return std::span<const double>(xr.data() + static_cast<std::size_t>(r) * p, p); };

    TreeBuilder builder(x, order, config);
    std::vector<double> base(q);
    std::vector<std::vector<RegressionTree>> trees(q);
    if (trace) trace->mse.assign(q, {});

    for (int k = 0; k < q; ++k) {
        std::vector<int> rows;
        for (int r = 0; r < n; ++r) {
            if (mask && !(*mask)(r, k)) continue;
            if (!std::isfinite(y(r, k))) {
                throw Error(Errc::invalid_data, "target matrix has non-finite entries",
                            "y[" + std::to_string(r) + "][" + std::to_string(k) + "]");
            }
            rows.push_back(r);
        }
        if (rows.size() < 2) {
            throw Error(Errc::insufficient_data, "target " + std::to_string(k) + " has fewer than 2 usable samples");
        }

        double mean = 0.0;
        for (int r : rows) mean += y(r, k);
        mean /= static_cast<double>(rows.size());
        base[k] = mean;

        Eigen::VectorXd residual = Eigen::VectorXd::Zero(n);
        for (int r : rows) residual[r] = y(r, k) - mean;
        if (trace) trace->mse[k].push_back(masked_mse(residual, rows));

        std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(k));
        const auto bag_size = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::lround(config.subsample * static_cast<double>(rows.size()))));

        trees[k].reserve(config.n_trees);
        for (int stage = 0; stage < config.n_trees; ++stage) {
            std::vector<int> bag = rows;
            if (bag_size < rows.size()) {
                std::shuffle(bag.begin(), bag.end(), rng);
                bag.resize(bag_size);
                std::sort(bag.begin(), bag.end());
            }
            RegressionTree tree = builder.build(bag, residual);
            for (int r : rows) residual[r] -= config.learning_rate * tree.predict(sample(r));
            trees[k].push_back(std::move(tree));
            if (trace) trace->mse[k].push_back(masked_mse(residual, rows));
        }
    }
    return GbmModel(config, p, std::move(base), std::move(trees));
}

} // namespace facedose
