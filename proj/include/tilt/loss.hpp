#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilt/error.hpp"
#include "tilt/numeric.hpp"

namespace tilt {

// Per-observation nonnegative losses for one fixed parameter vector.
class LossProfile {
public:
    explicit LossProfile(std::vector<double> losses) : losses_(std::move(losses)) {
        if (losses_.empty())
            throw invalid_input("loss profile must contain at least one entry");
        for (std::size_t i = 0; i < losses_.size(); ++i) {
            if (!std::isfinite(losses_[i]))
                throw invalid_input("loss profile entry " + std::to_string(i) +
                                    " is not finite");
            if (losses_[i] < 0.0)
                throw invalid_input("loss profile entry " + std::to_string(i) +
                                    " is negative");
        }
    }

    std::size_t size() const { return losses_.size(); }
    const std::vector<double>& values() const { return losses_; }
    std::span<const double> span() const { return losses_; }

private:
    std::vector<double> losses_;
};

// Tilt strength; lambda = 0 is excluded, the mean is a separate operation.
class TiltParam {
public:
    explicit TiltParam(double lambda) : lambda_(lambda) {
        if (!std::isfinite(lambda_) || lambda_ <= 0.0)
            throw invalid_parameter("tilt parameter must be finite and > 0");
    }

    double value() const { return lambda_; }

private:
    double lambda_;
};

// Observation -> groups map. Groups may overlap; every observation belongs to
// at least one group and every group is nonempty.
class GroupPartition {
public:
    GroupPartition(std::vector<std::vector<int>> membership, int group_count)
        : membership_(std::move(membership)), group_count_(group_count) {
        if (group_count_ < 1)
            throw invalid_partition("group count must be >= 1");
        std::vector<std::size_t> sizes(static_cast<std::size_t>(group_count_), 0);
        for (std::size_t i = 0; i < membership_.size(); ++i) {
            if (membership_[i].empty())
                throw invalid_partition("observation " + std::to_string(i) +
                                        " belongs to no group");
            for (int g : membership_[i]) {
                if (g < 0 || g >= group_count_)
                    throw invalid_partition("group index out of range for observation " +
                                            std::to_string(i));
                ++sizes[static_cast<std::size_t>(g)];
            }
        }
        for (int g = 0; g < group_count_; ++g) {
            if (sizes[static_cast<std::size_t>(g)] == 0)
                throw invalid_partition("group " + std::to_string(g) + " is empty");
        }
    }

    static GroupPartition singletons(std::size_t n) {
        std::vector<std::vector<int>> membership(n);
        for (std::size_t i = 0; i < n; ++i) membership[i] = {static_cast<int>(i)};
        return GroupPartition(std::move(membership), static_cast<int>(n));
    }

    int group_count() const { return group_count_; }
    std::size_t observation_count() const { return membership_.size(); }
    const std::vector<int>& groups_of(std::size_t i) const { return membership_[i]; }

private:
    std::vector<std::vector<int>> membership_;
    int group_count_;
};

// L expressed as gamma * mean + (1 - gamma) * max; gamma is undefined when
// the profile is constant (mean == max).
struct TiltDecomposition {
    double value;
    double mean_loss;
    double max_loss;
    std::optional<double> gamma;
};

// (1/lambda) log((1/n) sum_i exp(lambda * l_i)), max-subtracted.
inline double tilted_value(const LossProfile& profile, const TiltParam& tilt) {
    const double lambda = tilt.value();
    const auto& l = profile.values();
    double lmax = *std::max_element(l.begin(), l.end());
    KahanSum<> acc;
    for (double li : l) acc.add(std::exp(lambda * (li - lmax)));
    return lmax + std::log(acc.value() / static_cast<double>(l.size())) / lambda;
}

inline double utilitarian_value(const LossProfile& profile) {
    return kahan_sum(profile.values()) / static_cast<double>(profile.size());
}

inline double rawlsian_value(const LossProfile& profile) {
    const auto& l = profile.values();
    return *std::max_element(l.begin(), l.end());
}

// Softmax of lambda * losses: the weights of the tilted gradient.
inline std::vector<double> tilt_weights(const LossProfile& profile,
                                        const TiltParam& tilt) {
    const double lambda = tilt.value();
    const auto& l = profile.values();
    std::vector<double> scaled(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) scaled[i] = lambda * l[i];
    return softmax(std::span<const double>(scaled));
}

// Within-group average losses a_j.
inline std::vector<double> group_average_losses(const LossProfile& profile,
                                                const GroupPartition& groups) {
    if (groups.observation_count() != profile.size())
        throw invalid_partition("partition covers " +
                                std::to_string(groups.observation_count()) +
                                " observations, profile has " +
                                std::to_string(profile.size()));
    const auto& l = profile.values();
    std::size_t m = static_cast<std::size_t>(groups.group_count());
    std::vector<KahanSum<>> sums(m);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < l.size(); ++i) {
        for (int g : groups.groups_of(i)) {
            sums[static_cast<std::size_t>(g)].add(l[i]);
            ++counts[static_cast<std::size_t>(g)];
        }
    }
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j)
        out[j] = sums[j].value() / static_cast<double>(counts[j]);
    return out;
}

// Tilt over per-group average losses: (1/lambda) log((1/m) sum_j exp(lambda a_j)).
inline double group_tilted_value(const LossProfile& profile,
                                 const GroupPartition& groups,
                                 const TiltParam& tilt) {
    std::vector<double> averages = group_average_losses(profile, groups);
    return tilted_value(LossProfile(std::move(averages)), tilt);
}

inline TiltDecomposition decompose(const LossProfile& profile, const TiltParam& tilt) {
    TiltDecomposition d;
    d.value = tilted_value(profile, tilt);
    d.mean_loss = utilitarian_value(profile);
    d.max_loss = rawlsian_value(profile);
    if (d.max_loss > d.mean_loss) {
        double g = (d.max_loss - d.value) / (d.max_loss - d.mean_loss);
        // Outside (0, 1) only when rounding noise swamps a near-constant
        // profile; such a decomposition is flagged undefined.
        if (g > 0.0 && g < 1.0) d.gamma = g;
    }
    return d;
}

// mean + ((1 - gamma)/gamma) * max over this profile.
inline double penalized_value(const LossProfile& profile, double gamma) {
    if (!std::isfinite(gamma) || gamma <= 0.0 || gamma >= 1.0)
        throw invalid_parameter("gamma must lie in (0, 1)");
    return utilitarian_value(profile) +
           (1.0 - gamma) / gamma * rawlsian_value(profile);
}

}  // namespace tilt
