#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cubitopo {

class PriorError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Class subset as ascending 1-based class indices (foreground only, so >= 2).
using ClassSubset = std::vector<int>;

/// Target Betti vectors for foreground classes and their unions.
///
/// Singletons and pairs drive the loss; larger subsets (triples) are only
/// used for evaluation.
class BettiPrior {
public:
    BettiPrior() = default;
    BettiPrior(int ndim, std::vector<std::string> class_names,
               std::map<ClassSubset, std::vector<int>> entries);

    int ndim() const { return ndim_; }
    int num_classes() const { return static_cast<int>(class_names_.size()); }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const std::map<ClassSubset, std::vector<int>>& entries() const { return entries_; }

    /// Betti vector for a subset (any order), or nullptr.
    const std::vector<int>* find(std::span<const int> subset) const;
    int class_index(std::string_view name) const;

    /// Entries with one or two classes, in ascending subset order.
    std::vector<ClassSubset> loss_subsets() const;
    /// Every entry, in ascending subset order.
    std::vector<ClassSubset> evaluation_subsets() const;

    /// The same prior restricted to single-class entries.
    BettiPrior singletons_only() const;
    /// The same prior without entries of three or more classes.
    BettiPrior without_triples() const;

    /// Class names joined by '|' in class order, e.g. "rv|my".
    std::string subset_key(std::span<const int> subset) const;

    bool operator==(const BettiPrior&) const = default;

private:
    int ndim_ = 0;
    std::vector<std::string> class_names_;
    std::map<ClassSubset, std::vector<int>> entries_;
};

/// Parses `{"dims": N, "classes": [...], "betti": {"rv": [1,0], "rv|my": [1,1]}}`.
/// Throws PriorError naming the offending key.
BettiPrior prior_from_json(std::string_view text);
std::string prior_to_json(const BettiPrior& prior);

/// 2D short-axis prior over classes bg, rv, my, lv.
BettiPrior shortaxis_prior();
/// 3D whole-heart prior over classes bg, my, la, lv, ra, rv; pairs always,
/// triples when `with_triples`.
BettiPrior wholeheart_prior(bool with_triples = true);

}  // namespace cubitopo
