#include "cubitopo/prior.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cubitopo {

using nlohmann::json;

BettiPrior::BettiPrior(int ndim, std::vector<std::string> class_names,
                       std::map<ClassSubset, std::vector<int>> entries)
    : ndim_(ndim), class_names_(std::move(class_names)) {
    if (ndim_ != 2 && ndim_ != 3) throw PriorError("prior dims must be 2 or 3");
    if (class_names_.size() < 2) throw PriorError("prior needs at least 2 classes (background first)");
    std::set<std::string> seen;
    for (const auto& n : class_names_)
        if (!seen.insert(n).second) throw PriorError("duplicate class name '" + n + "'");
    for (auto& [subset, betti] : entries) {
        ClassSubset s = subset;
        std::sort(s.begin(), s.end());
        if (s.empty()) throw PriorError("empty class subset in prior");
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw PriorError("repeated class in prior subset");
        for (int c : s) {
            if (c == 1) throw PriorError("prior subset references the background class");
            if (c < 1 || c > num_classes())
                throw PriorError("prior subset references class " + std::to_string(c) +
                                 " outside [2, " + std::to_string(num_classes()) + "]");
        }
        if (static_cast<int>(betti.size()) != ndim_)
            throw PriorError("Betti vector for subset has length " + std::to_string(betti.size()) +
                             ", expected " + std::to_string(ndim_));
        for (int b : betti)
            if (b < 0) throw PriorError("negative Betti number in prior");
        entries_[s] = betti;
    }
}

const std::vector<int>* BettiPrior::find(std::span<const int> subset) const {
    ClassSubset s(subset.begin(), subset.end());
    std::sort(s.begin(), s.end());
    auto it = entries_.find(s);
    return it == entries_.end() ? nullptr : &it->second;
}

int BettiPrior::class_index(std::string_view name) const {
    for (std::size_t i = 0; i < class_names_.size(); ++i)
        if (class_names_[i] == name) return static_cast<int>(i) + 1;
    return 0;
}

std::vector<ClassSubset> BettiPrior::loss_subsets() const {
    std::vector<ClassSubset> out;
    for (const auto& [s, b] : entries_)
        if (s.size() <= 2) out.push_back(s);
    return out;
}

std::vector<ClassSubset> BettiPrior::evaluation_subsets() const {
    std::vector<ClassSubset> out;
    for (const auto& [s, b] : entries_) out.push_back(s);
    return out;
}

BettiPrior BettiPrior::singletons_only() const {
    std::map<ClassSubset, std::vector<int>> kept;
    for (const auto& [s, b] : entries_)
        if (s.size() == 1) kept[s] = b;
    return BettiPrior(ndim_, class_names_, std::move(kept));
}

BettiPrior BettiPrior::without_triples() const {
    std::map<ClassSubset, std::vector<int>> kept;
    for (const auto& [s, b] : entries_)
        if (s.size() <= 2) kept[s] = b;
    return BettiPrior(ndim_, class_names_, std::move(kept));
}

std::string BettiPrior::subset_key(std::span<const int> subset) const {
    ClassSubset s(subset.begin(), subset.end());
    std::sort(s.begin(), s.end());
    std::string key;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) key += '|';
        key += class_names_.at(static_cast<std::size_t>(s[i] - 1));
    }
    return key;
}

BettiPrior prior_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw PriorError(std::string("prior is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw PriorError("prior must be a JSON object");
    if (!doc.contains("dims") || !doc["dims"].is_number_integer())
        throw PriorError("prior key 'dims' missing or not an integer");
    if (!doc.contains("classes") || !doc["classes"].is_array())
        throw PriorError("prior key 'classes' missing or not an array");
    if (!doc.contains("betti") || !doc["betti"].is_object())
        throw PriorError("prior key 'betti' missing or not an object");

    const int ndim = doc["dims"].get<int>();
    std::vector<std::string> names;
    for (const auto& c : doc["classes"]) {
        if (!c.is_string()) throw PriorError("prior key 'classes' must hold strings");
        names.push_back(c.get<std::string>());
    }
    auto index_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i) + 1;
        return 0;
    };

    std::map<ClassSubset, std::vector<int>> entries;
    for (const auto& [key, value] : doc["betti"].items()) {
        ClassSubset subset;
        std::stringstream ss(key);
        std::string part;
        while (std::getline(ss, part, '|')) {
            const int idx = index_of(part);
            if (idx == 0) throw PriorError("prior key 'betti." + key + "': unknown class '" + part + "'");
            if (idx == 1) throw PriorError("prior key 'betti." + key + "': subset references the background class");
            subset.push_back(idx);
        }
        if (subset.empty()) throw PriorError("prior key 'betti." + key + "': empty subset");
        if (!value.is_array()) throw PriorError("prior key 'betti." + key + "': expected an array");
        std::vector<int> betti;
        for (const auto& b : value) {
            if (!b.is_number_integer()) throw PriorError("prior key 'betti." + key + "': non-integer entry");
            betti.push_back(b.get<int>());
        }
        if (static_cast<int>(betti.size()) != ndim)
            throw PriorError("prior key 'betti." + key + "': Betti vector has length " +
                             std::to_string(betti.size()) + ", expected " + std::to_string(ndim));
        std::sort(subset.begin(), subset.end());
        if (entries.count(subset)) throw PriorError("prior key 'betti." + key + "': duplicate subset");
        entries[subset] = std::move(betti);
    }
    try {
        return BettiPrior(ndim, std::move(names), std::move(entries));
    } catch (const PriorError& e) {
        throw PriorError(std::string("prior: ") + e.what());
    }
}

std::string prior_to_json(const BettiPrior& prior) {
    // Keep subset order (singletons, pairs, triples), not the JSON key order.
    std::vector<std::pair<std::string, std::vector<int>>> ordered;
    for (std::size_t size = 1; size <= static_cast<std::size_t>(prior.num_classes()); ++size)
        for (const auto& [s, b] : prior.entries())
            if (s.size() == size) ordered.emplace_back(prior.subset_key(s), b);
    std::string out = "{\n  \"dims\": " + std::to_string(prior.ndim()) + ",\n  \"classes\": " +
                      json(prior.class_names()).dump() + ",\n  \"betti\": {";
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        out += i ? ",\n    " : "\n    ";
        out += json(ordered[i].first).dump() + ": " + json(ordered[i].second).dump();
    }
    out += "\n  }\n}\n";
    return out;
}

BettiPrior shortaxis_prior() {
    // Classes: 1 bg, 2 rv, 3 my, 4 lv.
    return BettiPrior(2, {"bg", "rv", "my", "lv"},
                      {
                          {{2}, {1, 0}},
                          {{3}, {1, 1}},
                          {{4}, {1, 0}},
                          {{2, 3}, {1, 1}},
                          {{2, 4}, {2, 0}},
                          {{3, 4}, {1, 0}},
                      });
}

BettiPrior wholeheart_prior(bool with_triples) {
    // Classes: 1 bg, 2 my, 3 la, 4 lv, 5 ra, 6 rv.
    enum { my = 2, la = 3, lv = 4, ra = 5, rv = 6 };
    std::map<ClassSubset, std::vector<int>> e{
        {{my}, {1, 0, 0}},      {{la}, {1, 0, 0}},      {{lv}, {1, 0, 0}},      {{ra}, {1, 0, 0}},
        {{rv}, {1, 0, 0}},      {{my, la}, {1, 0, 0}},  {{my, lv}, {1, 0, 0}},  {{my, ra}, {1, 0, 0}},
        {{my, rv}, {1, 0, 0}},  {{la, lv}, {1, 0, 0}},  {{la, ra}, {2, 0, 0}},  {{la, rv}, {2, 0, 0}},
        {{lv, ra}, {2, 0, 0}},  {{lv, rv}, {2, 0, 0}},  {{ra, rv}, {1, 0, 0}},
    };
    if (with_triples) {
        e[{my, la, lv}] = {1, 0, 0};
        e[{my, la, ra}] = {1, 0, 0};
        e[{my, la, rv}] = {1, 0, 0};
        e[{my, lv, ra}] = {1, 0, 0};
        e[{my, lv, rv}] = {1, 0, 0};
        e[{my, ra, rv}] = {1, 0, 0};
        e[{la, lv, ra}] = {2, 0, 0};
        e[{la, lv, rv}] = {2, 0, 0};
        e[{la, ra, rv}] = {2, 0, 0};
        e[{lv, ra, rv}] = {2, 0, 0};
    }
    return BettiPrior(3, {"bg", "my", "la", "lv", "ra", "rv"}, std::move(e));
}

}  // namespace cubitopo
