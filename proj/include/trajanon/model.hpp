#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace trajanon {

using UserId = std::string;
using Coord = std::int64_t;
using Cost = std::int64_t;

/// One spatiotemporal sample: user was in grid cell (x, y) during time slot t.
/// Slots and cells are non-negative integers; unit conversion (minutes,
/// meters) happens only at the metrics/reporting layer.
struct Sample {
    UserId user;
    Coord t = 0;
    Coord x = 0;
    Coord y = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

// Pool ordering: time first, then owner and space to make every downstream
// scan deterministic under equal timestamps.
inline bool pool_less(const Sample& a, const Sample& b) {
    return std::tie(a.t, a.user, a.x, a.y) < std::tie(b.t, b.user, b.x, b.y);
}

inline void validate_sample(const Sample& s) {
    if (s.user.empty()) throw std::invalid_argument("sample with empty user id");
    if (s.t < 0 || s.x < 0 || s.y < 0)
        throw std::invalid_argument("sample with negative coordinate");
}

/// A single user's ordered sequence of samples. Within one time slot the
/// order falls back to (x, y); exact duplicate (t, x, y) triples are invalid.
class Trajectory {
public:
    Trajectory() = default;

    Trajectory(UserId user, std::vector<Sample> samples)
        : user_(std::move(user)), samples_(std::move(samples)) {
        for (auto& s : samples_) {
            validate_sample(s);
            if (s.user != user_)
                throw std::invalid_argument("trajectory contains foreign sample (user " +
                                            s.user + " in trajectory of " + user_ + ")");
        }
        std::sort(samples_.begin(), samples_.end(), [](const Sample& a, const Sample& b) {
            return std::tie(a.t, a.x, a.y) < std::tie(b.t, b.x, b.y);
        });
        for (std::size_t i = 1; i < samples_.size(); ++i) {
            const Sample& a = samples_[i - 1];
            const Sample& b = samples_[i];
            if (a.t == b.t && a.x == b.x && a.y == b.y)
                throw std::invalid_argument("duplicate (t,x,y) sample in trajectory of " + user_);
        }
    }

    const UserId& user() const { return user_; }
    const std::vector<Sample>& samples() const { return samples_; }
    bool empty() const { return samples_.empty(); }
    std::size_t size() const { return samples_.size(); }

private:
    UserId user_;
    std::vector<Sample> samples_;
};

/// Axis-aligned bounds of a sample set in (t, x, y).
struct Bounds {
    Coord t_min = 0, t_max = 0;
    Coord x_min = 0, x_max = 0;
    Coord y_min = 0, y_max = 0;

    friend bool operator==(const Bounds&, const Bounds&) = default;

    void expand(const Sample& s) {
        t_min = std::min(t_min, s.t);
        t_max = std::max(t_max, s.t);
        x_min = std::min(x_min, s.x);
        x_max = std::max(x_max, s.x);
        y_min = std::min(y_min, s.y);
        y_max = std::max(y_max, s.y);
    }

    static Bounds of(const Sample& s) { return {s.t, s.t, s.x, s.x, s.y, s.y}; }

    Coord span_t() const { return t_max - t_min + 1; }
    Coord span_x() const { return x_max - x_min + 1; }
    Coord span_y() const { return y_max - y_min + 1; }

    bool contains(const Sample& s) const {
        return t_min <= s.t && s.t <= t_max && x_min <= s.x && s.x <= x_max &&
               y_min <= s.y && s.y <= y_max;
    }
};

/// A generalized sample: a non-empty set of raw samples published as one
/// spatiotemporal box. Cost components are exact integers on spans.
class GeneralizedSample {
public:
    explicit GeneralizedSample(std::vector<Sample> members) : members_(std::move(members)) {
        if (members_.empty()) throw std::invalid_argument("empty generalized sample");
        std::sort(members_.begin(), members_.end(), pool_less);
        members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
        bounds_ = Bounds::of(members_.front());
        for (const Sample& s : members_) bounds_.expand(s);
    }

    const std::vector<Sample>& members() const { return members_; }
    const Bounds& bounds() const { return bounds_; }

    Cost temporal_cost() const { return bounds_.span_t(); }
    Cost spatial_cost() const { return bounds_.span_x() + bounds_.span_y(); }
    Cost cost() const { return temporal_cost() * spatial_cost(); }

    bool contains_user(const UserId& u) const {
        return std::any_of(members_.begin(), members_.end(),
                           [&](const Sample& s) { return s.user == u; });
    }

private:
    std::vector<Sample> members_;
    Bounds bounds_;
};

inline Cost sample_cost(const GeneralizedSample& g) { return g.cost(); }

/// Strict time coherence between consecutive cells: every slot of the
/// earlier cell precedes every slot of the later one.
inline bool time_coherent(const GeneralizedSample& a, const GeneralizedSample& b) {
    return a.bounds().t_max < b.bounds().t_min;
}

inline bool is_time_coherent(const std::vector<GeneralizedSample>& cells) {
    for (std::size_t i = 1; i < cells.size(); ++i)
        if (!time_coherent(cells[i - 1], cells[i])) return false;
    return true;
}

/// Total cost of a coherent cell sequence (sum of per-cell costs).
inline Cost trajectory_cost(const std::vector<GeneralizedSample>& cells) {
    if (!is_time_coherent(cells))
        throw std::domain_error("trajectory_cost on time-incoherent cell sequence");
    Cost total = 0;
    for (const auto& g : cells) total += g.cost();
    return total;
}

// Epoch arithmetic. Epochs are 1-based; epoch m covers slots
// [(m-1)*epsilon, m*epsilon).
inline std::int64_t epoch_of(Coord t, Coord epsilon) { return t / epsilon + 1; }
inline Coord epoch_first_slot(std::int64_t m, Coord epsilon) { return (m - 1) * epsilon; }
inline Coord epoch_end_slot(std::int64_t m, Coord epsilon) { return m * epsilon; }

/// A published record: cells attributed to one owner. Every cell must hold
/// at least one of the owner's own raw samples.
struct GeneralizedTrajectory {
    UserId owner;
    std::vector<GeneralizedSample> cells;

    void validate() const {
        if (!is_time_coherent(cells))
            throw std::domain_error("record of " + owner + " is not time-coherent");
        for (const auto& g : cells)
            if (!g.contains_user(owner))
                throw std::domain_error("record of " + owner + " has a cell without owner sample");
    }

    Cost cost() const { return trajectory_cost(cells); }
};

} // namespace trajanon
