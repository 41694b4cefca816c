#pragma once

#include "gendice/common.hpp"
#include "gendice/markov.hpp"

#include <array>
#include <vector>

namespace gendice {

struct TaxiConfig {
    std::size_t grid = 5;
    double appear_prob = 0.05;  ///< per-step appearance chance at an empty corner
    double dropoff_reward = 1.0;
    double gamma = 0.99;
};

/// Taxi world on a grid x grid board. Passengers wait at the four corners; a passenger picked
/// up at corner k must be dropped at the diagonally opposite corner 3 - k.
///
/// state = (cell * 16 + waiting_mask) * 5 + status, status 0 = empty, k + 1 = carrying
/// the passenger from corner k. Actions: 0 north, 1 south, 2 east, 3 west, 4 pickup/dropoff.
class Taxi {
public:
    static constexpr std::size_t kActions = 5;
    static constexpr std::size_t kStatuses = 5;
    static constexpr std::size_t kMasks = 16;

    explicit Taxi(TaxiConfig cfg = {}) : cfg_(cfg) {
        detail::require(cfg_.grid >= 2, "taxi grid must be at least 2");
        detail::require(cfg_.appear_prob >= 0.0 && cfg_.appear_prob <= 1.0, "appear_prob must lie in [0, 1]");
        const auto g = cfg_.grid;
        corners_ = {0, g - 1, (g - 1) * g, g * g - 1};
    }

    std::size_t n_cells() const { return cfg_.grid * cfg_.grid; }
    std::size_t n_states() const { return n_cells() * kMasks * kStatuses; }

    std::size_t encode(std::size_t cell, std::size_t mask, std::size_t status) const {
        return (cell * kMasks + mask) * kStatuses + status;
    }
    struct Decoded {
        std::size_t cell, mask, status;
    };
    Decoded decode(std::size_t s) const {
        return {s / (kMasks * kStatuses), (s / kStatuses) % kMasks, s % kStatuses};
    }
    std::size_t corner(std::size_t k) const { return corners_[k]; }

    TabularMDP mdp() const {
        const auto nS = n_states();
        std::vector<Triplet> trips;
        std::vector<double> reward(nS * kActions, 0.0);
        for (std::size_t s = 0; s < nS; ++s) {
            const auto [cell, mask, status] = decode(s);
            for (std::size_t a = 0; a < kActions; ++a) {
                std::size_t ncell = cell, nmask = mask, nstatus = status;
                if (a < 4) {
                    ncell = move(cell, a);
                } else if (status == 0) {
                    for (std::size_t k = 0; k < 4; ++k)
                        if (cell == corners_[k] && (mask >> k & 1u)) {
                            nstatus = k + 1;
                            nmask = mask & ~(1u << k);
                        }
                } else if (cell == corners_[3 - (status - 1)]) {
                    nstatus = 0;
                    reward[s * kActions + a] = cfg_.dropoff_reward;
                }
                // Independent arrivals at every empty corner.
                const std::size_t empty = ~nmask & 0xFu;
                for (std::size_t arrive = 0; arrive < kMasks; ++arrive) {
                    if (arrive & ~empty) continue;
                    double p = 1.0;
                    for (std::size_t k = 0; k < 4; ++k)
                        if (empty >> k & 1u) p *= (arrive >> k & 1u) ? cfg_.appear_prob : 1.0 - cfg_.appear_prob;
                    if (p > 0.0)
                        trips.emplace_back(static_cast<int>(s * kActions + a),
                                           static_cast<int>(encode(ncell, nmask | arrive, nstatus)), p);
                }
            }
        }
        SparseRowMat T(static_cast<Eigen::Index>(nS * kActions), static_cast<Eigen::Index>(nS));
        T.setFromTriplets(trips.begin(), trips.end());
        std::vector<double> mu0(nS, 0.0);
        for (std::size_t c = 0; c < n_cells(); ++c) mu0[encode(c, 0, 0)] = 1.0 / static_cast<double>(n_cells());
        return TabularMDP(nS, kActions, std::move(T), std::move(reward), Distribution(std::move(mu0)), cfg_.gamma);
    }

private:
    std::size_t move(std::size_t cell, std::size_t a) const {
        const auto g = cfg_.grid;
        std::size_t r = cell / g, c = cell % g;
        switch (a) {
            case 0: r = r > 0 ? r - 1 : r; break;
            case 1: r = r + 1 < g ? r + 1 : r; break;
            case 2: c = c + 1 < g ? c + 1 : c; break;
            default: c = c > 0 ? c - 1 : c; break;
        }
        return r * g + c;
    }

    TaxiConfig cfg_;
    std::array<std::size_t, 4> corners_{};
};

inline TabularMDP taxi_mdp(std::size_t grid = 5) {
    TaxiConfig cfg;
    cfg.grid = grid;
    return Taxi(cfg).mdp();
}

}  // namespace gendice
