#pragma once

// Published experiment tables used as test inputs and expected values.

#include <array>
#include <cstdint>
#include <string>

#include "cosmicbell/core.hpp"

#ifndef COSMICBELL_DATA_DIR
#define COSMICBELL_DATA_DIR "data"
#endif

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(COSMICBELL_DATA_DIR) + "/" + name; }

// Published setting-pair counts, rows per setting (x, y) in the order 00, 10, 01, 11; columns (a, b) in the order 00, 10, 01, 11.
inline cosmicbell::CountsTable table2() {
    static constexpr std::uint64_t rows[4][4] = {{7810453, 18769, 18220, 27895},
                                                 {7732172, 61175, 11156, 34477},
                                                 {7773073, 12491, 62832, 34234},
                                                 {7662717, 92254, 93824, 2966}};
    static constexpr int xs[4] = {0, 1, 0, 1}, ys[4] = {0, 0, 1, 1};
    static constexpr int as[4] = {0, 1, 0, 1}, bs[4] = {0, 0, 1, 1};
    cosmicbell::CountsTable t;
    for (int s = 0; s < 4; ++s)
        for (int k = 0; k < 4; ++k) t(as[k], bs[k], xs[s], ys[s]) = rows[s][k];
    return t;
}

inline constexpr std::uint64_t kTable2Total = 31448708;
inline constexpr double kJ = -1.405e-4;
inline constexpr std::array<double, 4> kZPValues{0.95347, 0.17608, 0.37180, 0.81156};

struct MonitorRow {
    double r_a, snr_a, r_b, snr_b;
    double eps_a, eps_b;
};
inline constexpr std::array<MonitorRow, 4> kMonitors{{{1.0078, 491.6, 1.0012, 94.7, 0.00295, 0.00552},
                                                      {1.0053, 584.6, 0.9989, 111.6, 0.00217, 0.00471},
                                                      {1.0059, 147.4, 0.9985, 78.5, 0.00483, 0.00666},
                                                      {1.0009, 125.2, 0.9987, 132.6, 0.00419, 0.00407}}};

struct ConsistencyRow {
    std::uint64_t a0, a1, b0, b1;
    double log10_tail_a, log10_tail_b;  // log10(1 - c) as published
};
inline constexpr std::array<ConsistencyRow, 4> kConsistency{{
    {1486191, 1478591, 1481833, 1482949, -7.19723, -73.0},
    {4072171, 4048210, 4056701, 4063680, -3.43180, -129.0},
    {5382580, 5351255, 5364939, 5368896, -105.94310, -390.0},
    {4817025, 4812685, 4810844, 4818866, -131.15243, -111.0},
}};
inline constexpr double kCA2 = 0.99963;

struct Run {
    int hip_a, hip_b;
    const char* start;
    const char* end;
    double alpha;
    double tau, sigma_tau;
    double gamma_a_start, gamma_a_end, gamma_b_start, gamma_b_end;
    // azimuth, altitude at start and end for Alice's star (site A) and Bob's star (site B)
    double az_a0, alt_a0, az_a1, alt_a1, az_b0, alt_b0, az_b1, alt_b1;
};
inline constexpr std::array<Run, 4> kRuns{{
    {21421, 69673, "2018-03-23T13:34:00Z", "2018-03-23T13:41:00Z", 130.4, 98.99, 0.78, 139, 143, 62, 56, 278, 20, 279, 18,
     83, 28, 84, 29},
    {27989, 76267, "2018-03-23T14:14:00Z", "2018-03-23T14:48:00Z", 131.8, 561.81, 62.93, 149, 170, 76, 47, 264, 23, 269,
     16, 72, 23, 75, 30},
    {37279, 80816, "2018-03-23T15:13:00Z", "2018-03-23T15:58:00Z", 126.5, 148.41, 3.44, 101, 154, 86, 46, 255, 32, 262,
     22, 77, 22, 82, 31},
    {43813, 86032, "2018-03-23T16:26:00Z", "2018-03-23T17:06:00Z", 126.9, 207.91, 1.67, 97, 145, 98, 53, 256, 33, 262,
     24, 87, 19, 92, 28},
}};

}  // namespace fixtures
