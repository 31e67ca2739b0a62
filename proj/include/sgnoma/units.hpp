#pragma once

#include <cmath>

namespace sgnoma {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

inline double watt_to_dbm(double w) { return 10.0 * std::log10(w * 1e3); }

inline constexpr double kLn2 = 0.6931471805599453;

// 4G physical resource block width; 5G-NR subchannels scale this by 2^numerology.
inline constexpr double kBaseScBandwidthHz = 180e3;

}  // namespace sgnoma
