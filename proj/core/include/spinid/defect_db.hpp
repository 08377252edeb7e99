#pragma once

#include <array>
#include <string>
#include <vector>

namespace spinid {

/// One row of the calculated-defect database: principal hyperfine values and
/// directions for a candidate structure.
struct DefectRecord {
    std::string type;      // e.g. "H-interstitial"
    int n_vacancy = 0;
    std::string label;     // unique id, e.g. "MIT1"
    std::string structure; // defect column, e.g. "V-CH-V"
    std::array<double, 3> a = {0.0, 0.0, 0.0};         // A1..A3, MHz
    std::array<std::array<double, 2>, 3> dirs{};       // (theta, phi) per A_i, degrees
    std::string functional; // e.g. "HSE06"

    void validate() const;
};

struct Isotope {
    std::string name;   // e.g. "1H"
    double gamma = 0.0; // MHz/T, signed
};

/// CSV columns: type,n_vacancy,label,structure,a1_mhz,theta1_deg,phi1_deg,
/// a2_mhz,theta2_deg,phi2_deg,a3_mhz,theta3_deg,phi3_deg,functional.
std::vector<DefectRecord> parse_defect_db_csv(const std::string& text);
std::vector<DefectRecord> load_defect_db(const std::string& path);
std::string write_defect_db_csv(const std::vector<DefectRecord>& db);

/// CSV columns: name,gamma_mhz_per_t.
std::vector<Isotope> parse_isotope_csv(const std::string& text);
std::vector<Isotope> load_isotopes(const std::string& path);

/// Isotope magnitudes shipped by default: 1H, 19F, 13C, 14N, 15N, 29Si, 31P.
std::vector<Isotope> builtin_isotopes();

} // namespace spinid
