#include "spinid/defect_db.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinid/errors.hpp"

namespace spinid {

void DefectRecord::validate() const {
    for (double v : a) {
        if (!std::isfinite(v)) {
            throw ValidationError("defect record '" + label + "': non-finite hyperfine value");
        }
    }
    for (const auto& d : dirs) {
        if (!std::isfinite(d[0]) || !std::isfinite(d[1])) {
            throw ValidationError("defect record '" + label + "': non-finite direction");
        }
    }
    if (label.empty()) {
        throw ValidationError("defect record with empty label");
    }
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) {
        cells.push_back(cell);
    }
    return cells;
}

double parse_number(const std::string& cell, size_t row, const char* what) {
    try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("defect db row " + std::to_string(row) + ": cannot parse " +
                              what + " from '" + cell + "'");
    }
}

} // namespace

std::vector<DefectRecord> parse_defect_db_csv(const std::string& text) {
    std::vector<DefectRecord> out;
    std::istringstream is(text);
    std::string line;
    size_t row = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("type,", 0) != 0) {
                throw ValidationError("defect db row " + std::to_string(row) +
                                      ": expected the column header");
            }
            header_seen = true;
            continue;
        }
        const std::vector<std::string> cells = split_csv_row(line);
        if (cells.size() != 14) {
            throw ValidationError("defect db row " + std::to_string(row) +
                                  ": expected 14 columns, got " + std::to_string(cells.size()));
        }
        DefectRecord r;
        r.type = cells[0];
        r.n_vacancy = static_cast<int>(parse_number(cells[1], row, "n_vacancy"));
        r.label = cells[2];
        r.structure = cells[3];
        for (int i = 0; i < 3; ++i) {
            r.a[i] = parse_number(cells[4 + 3 * i], row, "a");
            r.dirs[i][0] = parse_number(cells[5 + 3 * i], row, "theta");
            r.dirs[i][1] = parse_number(cells[6 + 3 * i], row, "phi");
        }
        r.functional = cells[13];
        r.validate();
        out.push_back(std::move(r));
    }
    if (out.empty()) {
        throw ValidationError("defect db: no records");
    }
    return out;
}

std::vector<DefectRecord> load_defect_db(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open defect db: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_defect_db_csv(ss.str());
}

std::string write_defect_db_csv(const std::vector<DefectRecord>& db) {
    std::ostringstream os;
    os << "type,n_vacancy,label,structure,a1_mhz,theta1_deg,phi1_deg,a2_mhz,theta2_deg,"
          "phi2_deg,a3_mhz,theta3_deg,phi3_deg,functional\n";
    char buf[64];
    for (const DefectRecord& r : db) {
        os << r.type << ',' << r.n_vacancy << ',' << r.label << ',' << r.structure;
        for (int i = 0; i < 3; ++i) {
            std::snprintf(buf, sizeof(buf), ",%.6g,%.6g,%.6g", r.a[i], r.dirs[i][0],
                          r.dirs[i][1]);
            os << buf;
        }
        os << ',' << r.functional << '\n';
    }
    return os.str();
}

std::vector<Isotope> parse_isotope_csv(const std::string& text) {
    std::vector<Isotope> out;
    std::istringstream is(text);
    std::string line;
    size_t row = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("name,", 0) != 0) {
                throw ValidationError("isotope csv row " + std::to_string(row) +
                                      ": expected header 'name,gamma_mhz_per_t'");
            }
            header_seen = true;
            continue;
        }
        const std::vector<std::string> cells = split_csv_row(line);
        if (cells.size() != 2) {
            throw ValidationError("isotope csv row " + std::to_string(row) +
                                  ": expected 2 columns");
        }
        out.push_back({cells[0], parse_number(cells[1], row, "gamma")});
    }
    if (out.empty()) {
        throw ValidationError("isotope csv: no records");
    }
    return out;
}

std::vector<Isotope> load_isotopes(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open isotope table: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_isotope_csv(ss.str());
}

std::vector<Isotope> builtin_isotopes() {
    return {
        {"1H", 42.577}, {"19F", 40.078},  {"13C", 10.7084}, {"14N", 3.0777},
        {"15N", -4.316}, {"29Si", -8.465}, {"31P", 17.235},
    };
}

} // namespace spinid
