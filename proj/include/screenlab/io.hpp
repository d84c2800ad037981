#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "screenlab/model.hpp"
#include "screenlab/population.hpp"

namespace screenlab {

// 17 significant digits: the shortest format guaranteed to round-trip a
// double through text exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// order-independent fingerprint of the primitive numbers, for manifests
inline std::uint64_t fingerprint(const Primitives& prim) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&h](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int k = 0; k < 8; ++k) {
            h ^= (bits >> (8 * k)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& c : prim.cells) {
        mix(c.wealth);
        mix(c.th_lo); mix(c.th_hi); mix(c.a_lo); mix(c.a_hi);
        for (const auto& row : c.f)
            for (double v : row) mix(v);
        for (double v : c.damage.x) mix(v);
        for (double v : c.damage.F) mix(v);
    }
    return h;
}

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    int scenario_case = 1;
    std::string menu_kind, damage_obs;
    std::uint64_t primitive_fingerprint = 0;
    double z_lo = 0.0, z_hi = 0.0;
    std::size_t z_nodes = 1;
};

inline void write_dataset(const std::vector<ObservationRecord>& recs,
                          const std::string& csv_path, const DatasetManifest& man) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
    out << "id,x_cell,z,chi,t,dd,j_star,damages\n";
    for (const auto& r : recs) {
        out << r.id << ',' << r.x_cell << ',' << fmt_double(r.z) << ',' << r.chi << ','
            << fmt_double(r.t) << ',' << fmt_double(r.dd) << ',' << r.j_star << ',';
        for (std::size_t k = 0; k < r.damages.size(); ++k) {
            if (k) out << ';';
            out << fmt_double(r.damages[k]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + csv_path);

    nlohmann::json j;
    j["seed"] = man.seed;
    j["n"] = man.n;
    j["scenario_case"] = man.scenario_case;
    j["menu_kind"] = man.menu_kind;
    j["damage_obs"] = man.damage_obs;
    j["primitive_fingerprint"] = man.primitive_fingerprint;
    j["z"] = {{"lo", man.z_lo}, {"hi", man.z_hi}, {"nodes", man.z_nodes}};
    std::ofstream mout(csv_path + ".manifest.json");
    if (!mout) throw std::runtime_error("cannot write manifest for " + csv_path);
    mout << j.dump(2) << '\n';
}

inline std::vector<ObservationRecord> read_dataset(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,x_cell,z,chi", 0) != 0)
        throw std::runtime_error("unexpected dataset header in " + csv_path);
    std::vector<ObservationRecord> recs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string fld;
        ObservationRecord r;
        std::getline(ss, fld, ','); r.id = std::stoull(fld);
        std::getline(ss, fld, ','); r.x_cell = std::stoi(fld);
        std::getline(ss, fld, ','); r.z = std::stod(fld);
        std::getline(ss, fld, ','); r.chi = std::stoi(fld);
        std::getline(ss, fld, ','); r.t = std::stod(fld);
        std::getline(ss, fld, ','); r.dd = std::stod(fld);
        std::getline(ss, fld, ','); r.j_star = std::stoi(fld);
        if (std::getline(ss, fld)) {
            std::stringstream ds(fld);
            std::string tok;
            while (std::getline(ds, tok, ';'))
                if (!tok.empty()) r.damages.push_back(std::stod(tok));
        }
        recs.push_back(std::move(r));
    }
    return recs;
}

inline DatasetManifest read_manifest(const std::string& csv_path) {
    std::ifstream in(csv_path + ".manifest.json");
    if (!in) throw std::runtime_error("cannot open manifest for " + csv_path);
    nlohmann::json j;
    in >> j;
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::size_t>();
    m.scenario_case = j.at("scenario_case").get<int>();
    m.menu_kind = j.at("menu_kind").get<std::string>();
    m.damage_obs = j.at("damage_obs").get<std::string>();
    m.primitive_fingerprint = j.at("primitive_fingerprint").get<std::uint64_t>();
    m.z_lo = j.at("z").at("lo").get<double>();
    m.z_hi = j.at("z").at("hi").get<double>();
    m.z_nodes = j.at("z").at("nodes").get<std::size_t>();
    return m;
}

}  // namespace screenlab
