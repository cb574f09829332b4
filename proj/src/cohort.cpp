#include "dass/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"

#include "dass/error.hpp"
#include "text_util.hpp"

namespace dass {

using detail::format_double;
using json = nlohmann::ordered_json;

std::string_view to_string(Laterality l) {
    switch (l) {
        case Laterality::ipsilateral: return "ipsilateral";
        case Laterality::contralateral: return "contralateral";
        case Laterality::midline: return "midline";
    }
    return "midline";
}

Laterality parse_laterality(std::string_view s) {
    if (s == "ipsilateral") return Laterality::ipsilateral;
    if (s == "contralateral") return Laterality::contralateral;
    if (s == "midline") return Laterality::midline;
    throw ValidationError("laterality", "unknown laterality '" + std::string(s) + "'");
}

FeatureKey FeatureKey::vx(int percent) {
    if (percent < 5 || percent > 95 || percent % 5 != 0)
        throw ValidationError("feature", "VX percent must be on the 5..95 grid, got " + std::to_string(percent));
    return FeatureKey(percent / 5 - 1);
}

FeatureKey FeatureKey::from_slot(int slot) {
    if (slot < 0 || slot >= kCount) throw ValidationError("feature", "feature slot out of range");
    return FeatureKey(slot);
}

FeatureKey FeatureKey::parse(std::string_view text) {
    if (text == "mean") return mean();
    if (text == "max") return max();
    if (text.size() >= 2 && (text[0] == 'V' || text[0] == 'v')) {
        if (auto v = detail::parse_int(text.substr(1))) {
            if (*v >= 5 && *v <= 95 && *v % 5 == 0) return vx(static_cast<int>(*v));
        }
    }
    throw ValidationError("feature", "unknown DVH feature '" + std::string(text) + "'");
}

std::array<FeatureKey, FeatureKey::kCount> FeatureKey::all() {
    return []<std::size_t... I>(std::index_sequence<I...>) {
        return std::array<FeatureKey, kCount>{FeatureKey(static_cast<int>(I))...};
    }(std::make_index_sequence<kCount>{});
}

std::string FeatureKey::str() const {
    if (is_vx()) return "V" + std::to_string(percent());
    return slot_ == kVxCount ? "mean" : "max";
}

namespace {

template <class Range>
std::optional<std::size_t> find_name(const Range& names, std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

}  // namespace

std::optional<std::size_t> Cohort::organ_index(std::string_view name) const {
    for (std::size_t i = 0; i < organs.size(); ++i)
        if (organs[i].name == name) return i;
    return std::nullopt;
}

std::optional<std::size_t> Cohort::symptom_index(std::string_view name) const { return find_name(symptoms, name); }

std::optional<std::size_t> Cohort::time_point_index(std::string_view name) const {
    return find_name(time_points, name);
}

std::optional<std::size_t> Cohort::confounder_index(std::string_view name) const {
    return find_name(confounders, name);
}

std::optional<std::size_t> Cohort::patient_index(std::string_view id) const {
    for (std::size_t i = 0; i < patients.size(); ++i)
        if (patients[i].id == id) return i;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Defaults

const std::vector<OrganId>& default_organ_list() {
    static const std::vector<OrganId> organs = [] {
        const char* midline[] = {"Brainstem",        "Spinal_Cord",         "Larynx",
                                 "Supraglottic_Larynx", "Glottic_Area",      "Esophagus",
                                 "Cricopharyngeal_Muscle", "SPC",            "MPC",
                                 "IPC",              "Tongue",              "Genioglossus_M",
                                 "Extended_Oral_Cavity", "Hard_Palate",      "Soft_Palate",
                                 "Upper_Lip",        "Lower_Lip",           "Mandible",
                                 "Hyoid_bone",       "Thyroid_cartilage",   "Cricoid_cartilage"};
        const char* paired[] = {"Parotid",          "Submandibular",     "Sternocleidomastoid_M",
                                "Masseter_M",       "Lateral_Pterygoid_M", "Medial_Pterygoid_M",
                                "Anterior_Digastric_M", "Posterior_Digastric_M", "Eyeball",
                                "Lens",             "Optic_Nerve",       "Cochlea"};
        std::vector<OrganId> out;
        for (const char* p : paired) {
            out.push_back({std::string(p) + "_L", Laterality::ipsilateral});
            out.push_back({std::string(p) + "_R", Laterality::contralateral});
        }
        for (const char* m : midline) out.push_back({m, Laterality::midline});
        return out;
    }();
    return organs;
}

Laterality default_laterality(std::string_view organ) {
    for (const auto& o : default_organ_list())
        if (o.name == organ) return o.laterality;
    return Laterality::midline;
}

const std::vector<std::string>& default_time_points() {
    static const std::vector<std::string> tps{"baseline", "wk1", "wk2", "wk3",      "wk4",
                                              "wk5",      "wk6", "wk7", "6wk_post", "6mo_post"};
    return tps;
}

const std::vector<std::string>& default_symptoms() {
    static const std::vector<std::string> items{
        "pain",     "fatigue",  "nausea",   "sleep",     "distress", "sob",      "memory",
        "appetite", "drowsy",   "drymouth", "sad",       "vomit",    "numb",     "activity",
        "mood",     "work",     "relations", "walking",  "enjoy",    "mucus",    "swallow",
        "choke",    "voice",    "skin",     "constipation", "taste", "mucositis", "teeth"};
    return items;
}

// ---------------------------------------------------------------------------
// VX reduction

double vx_from_dose_samples(std::span<const double> samples, int percent) {
    if (samples.empty()) throw ValidationError("samples", "dose sample list is empty");
    if (percent < 5 || percent > 95 || percent % 5 != 0)
        throw ValidationError("x", "percent must be one of 5,10,...,95, got " + std::to_string(percent));
    for (double s : samples)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("samples", "dose samples must be finite and >= 0");
    // rank r (1-based, descending) = ceil(percent * n / 100)
    const std::size_t n = samples.size();
    const std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
    std::vector<double> sorted(samples.begin(), samples.end());
    auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(sorted.begin(), nth, sorted.end(), std::greater<>());
    return *nth;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::string patient_field(const Cohort& c, std::size_t p, const std::string& what) {
    return "patient " + c.patients[p].id + " (#" + std::to_string(p) + ") " + what;
}

void check_name(const std::string& name, const std::string& kind) {
    if (name.empty()) throw ValidationError(kind, "empty name");
    if (name.find_first_of(",\"\n\r") != std::string::npos || name.find("__") != std::string::npos)
        throw ValidationError(kind, "name '" + name + "' contains a reserved character sequence");
}

void check_organ_values(const OrganDvh& d, const std::string& where) {
    for (int s = 0; s < FeatureKey::kCount; ++s) {
        const double v = d.values[static_cast<std::size_t>(s)];
        if (!std::isfinite(v))
            throw ValidationError(where + "__" + FeatureKey::from_slot(s).str(), "dose is not a finite number");
        if (v < 0.0)
            throw ValidationError(where + "__" + FeatureKey::from_slot(s).str(),
                                  "negative dose " + format_double(v));
    }
    for (int x = 10; x <= 95; x += 5) {
        const double prev = d[FeatureKey::vx(x - 5)];
        const double cur = d[FeatureKey::vx(x)];
        if (cur > prev)
            throw ValidationError(where + "__V" + std::to_string(x),
                                  "cumulative DVH monotonicity violated: V" + std::to_string(x) + " = " +
                                      format_double(cur) + " > V" + std::to_string(x - 5) + " = " +
                                      format_double(prev));
    }
}

}  // namespace

void validate_cohort(const Cohort& c, const LoadOptions& options) {
    if (c.patients.empty()) throw ValidationError("patients", "cohort is empty");
    if (c.organs.empty()) throw ValidationError("organs", "organ list is empty");
    {
        std::set<std::string> seen;
        for (const auto& o : c.organs) {
            check_name(o.name, "organs");
            if (!seen.insert(o.name).second) throw ValidationError("organs", "duplicate organ '" + o.name + "'");
        }
    }
    auto unique_names = [](const std::vector<std::string>& names, const std::string& kind) {
        std::set<std::string> seen;
        for (const auto& n : names) {
            check_name(n, kind);
            if (!seen.insert(n).second) throw ValidationError(kind, "duplicate entry '" + n + "'");
        }
    };
    unique_names(c.time_points, "time_points");
    unique_names(c.symptoms, "symptoms");
    unique_names(c.confounders, "confounders");
    if (!c.symptoms.empty() && c.time_points.empty())
        throw ValidationError("time_points", "symptoms given without time points");

    std::unordered_set<std::string> ids;
    for (std::size_t p = 0; p < c.patients.size(); ++p) {
        const Patient& pt = c.patients[p];
        if (pt.id.empty()) throw ValidationError("patient #" + std::to_string(p), "empty patient id");
        if (pt.id.find_first_of(",\"\n\r") != std::string::npos)
            throw ValidationError("patient #" + std::to_string(p), "patient id contains a reserved character");
        if (!ids.insert(pt.id).second) throw ValidationError("id", "duplicate patient id '" + pt.id + "'");
        if (pt.dvh.size() != c.organs.size())
            throw ValidationError(patient_field(c, p, "dvh"), "organ count does not match the organ list");
        for (std::size_t o = 0; o < c.organs.size(); ++o) {
            const std::string where = patient_field(c, p, c.organs[o].name);
            if (pt.dvh[o].missing) {
                if (!options.allow_missing)
                    throw ValidationError(where, "organ data missing (load with allow_missing to accept)");
                continue;
            }
            check_organ_values(pt.dvh[o], where);
        }
        if (pt.symptoms.size() != c.symptoms.size())
            throw ValidationError(patient_field(c, p, "symptoms"), "symptom count does not match the symptom list");
        for (std::size_t s = 0; s < c.symptoms.size(); ++s) {
            if (pt.symptoms[s].size() != c.time_points.size())
                throw ValidationError(patient_field(c, p, "sym__" + c.symptoms[s]),
                                      "rating count does not match the time-point list");
            for (std::size_t t = 0; t < c.time_points.size(); ++t) {
                const auto& r = pt.symptoms[s][t];
                if (r && (*r < 0 || *r > 10))
                    throw ValidationError(patient_field(c, p, "sym__" + c.symptoms[s] + "__" + c.time_points[t]),
                                          "rating " + std::to_string(*r) + " outside [0,10]");
            }
        }
        if (pt.confounders.size() != c.confounders.size())
            throw ValidationError(patient_field(c, p, "confounders"),
                                  "confounder count does not match the confounder list");
        for (std::size_t k = 0; k < c.confounders.size(); ++k)
            if (pt.confounders[k] != 0 && pt.confounders[k] != 1)
                throw ValidationError(patient_field(c, p, "conf__" + c.confounders[k]), "confounder must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

enum class ColumnKind { organ, symptom, confounder };

struct CsvColumn {
    ColumnKind kind;
    std::size_t a = 0;  // organ / symptom / confounder index
    std::size_t b = 0;  // feature slot / time-point index
};

template <class T>
std::size_t intern(std::vector<T>& list, std::unordered_map<std::string, std::size_t>& index, const std::string& name) {
    auto [it, inserted] = index.emplace(name, list.size());
    if (inserted) {
        if constexpr (std::is_same_v<T, OrganId>)
            list.push_back(OrganId{name, default_laterality(name)});
        else
            list.push_back(name);
    }
    return it->second;
}

}  // namespace

Cohort cohort_from_csv(std::string_view text, const LoadOptions& options) {
    std::vector<std::string_view> lines;
    for (auto line : detail::split(text, '\n')) {
        line = detail::trim(line);
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw ValidationError("header", "file is empty");

    Cohort c;
    std::unordered_map<std::string, std::size_t> organ_ix, sym_ix, tp_ix, conf_ix;
    std::vector<CsvColumn> columns;
    const auto header = detail::split(lines[0], ',');
    if (header.empty() || detail::trim(header[0]) != "id")
        throw ValidationError("header", "first column must be 'id'");
    std::set<std::string> seen_headers;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string name(detail::trim(header[i]));
        if (!seen_headers.insert(name).second) throw ValidationError("header", "duplicate column '" + name + "'");
        const auto parts = detail::split(std::string_view(name), std::string_view("__"));
        if (parts.size() == 3 && parts[0] == "sym") {
            const std::size_t s = intern(c.symptoms, sym_ix, std::string(parts[1]));
            const std::size_t t = intern(c.time_points, tp_ix, std::string(parts[2]));
            columns.push_back({ColumnKind::symptom, s, t});
        } else if (parts.size() == 2 && parts[0] == "conf") {
            columns.push_back({ColumnKind::confounder, intern(c.confounders, conf_ix, std::string(parts[1])), 0});
        } else if (parts.size() == 2) {
            FeatureKey key = FeatureKey::mean();
            try {
                key = FeatureKey::parse(parts[1]);
            } catch (const ValidationError&) {
                throw ValidationError("header column '" + name + "'", "unknown DVH feature '" +
                                                                          std::string(parts[1]) + "'");
            }
            const std::size_t o = intern(c.organs, organ_ix, std::string(parts[0]));
            columns.push_back({ColumnKind::organ, o, static_cast<std::size_t>(key.slot())});
        } else {
            throw ValidationError("header column '" + name + "'",
                                  "expected <organ>__<feature>, sym__<symptom>__<timepoint> or conf__<name>");
        }
    }
    // Every organ needs all features; every symptom needs every time point.
    {
        std::vector<int> organ_cols(c.organs.size(), 0);
        std::vector<int> sym_cols(c.symptoms.size(), 0);
        for (const auto& col : columns) {
            if (col.kind == ColumnKind::organ) ++organ_cols[col.a];
            if (col.kind == ColumnKind::symptom) ++sym_cols[col.a];
        }
        for (std::size_t o = 0; o < c.organs.size(); ++o)
            if (organ_cols[o] != FeatureKey::kCount)
                throw ValidationError("header", "organ '" + c.organs[o].name + "' must have all " +
                                                    std::to_string(FeatureKey::kCount) + " DVH feature columns");
        for (std::size_t s = 0; s < c.symptoms.size(); ++s)
            if (sym_cols[s] != static_cast<int>(c.time_points.size()))
                throw ValidationError("header", "symptom '" + c.symptoms[s] + "' must have a column per time point");
    }

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto cells = detail::split(lines[li], ',');
        const std::string row_tag = "row " + std::to_string(li);
        if (cells.size() != header.size())
            throw ValidationError(row_tag, "expected " + std::to_string(header.size()) + " cells, found " +
                                               std::to_string(cells.size()));
        Patient p;
        p.id = std::string(detail::trim(cells[0]));
        if (p.id.empty()) throw ValidationError(row_tag + " column 'id'", "empty patient id");
        p.dvh.assign(c.organs.size(), OrganDvh{});
        p.symptoms.assign(c.symptoms.size(), SymptomSeries(c.time_points.size()));
        p.confounders.assign(c.confounders.size(), 0);
        std::vector<int> organ_empty(c.organs.size(), 0);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const auto cell = detail::trim(cells[i]);
            const auto& col = columns[i - 1];
            const std::string field = row_tag + " (" + p.id + ") column '" + std::string(detail::trim(header[i])) + "'";
            switch (col.kind) {
                case ColumnKind::organ: {
                    if (cell.empty()) {
                        ++organ_empty[col.a];
                        break;
                    }
                    auto v = detail::parse_double(cell);
                    if (!v || !std::isfinite(*v)) throw ValidationError(field, "not a number: '" + std::string(cell) + "'");
                    if (*v < 0.0) throw ValidationError(field, "negative dose " + std::string(cell));
                    p.dvh[col.a].values[col.b] = *v;
                    break;
                }
                case ColumnKind::symptom: {
                    if (cell.empty()) break;
                    auto v = detail::parse_int(cell);
                    if (!v) throw ValidationError(field, "rating is not an integer: '" + std::string(cell) + "'");
                    if (*v < 0 || *v > 10)
                        throw ValidationError(field, "rating " + std::string(cell) + " outside [0,10]");
                    p.symptoms[col.a][col.b] = static_cast<int>(*v);
                    break;
                }
                case ColumnKind::confounder: {
                    if (cell != "0" && cell != "1")
                        throw ValidationError(field, "confounder must be 0 or 1, got '" + std::string(cell) + "'");
                    p.confounders[col.a] = cell == "1" ? 1 : 0;
                    break;
                }
            }
        }
        for (std::size_t o = 0; o < c.organs.size(); ++o) {
            if (organ_empty[o] == 0) continue;
            const std::string field = row_tag + " (" + p.id + ") organ '" + c.organs[o].name + "'";
            if (organ_empty[o] != FeatureKey::kCount)
                throw ValidationError(field, "partially empty DVH features");
            if (!options.allow_missing)
                throw ValidationError(field, "organ data missing (load with allow_missing to accept)");
            p.dvh[o].missing = true;
        }
        c.patients.push_back(std::move(p));
    }
    validate_cohort(c, options);
    return c;
}

std::string cohort_to_csv(const Cohort& c) {
    std::string out = "id";
    for (const auto& o : c.organs)
        for (auto k : FeatureKey::all()) out += "," + o.name + "__" + k.str();
    for (const auto& s : c.symptoms)
        for (const auto& t : c.time_points) out += ",sym__" + s + "__" + t;
    for (const auto& k : c.confounders) out += ",conf__" + k;
    out += '\n';
    for (const auto& p : c.patients) {
        out += p.id;
        for (const auto& d : p.dvh)
            for (double v : d.values) {
                out += ',';
                if (!d.missing) out += format_double(v);
            }
        for (const auto& series : p.symptoms)
            for (const auto& r : series) {
                out += ',';
                if (r) out += std::to_string(*r);
            }
        for (int v : p.confounders) out += v ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

Cohort cohort_from_json_text(std::string_view text, const LoadOptions& options) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("json", e.what());
    }
    Cohort c;
    try {
        for (const auto& o : j.at("organs")) {
            OrganId id;
            id.name = o.at("name").get<std::string>();
            id.laterality = o.contains("laterality") ? parse_laterality(o.at("laterality").get<std::string>())
                                                     : default_laterality(id.name);
            c.organs.push_back(std::move(id));
        }
        c.time_points = j.value("time_points", std::vector<std::string>{});
        c.symptoms = j.value("symptoms", std::vector<std::string>{});
        c.confounders = j.value("confounders", std::vector<std::string>{});
        const auto& patients = j.at("patients");
        for (std::size_t pi = 0; pi < patients.size(); ++pi) {
            const auto& jp = patients[pi];
            Patient p;
            p.id = jp.at("id").get<std::string>();
            const std::string tag = "patients[" + std::to_string(pi) + "] (" + p.id + ")";
            const auto& dvh = jp.at("dvh");
            p.dvh.assign(c.organs.size(), OrganDvh{});
            for (std::size_t o = 0; o < c.organs.size(); ++o) {
                const auto& name = c.organs[o].name;
                if (!dvh.contains(name) || dvh.at(name).is_null()) {
                    p.dvh[o].missing = true;
                    continue;
                }
                const auto& jo = dvh.at(name);
                for (auto k : FeatureKey::all()) {
                    if (!jo.contains(k.str()) || !jo.at(k.str()).is_number())
                        throw ValidationError(tag + ".dvh." + name + "." + k.str(), "missing or non-numeric dose");
                    p.dvh[o][k] = jo.at(k.str()).get<double>();
                }
            }
            p.symptoms.assign(c.symptoms.size(), SymptomSeries(c.time_points.size()));
            if (jp.contains("symptoms")) {
                const auto& js = jp.at("symptoms");
                for (std::size_t s = 0; s < c.symptoms.size(); ++s) {
                    if (!js.contains(c.symptoms[s])) continue;
                    const auto& series = js.at(c.symptoms[s]);
                    for (std::size_t t = 0; t < c.time_points.size(); ++t) {
                        if (!series.contains(c.time_points[t]) || series.at(c.time_points[t]).is_null()) continue;
                        const auto& v = series.at(c.time_points[t]);
                        const std::string field = tag + ".symptoms." + c.symptoms[s] + "." + c.time_points[t];
                        if (!v.is_number_integer()) throw ValidationError(field, "rating must be an integer");
                        const auto r = v.get<long long>();
                        if (r < 0 || r > 10)
                            throw ValidationError(field, "rating " + std::to_string(r) + " outside [0,10]");
                        p.symptoms[s][t] = static_cast<int>(r);
                    }
                }
            }
            p.confounders.assign(c.confounders.size(), 0);
            for (std::size_t k = 0; k < c.confounders.size(); ++k) {
                const std::string field = tag + ".confounders." + c.confounders[k];
                const auto& jc = jp.at("confounders");
                if (!jc.contains(c.confounders[k])) throw ValidationError(field, "missing confounder value");
                const auto v = jc.at(c.confounders[k]).get<int>();
                if (v != 0 && v != 1) throw ValidationError(field, "confounder must be 0 or 1");
                p.confounders[k] = v;
            }
            c.patients.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ValidationError("json", e.what());
    }
    validate_cohort(c, options);
    return c;
}

std::string cohort_to_json_text(const Cohort& c) {
    json j;
    j["organs"] = json::array();
    for (const auto& o : c.organs) j["organs"].push_back({{"name", o.name}, {"laterality", to_string(o.laterality)}});
    j["time_points"] = c.time_points;
    j["symptoms"] = c.symptoms;
    j["confounders"] = c.confounders;
    j["patients"] = json::array();
    for (const auto& p : c.patients) {
        json jp;
        jp["id"] = p.id;
        json dvh = json::object();
        for (std::size_t o = 0; o < c.organs.size(); ++o) {
            if (p.dvh[o].missing) {
                dvh[c.organs[o].name] = nullptr;
                continue;
            }
            json jo = json::object();
            for (auto k : FeatureKey::all()) jo[k.str()] = p.dvh[o][k];
            dvh[c.organs[o].name] = std::move(jo);
        }
        jp["dvh"] = std::move(dvh);
        json sym = json::object();
        for (std::size_t s = 0; s < c.symptoms.size(); ++s) {
            json series = json::object();
            for (std::size_t t = 0; t < c.time_points.size(); ++t) {
                const auto& r = p.symptoms[s][t];
                series[c.time_points[t]] = r ? json(*r) : json(nullptr);
            }
            sym[c.symptoms[s]] = std::move(series);
        }
        jp["symptoms"] = std::move(sym);
        json conf = json::object();
        for (std::size_t k = 0; k < c.confounders.size(); ++k) conf[c.confounders[k]] = p.confounders[k];
        jp["confounders"] = std::move(conf);
        j["patients"].push_back(std::move(jp));
    }
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Files

CohortFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return CohortFormat::csv;
    if (ext == ".json") return CohortFormat::json;
    throw ValidationError("path", "cannot infer cohort format from '" + path.string() + "' (use .csv or .json)");
}

Cohort load_cohort(const std::filesystem::path& path, CohortFormat format, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cohort file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    return format == CohortFormat::csv ? cohort_from_csv(text, options) : cohort_from_json_text(text, options);
}

Cohort load_cohort(const std::filesystem::path& path, const LoadOptions& options) {
    return load_cohort(path, format_from_path(path), options);
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path, CohortFormat format) {
    const std::string text = format == CohortFormat::csv ? cohort_to_csv(cohort) : cohort_to_json_text(cohort);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

std::vector<double> rating_profile(std::size_t n_time_points) {
    // Rises through treatment, peaks at the end of it, partially recovers.
    std::vector<double> f(n_time_points);
    if (n_time_points == 1) {
        f[0] = 1.0;
        return f;
    }
    const std::size_t peak = n_time_points >= 3 ? n_time_points - 3 : n_time_points - 1;
    for (std::size_t t = 0; t < n_time_points; ++t) {
        if (t <= peak)
            f[t] = 0.1 + 0.9 * static_cast<double>(t) / static_cast<double>(std::max<std::size_t>(peak, 1));
        else
            f[t] = 1.0 - 0.25 * static_cast<double>(t - peak);
    }
    return f;
}

int clamp_rating(double v) { return static_cast<int>(std::clamp(std::lround(v), 0L, 10L)); }

}  // namespace

SyntheticCohort generate_synthetic_cohort(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.n_groups < 2) throw ValidationError("n_groups", "need at least 2 planted groups");
    if (cfg.n_patients < static_cast<std::size_t>(cfg.n_groups))
        throw ValidationError("n_patients", "fewer patients than planted groups");
    if (cfg.voxels_per_organ < 1) throw ValidationError("voxels_per_organ", "must be positive");
    if (!(cfg.dose_spread_gy >= 0.0) || !(cfg.background_spread_gy >= 0.0) || !(cfg.voxel_heterogeneity_gy >= 0.0))
        throw ValidationError("dose_spread_gy", "spreads must be >= 0");
    if (cfg.outcome.threshold < 0 || cfg.outcome.threshold > 9)
        throw ValidationError("outcome.threshold", "threshold must be in [0,9]");

    Cohort c;
    if (cfg.organs.empty()) {
        c.organs = default_organ_list();
    } else {
        for (const auto& name : cfg.organs) c.organs.push_back({name, default_laterality(name)});
    }
    if (c.organs.empty()) throw ValidationError("organs", "organ list is empty");
    c.time_points = cfg.time_points.empty() ? default_time_points() : cfg.time_points;
    c.symptoms = cfg.symptoms.empty() ? default_symptoms() : cfg.symptoms;
    for (const auto& conf : cfg.confounders) {
        if (!(conf.prevalence >= 0.0 && conf.prevalence <= 1.0))
            throw ValidationError("confounders." + conf.name, "prevalence must be in [0,1]");
        c.confounders.push_back(conf.name);
    }

    const std::size_t n = cfg.n_patients;
    const std::size_t n_org = c.organs.size();
    const auto k = static_cast<std::size_t>(cfg.n_groups);

    const auto outcome_sym = std::find(c.symptoms.begin(), c.symptoms.end(), cfg.outcome.symptom);
    if (outcome_sym == c.symptoms.end())
        throw ValidationError("outcome.symptom", "'" + cfg.outcome.symptom + "' not in the symptom list");
    const auto outcome_tp = std::find(c.time_points.begin(), c.time_points.end(), cfg.outcome.time_point);
    if (outcome_tp == c.time_points.end())
        throw ValidationError("outcome.time_point", "'" + cfg.outcome.time_point + "' not in the time-point list");
    const auto outcome_s = static_cast<std::size_t>(outcome_sym - c.symptoms.begin());
    const auto outcome_t = static_cast<std::size_t>(outcome_tp - c.time_points.begin());

    std::vector<bool> planted(n_org, false);
    for (const auto& name : cfg.planted_organs) {
        auto ix = c.organ_index(name);
        if (!ix) throw ValidationError("planted_organs", "unknown organ '" + name + "'");
        planted[*ix] = true;
    }
    std::vector<std::pair<std::size_t, double>> weights;
    for (const auto& [name, w] : cfg.outcome.organ_weights) {
        auto ix = c.organ_index(name);
        if (!ix) throw ValidationError("outcome.organ_weights", "unknown organ '" + name + "'");
        weights.emplace_back(*ix, w);
    }

    // group x organ dose levels
    PlantedTruth truth;
    truth.group_levels.assign(k, std::vector<double>(n_org, cfg.baseline_dose_gy));
    if (!cfg.group_organ_means.empty()) {
        if (cfg.group_organ_means.size() != k)
            throw ValidationError("group_organ_means", "need one row per planted group");
        for (std::size_t g = 0; g < k; ++g) {
            if (cfg.group_organ_means[g].size() != n_org)
                throw ValidationError("group_organ_means", "need one level per organ");
            truth.group_levels[g] = cfg.group_organ_means[g];
        }
    } else {
        const double step = cfg.group_separation * cfg.dose_spread_gy;
        for (std::size_t g = 0; g < k; ++g)
            for (std::size_t o = 0; o < n_org; ++o)
                if (planted[o])
                    truth.group_levels[g][o] =
                        cfg.baseline_dose_gy + step * (static_cast<double>(g) - static_cast<double>(k - 1) / 2.0);
    }

    std::vector<double> proportions = cfg.group_proportions;
    if (proportions.empty()) proportions.assign(k, 1.0);
    if (proportions.size() != k) throw ValidationError("group_proportions", "need one proportion per group");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Group labels: deterministic quota per group, then shuffled.
    truth.group.resize(n);
    {
        const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
        if (!(total > 0.0)) throw ValidationError("group_proportions", "proportions must sum to a positive value");
        std::vector<std::size_t> counts(k);
        std::size_t assigned = 0;
        for (std::size_t g = 0; g < k; ++g) {
            counts[g] = static_cast<std::size_t>(std::floor(proportions[g] / total * static_cast<double>(n)));
            assigned += counts[g];
        }
        for (std::size_t g = 0; assigned < n; g = (g + 1) % k, ++assigned) ++counts[g];
        std::size_t pos = 0;
        for (std::size_t g = 0; g < k; ++g)
            for (std::size_t i = 0; i < counts[g]; ++i) truth.group[pos++] = static_cast<int>(g);
        std::shuffle(truth.group.begin(), truth.group.end(), rng);
    }

    c.patients.resize(n);
    std::vector<double> voxels(static_cast<std::size_t>(cfg.voxels_per_organ));
    for (std::size_t p = 0; p < n; ++p) {
        Patient& pt = c.patients[p];
        char id[32];
        std::snprintf(id, sizeof id, "P%04zu", p + 1);
        pt.id = id;
        pt.dvh.resize(n_org);
        const auto g = static_cast<std::size_t>(truth.group[p]);
        for (std::size_t o = 0; o < n_org; ++o) {
            const double spread = planted[o] || !cfg.group_organ_means.empty() ? cfg.dose_spread_gy
                                                                                : cfg.background_spread_gy;
            const double level = std::clamp(truth.group_levels[g][o] + spread * normal(rng), 0.0, cfg.max_dose_gy);
            double sum = 0.0;
            double mx = 0.0;
            for (double& v : voxels) {
                v = std::clamp(level + cfg.voxel_heterogeneity_gy * normal(rng), 0.0, cfg.max_dose_gy);
                sum += v;
                mx = std::max(mx, v);
            }
            OrganDvh& d = pt.dvh[o];
            for (int x = 5; x <= 95; x += 5) d[FeatureKey::vx(x)] = vx_from_dose_samples(voxels, x);
            d[FeatureKey::mean()] = sum / static_cast<double>(voxels.size());
            d[FeatureKey::max()] = mx;
        }
        pt.confounders.resize(cfg.confounders.size());
        for (std::size_t j = 0; j < cfg.confounders.size(); ++j)
            pt.confounders[j] = unif(rng) < cfg.confounders[j].prevalence ? 1 : 0;
    }

    // Planted outcome: logistic in the standardized weighted organ mean dose.
    std::vector<double> eta(n, cfg.outcome.intercept);
    for (const auto& [o, w] : weights) {
        double mean = 0.0;
        for (const auto& pt : c.patients) mean += pt.dvh[o][FeatureKey::mean()];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& pt : c.patients) {
            const double d = pt.dvh[o][FeatureKey::mean()] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t p = 0; p < n; ++p) {
            const double z = sd > 0.0 ? (c.patients[p].dvh[o][FeatureKey::mean()] - mean) / sd : 0.0;
            eta[p] += w * z;
        }
    }
    for (std::size_t j = 0; j < cfg.confounders.size(); ++j)
        for (std::size_t p = 0; p < n; ++p) eta[p] += cfg.confounders[j].log_odds * c.patients[p].confounders[j];

    truth.severe.resize(n);
    truth.severe_probability.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        truth.severe_probability[p] = 1.0 / (1.0 + std::exp(-eta[p]));
        truth.severe[p] = unif(rng) < truth.severe_probability[p] ? 1 : 0;
    }

    const auto profile = rating_profile(c.time_points.size());
    const int t = cfg.outcome.threshold;
    for (std::size_t p = 0; p < n; ++p) {
        Patient& pt = c.patients[p];
        pt.symptoms.assign(c.symptoms.size(), SymptomSeries(c.time_points.size()));
        for (std::size_t s = 0; s < c.symptoms.size(); ++s) {
            const bool linked = s == outcome_s;
            const double peak = linked ? (truth.severe[p] ? 8.0 : 3.0) : 6.0 * unif(rng);
            for (std::size_t tp = 0; tp < c.time_points.size(); ++tp) {
                int r;
                if (linked && tp == outcome_t) {
                    // Severe iff rating > threshold, uniform on either side.
                    r = truth.severe[p] ? t + 1 + static_cast<int>(unif(rng) * (10 - t))
                                        : static_cast<int>(unif(rng) * (t + 1));
                    r = std::min(r, 10);
                } else {
                    r = clamp_rating(peak * profile[tp] + normal(rng));
                }
                const bool drop = cfg.missing_rating_rate > 0.0 && unif(rng) < cfg.missing_rating_rate;
                if (!drop) pt.symptoms[s][tp] = r;
            }
        }
    }

    validate_cohort(c);
    return {std::move(c), std::move(truth)};
}

}  // namespace dass
