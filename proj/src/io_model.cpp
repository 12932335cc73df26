#include "sqfit/error.hpp"
#include "sqfit/io.hpp"

#include <fstream>
#include <sstream>

namespace sqfit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& path, const std::string& what) {
    throw Error(Errc::SchemaViolation, path + ": " + what);
}

const json& field(const json& j, const std::string& parent, const char* name) {
    const std::string path = parent.empty() ? name : parent + "." + name;
    if (!j.is_object()) violation(parent.empty() ? "<root>" : parent, "expected an object");
    const auto it = j.find(name);
    if (it == j.end()) violation(path, "missing");
    return *it;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) violation(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) violation(path, "must be finite");
    return v;
}

std::vector<double> numbers(const json& j, const std::string& path, std::size_t n) {
    if (!j.is_array() || j.size() != n) violation(path, "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace

json model_to_json(const SuperquadricModel& m) {
    json j;
    j["eps"] = {m.eps1, m.eps2};
    j["size"] = {m.size.x(), m.size.y(), m.size.z()};
    j["euler"] = {m.euler.x(), m.euler.y(), m.euler.z()};
    j["translation"] = {m.translation.x(), m.translation.y(), m.translation.z()};
    if (const auto* t = std::get_if<Taper>(&m.deformation)) {
        j["deformation"] = {{"type", "taper"}, {"kx", t->kx}, {"ky", t->ky}};
    } else if (const auto* b = std::get_if<Bend>(&m.deformation)) {
        j["deformation"] = {{"type", "bend"}, {"kappa", b->kappa}, {"alpha", b->alpha}};
    } else {
        j["deformation"] = {{"type", "none"}};
    }
    return j;
}

SuperquadricModel model_from_json(const json& j) {
    SuperquadricModel m;
    const auto eps = numbers(field(j, "", "eps"), "eps", 2);
    m.eps1 = eps[0];
    m.eps2 = eps[1];
    if (!(m.eps1 > 0) || !(m.eps2 > 0)) violation("eps", "exponents must be positive");
    const auto size = numbers(field(j, "", "size"), "size", 3);
    m.size = Vec3(size[0], size[1], size[2]);
    if (!(m.size.array() > 0).all()) violation("size", "entries must be positive");
    const auto euler = numbers(field(j, "", "euler"), "euler", 3);
    m.euler = Vec3(euler[0], euler[1], euler[2]);
    const auto t = numbers(field(j, "", "translation"), "translation", 3);
    m.translation = Vec3(t[0], t[1], t[2]);

    if (j.contains("deformation")) {
        const json& d = j["deformation"];
        const json& type = field(d, "deformation", "type");
        if (!type.is_string()) violation("deformation.type", "expected a string");
        const auto name = type.get<std::string>();
        if (name == "taper") {
            m.deformation = Taper{number(field(d, "deformation", "kx"), "deformation.kx"),
                                  number(field(d, "deformation", "ky"), "deformation.ky")};
        } else if (name == "bend") {
            const double kappa = number(field(d, "deformation", "kappa"), "deformation.kappa");
            if (!(kappa > 0)) violation("deformation.kappa", "must be positive");
            m.deformation = Bend{kappa, number(field(d, "deformation", "alpha"), "deformation.alpha")};
        } else if (name != "none") {
            violation("deformation.type", "unknown type '" + name + "'");
        }
    }
    return m;
}

json read_json(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "no such file: " + path.string());
    std::ifstream in(path);
    if (!in) throw Error(Errc::FileNotFound, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::SchemaViolation, path.string() + ": invalid JSON (" + e.what() + ")");
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
    os << j.dump(2) << '\n';
    os.flush();
    if (!os) throw Error(Errc::IoError, "failed writing " + path.string());
}

SuperquadricModel read_model(const fs::path& path) { return model_from_json(read_json(path)); }

void write_model(const fs::path& path, const SuperquadricModel& model) { write_json(path, model_to_json(model)); }

}  // namespace sqfit
