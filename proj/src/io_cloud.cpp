#include "sqfit/error.hpp"
#include "sqfit/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace sqfit {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

CloudFormat resolve(const fs::path& path, CloudFormat format) {
    if (format != CloudFormat::Auto) return format;
    const std::string ext = lower(path.extension().string());
    if (ext == ".ply") return CloudFormat::Ply;
    if (ext == ".csv") return CloudFormat::Csv;
    return CloudFormat::Xyz;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Parses a whole token as a double, accepting nan/inf spellings.
std::optional<double> parse_number(std::string_view token) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
    return value;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t b = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

std::vector<std::string_view> split_char(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t b = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(line.substr(b, i - b));
            b = i + 1;
        }
    }
    return out;
}

void accept(LoadedCloud& out, double x, double y, double z) {
    if (std::isfinite(x) && std::isfinite(y) && std::isfinite(z)) {
        out.points.emplace_back(x, y, z);
        ++out.report.accepted;
    } else {
        ++out.report.rejected_non_finite;
    }
}

std::string read_all(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::FileNotFound, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t b = 0;
    while (b < text.size()) {
        std::size_t e = text.find('\n', b);
        if (e == std::string_view::npos) e = text.size();
        std::string_view line = text.substr(b, e - b);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!fn(line)) return;
        b = e + 1;
    }
}

LoadedCloud parse_xyz(std::string_view text) {
    LoadedCloud out;
    for_each_line(text, [&](std::string_view line) {
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') return true;
        const auto tokens = split_whitespace(t);
        if (tokens.size() < 3) {
            ++out.report.rejected_malformed;
            return true;
        }
        const auto x = parse_number(tokens[0]), y = parse_number(tokens[1]), z = parse_number(tokens[2]);
        if (!x || !y || !z) ++out.report.rejected_malformed;
        else accept(out, *x, *y, *z);
        return true;
    });
    return out;
}

LoadedCloud parse_csv(std::string_view text) {
    LoadedCloud out;
    bool first = true;
    std::optional<std::array<std::size_t, 3>> columns;
    for_each_line(text, [&](std::string_view line) {
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') return true;
        const auto fields = split_char(t, ',');
        if (first) {
            first = false;
            std::vector<std::string> names;
            bool numeric = true;
            for (const auto f : fields) {
                names.push_back(lower(std::string(trim(f))));
                if (!parse_number(f)) numeric = false;
            }
            if (!numeric) {
                const auto find = [&](const char* n) { return std::find(names.begin(), names.end(), n); };
                if (find("x") != names.end() && find("y") != names.end() && find("z") != names.end()) {
                    columns = std::array<std::size_t, 3>{static_cast<std::size_t>(find("x") - names.begin()),
                                                         static_cast<std::size_t>(find("y") - names.begin()),
                                                         static_cast<std::size_t>(find("z") - names.begin())};
                }
                return true;
            }
        }
        if (!columns) {
            std::array<std::size_t, 3> picked{};
            std::size_t found = 0;
            for (std::size_t i = 0; i < fields.size() && found < 3; ++i)
                if (parse_number(fields[i])) picked[found++] = i;
            if (found < 3) throw Error(Errc::MalformedHeader, "CSV has fewer than three numeric columns");
            columns = picked;
        }
        const auto& c = *columns;
        if (std::max({c[0], c[1], c[2]}) >= fields.size()) {
            ++out.report.rejected_malformed;
            return true;
        }
        const auto x = parse_number(fields[c[0]]), y = parse_number(fields[c[1]]), z = parse_number(fields[c[2]]);
        if (!x || !y || !z) ++out.report.rejected_malformed;
        else accept(out, *x, *y, *z);
        return true;
    });
    return out;
}

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(std::string_view name) {
    if (name == "char" || name == "int8") return PlyType::I8;
    if (name == "uchar" || name == "uint8") return PlyType::U8;
    if (name == "short" || name == "int16") return PlyType::I16;
    if (name == "ushort" || name == "uint16") return PlyType::U16;
    if (name == "int" || name == "int32") return PlyType::I32;
    if (name == "uint" || name == "uint32") return PlyType::U32;
    if (name == "float" || name == "float32") return PlyType::F32;
    if (name == "double" || name == "float64") return PlyType::F64;
    return std::nullopt;
}

std::size_t ply_size(PlyType t) {
    switch (t) {
        case PlyType::I8:
        case PlyType::U8: return 1;
        case PlyType::I16:
        case PlyType::U16: return 2;
        case PlyType::I32:
        case PlyType::U32:
        case PlyType::F32: return 4;
        case PlyType::F64: return 8;
    }
    return 0;
}

template <typename T>
T load_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

double load_ply_value(PlyType t, const char* p) {
    switch (t) {
        case PlyType::I8: return load_le<std::int8_t>(p);
        case PlyType::U8: return load_le<std::uint8_t>(p);
        case PlyType::I16: return load_le<std::int16_t>(p);
        case PlyType::U16: return load_le<std::uint16_t>(p);
        case PlyType::I32: return load_le<std::int32_t>(p);
        case PlyType::U32: return load_le<std::uint32_t>(p);
        case PlyType::F32: return load_le<float>(p);
        case PlyType::F64: return load_le<double>(p);
    }
    return 0.0;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

LoadedCloud parse_ply(const std::string& text) {
    auto malformed = [](const std::string& why) { return Error(Errc::MalformedHeader, "PLY header: " + why); };
    if (text.rfind("ply", 0) != 0) throw malformed("missing 'ply' magic");
    const std::size_t end = text.find("end_header");
    if (end == std::string::npos) throw malformed("missing end_header");
    std::size_t body = text.find('\n', end);
    if (body == std::string::npos) throw malformed("missing newline after end_header");
    ++body;

    bool ascii = false;
    bool have_format = false;
    std::vector<PlyElement> elements;
    for_each_line(std::string_view(text).substr(0, end), [&](std::string_view line) {
        const auto tok = split_whitespace(line);
        if (tok.empty() || tok[0] == "ply" || tok[0] == "comment" || tok[0] == "obj_info") return true;
        if (tok[0] == "format") {
            if (tok.size() < 2) throw malformed("incomplete format line");
            if (tok[1] == "ascii") ascii = true;
            else if (tok[1] == "binary_big_endian")
                throw Error(Errc::UnsupportedPlyEncoding, "big-endian PLY is not supported");
            else if (tok[1] != "binary_little_endian") throw malformed("unknown format " + std::string(tok[1]));
            have_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() < 3) throw malformed("incomplete element line");
            const auto n = parse_number(tok[2]);
            if (!n || *n < 0) throw malformed("bad element count");
            elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*n), {}});
        } else if (tok[0] == "property") {
            if (elements.empty()) throw malformed("property before element");
            PlyProperty prop;
            if (tok.size() >= 5 && tok[1] == "list") {
                const auto ct = ply_type(tok[2]), vt = ply_type(tok[3]);
                if (!ct || !vt) throw malformed("unknown list type");
                prop = {std::string(tok[4]), *vt, true, *ct};
            } else if (tok.size() >= 3) {
                const auto t = ply_type(tok[1]);
                if (!t) throw malformed("unknown property type " + std::string(tok[1]));
                prop = {std::string(tok[2]), *t, false, PlyType::U8};
            } else {
                throw malformed("incomplete property line");
            }
            elements.back().properties.push_back(prop);
        } else {
            throw malformed("unexpected keyword " + std::string(tok[0]));
        }
        return true;
    });
    if (!have_format) throw malformed("missing format line");
    const auto vertex = std::find_if(elements.begin(), elements.end(), [](const auto& e) { return e.name == "vertex"; });
    if (vertex == elements.end()) throw malformed("no vertex element");
    int axis_of[3] = {-1, -1, -1};
    for (std::size_t i = 0; i < vertex->properties.size(); ++i) {
        const auto& p = vertex->properties[i];
        if (p.is_list) continue;
        if (p.name == "x") axis_of[0] = static_cast<int>(i);
        if (p.name == "y") axis_of[1] = static_cast<int>(i);
        if (p.name == "z") axis_of[2] = static_cast<int>(i);
    }
    if (axis_of[0] < 0 || axis_of[1] < 0 || axis_of[2] < 0) throw malformed("vertex element lacks x, y or z");

    LoadedCloud out;
    if (ascii) {
        std::vector<std::string_view> tokens;
        std::size_t line_no = 0;
        std::size_t element_index = 0;
        std::size_t instance = 0;
        auto advance_element = [&]() {
            while (element_index < elements.size() && instance >= elements[element_index].count) {
                ++element_index;
                instance = 0;
            }
        };
        advance_element();
        for_each_line(std::string_view(text).substr(body), [&](std::string_view line) {
            ++line_no;
            if (element_index >= elements.size()) return false;
            const auto tok = split_whitespace(line);
            if (tok.empty()) return true;
            const PlyElement& el = elements[element_index];
            if (el.name == "vertex") {
                std::size_t cursor = 0;
                double xyz[3] = {0, 0, 0};
                bool ok = true;
                for (std::size_t pi = 0; pi < el.properties.size() && ok; ++pi) {
                    const auto& p = el.properties[pi];
                    if (p.is_list) {
                        const auto n = cursor < tok.size() ? parse_number(tok[cursor]) : std::nullopt;
                        if (!n) ok = false;
                        else cursor += 1 + static_cast<std::size_t>(*n);
                        continue;
                    }
                    if (cursor >= tok.size()) {
                        ok = false;
                        break;
                    }
                    for (int a = 0; a < 3; ++a) {
                        if (axis_of[a] == static_cast<int>(pi)) {
                            const auto v = parse_number(tok[cursor]);
                            if (!v) ok = false;
                            else xyz[a] = *v;
                        }
                    }
                    ++cursor;
                }
                if (ok) accept(out, xyz[0], xyz[1], xyz[2]);
                else ++out.report.rejected_malformed;
            }
            ++instance;
            advance_element();
            return true;
        });
    } else {
        const char* p = text.data() + body;
        const char* const stop = text.data() + text.size();
        auto need = [&](std::size_t n) {
            if (static_cast<std::size_t>(stop - p) < n) throw malformed("binary body is truncated");
        };
        for (const auto& el : elements) {
            const bool is_vertex = el.name == "vertex";
            for (std::size_t i = 0; i < el.count; ++i) {
                double xyz[3] = {0, 0, 0};
                for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
                    const auto& prop = el.properties[pi];
                    if (prop.is_list) {
                        need(ply_size(prop.count_type));
                        const auto n = static_cast<std::size_t>(load_ply_value(prop.count_type, p));
                        p += ply_size(prop.count_type);
                        need(n * ply_size(prop.type));
                        p += n * ply_size(prop.type);
                        continue;
                    }
                    need(ply_size(prop.type));
                    if (is_vertex)
                        for (int a = 0; a < 3; ++a)
                            if (axis_of[a] == static_cast<int>(pi)) xyz[a] = load_ply_value(prop.type, p);
                    p += ply_size(prop.type);
                }
                if (is_vertex) accept(out, xyz[0], xyz[1], xyz[2]);
            }
            if (is_vertex) break;
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::optional<CloudFormat> parse_cloud_format(std::string_view name) {
    if (name == "auto") return CloudFormat::Auto;
    if (name == "xyz") return CloudFormat::Xyz;
    if (name == "ply") return CloudFormat::Ply;
    if (name == "ply-ascii") return CloudFormat::PlyAscii;
    if (name == "csv") return CloudFormat::Csv;
    return std::nullopt;
}

LoadedCloud read_cloud(const fs::path& path, CloudFormat format) {
    const std::string text = read_all(path);
    LoadedCloud out;
    switch (resolve(path, format)) {
        case CloudFormat::Ply:
        case CloudFormat::PlyAscii: out = parse_ply(text); break;
        case CloudFormat::Csv: out = parse_csv(text); break;
        default: out = parse_xyz(text); break;
    }
    if (out.points.empty()) throw Error(Errc::EmptyCloud, "no finite points in " + path.string());
    return out;
}

void write_cloud(const fs::path& path, std::span<const Vec3> points, CloudFormat format) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
    const CloudFormat f = resolve(path, format);
    if (f == CloudFormat::Ply || f == CloudFormat::PlyAscii) {
        os << "ply\nformat " << (f == CloudFormat::Ply ? "binary_little_endian" : "ascii") << " 1.0\n"
           << "element vertex " << points.size() << "\n"
           << "property double x\nproperty double y\nproperty double z\nend_header\n";
        if (f == CloudFormat::Ply) {
            for (const auto& p : points) {
                for (int a = 0; a < 3; ++a) {
                    char b[8];
                    std::memcpy(b, &p[a], 8);
                    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 8);
                    os.write(b, 8);
                }
            }
        } else {
            for (const auto& p : points)
                os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
        }
    } else if (f == CloudFormat::Csv) {
        os << "x,y,z\n";
        for (const auto& p : points)
            os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
    } else {
        for (const auto& p : points)
            os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    }
    os.flush();
    if (!os) throw Error(Errc::IoError, "failed writing " + path.string());
}

}  // namespace sqfit
