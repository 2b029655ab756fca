#include "polysplat/scene_io.hpp"
#include "polysplat/errors.hpp"

#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace polysplat {

// ----------------------------------------------------------------- ply

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0; // within one record
    std::size_t size = 0;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
    std::size_t stride = 0;
    bool has_list = false;
};

std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "int8" || t == "uchar" || t == "uint8") return 1;
    if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
    if (t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
    if (t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

bool is_float32(const std::string& t) { return t == "float" || t == "float32"; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

SceneFile load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    // header
    std::size_t header_end = data.find("end_header\n");
    if (header_end == std::string::npos) throw MalformedHeader("missing end_header");
    std::size_t body_off = header_end + std::strlen("end_header\n");
    std::istringstream hs(data.substr(0, header_end));

    std::string line;
    if (!std::getline(hs, line) || (line != "ply" && line != "ply\r"))
        throw MalformedHeader("missing ply magic");

    bool format_seen = false;
    std::vector<PlyElement> elements;
    while (std::getline(hs, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok.empty() || tok == "comment" || tok == "obj_info") continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "ascii" || fmt == "binary_big_endian")
                throw UnsupportedFormat("only binary_little_endian PLY is supported");
            if (fmt != "binary_little_endian" || ver != "1.0")
                throw MalformedHeader("bad format line");
            format_seen = true;
        } else if (tok == "element") {
            PlyElement el;
            if (!(ls >> el.name >> el.count)) throw MalformedHeader("bad element line");
            elements.push_back(el);
        } else if (tok == "property") {
            if (elements.empty()) throw MalformedHeader("property before element");
            std::string type;
            ls >> type;
            PlyElement& el = elements.back();
            if (type == "list") {
                el.has_list = true;
                continue;
            }
            PlyProperty p;
            p.type = type;
            p.size = ply_type_size(type);
            if (p.size == 0) throw MalformedHeader("unknown property type '" + type + "'");
            if (!(ls >> p.name)) throw MalformedHeader("property without name");
            p.offset = el.stride;
            el.stride += p.size;
            el.properties.push_back(p);
        } else {
            throw MalformedHeader("unexpected header token '" + tok + "'");
        }
    }
    if (!format_seen) throw MalformedHeader("missing format line");

    const PlyElement* vertex = nullptr;
    std::size_t data_off = body_off;
    for (const PlyElement& el : elements) {
        if (el.name == "vertex") {
            vertex = &el;
            break;
        }
        if (el.has_list)
            throw UnsupportedFormat("list properties before the vertex element");
        data_off += el.stride * el.count;
    }
    if (!vertex) throw MissingProperty("no vertex element");
    if (vertex->has_list) throw UnsupportedFormat("vertex element has list properties");

    std::map<std::string, const PlyProperty*> props;
    for (const PlyProperty& p : vertex->properties) props[p.name] = &p;

    auto require = [&](const std::string& name) -> const PlyProperty* {
        auto it = props.find(name);
        if (it == props.end()) throw MissingProperty("missing property '" + name + "'");
        if (!is_float32(it->second->type))
            throw UnsupportedFormat("property '" + name + "' is not float32");
        return it->second;
    };

    const PlyProperty* px = require("x");
    const PlyProperty* py = require("y");
    const PlyProperty* pz = require("z");
    const PlyProperty* pdc[3] = {require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
    const PlyProperty* pop = require("opacity");
    const PlyProperty* pscale[3] = {require("scale_0"), require("scale_1"), require("scale_2")};
    const PlyProperty* prot[4] = {require("rot_0"), require("rot_1"), require("rot_2"),
                                  require("rot_3")};

    // f_rest count decides the SH degree: 9 -> 1, 24 -> 2, 45 -> 3
    int n_rest = 0;
    while (n_rest < 45) {
        auto it = props.find("f_rest_" + std::to_string(n_rest));
        if (it == props.end()) break;
        if (!is_float32(it->second->type))
            throw UnsupportedFormat("f_rest properties must be float32");
        ++n_rest;
    }
    int sh_degree = 0, per_channel = 0;
    if (n_rest >= 45) {
        sh_degree = 3;
        per_channel = 15;
    } else if (n_rest >= 24) {
        sh_degree = 2;
        per_channel = 8;
    } else if (n_rest >= 9) {
        sh_degree = 1;
        per_channel = 3;
    }
    std::vector<const PlyProperty*> prest;
    for (int i = 0; i < 3 * per_channel; ++i) prest.push_back(props["f_rest_" + std::to_string(i)]);

    if (data.size() < data_off + vertex->stride * vertex->count)
        throw TruncatedData("vertex data shorter than declared");

    const char* base = data.data() + data_off;
    auto readf = [&](std::size_t record, const PlyProperty* p) {
        float v;
        std::memcpy(&v, base + record * vertex->stride + p->offset, 4);
        return static_cast<double>(v);
    };

    SceneFile scene;
    scene.source_path = path;
    scene.sh_degree = sh_degree;
    scene.splats.resize(vertex->count);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        Splat3D& s = scene.splats[i];
        s.mean = {readf(i, px), readf(i, py), readf(i, pz)};
        s.opacity = sigmoid(readf(i, pop));
        s.scale = {std::exp(readf(i, pscale[0])), std::exp(readf(i, pscale[1])),
                   std::exp(readf(i, pscale[2]))};
        s.rotation =
            Quat{readf(i, prot[0]), readf(i, prot[1]), readf(i, prot[2]), readf(i, prot[3])}
                .normalized();
        s.sh[0] = {readf(i, pdc[0]), readf(i, pdc[1]), readf(i, pdc[2])};
        for (int j = 0; j < per_channel; ++j) {
            s.sh[j + 1] = {readf(i, prest[0 * per_channel + j]),
                           readf(i, prest[1 * per_channel + j]),
                           readf(i, prest[2 * per_channel + j])};
        }
    }
    return scene;
}

void write_ply(const SceneFile& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << scene.splats.size() << "\n";
    const char* names[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (const char* n : names) out << "property float " << n << "\n";
    for (int i = 0; i < 45; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";

    std::vector<float> rec(62);
    for (const Splat3D& s : scene.splats) {
        rec[0] = float(s.mean.x);
        rec[1] = float(s.mean.y);
        rec[2] = float(s.mean.z);
        rec[3] = rec[4] = rec[5] = 0.0f; // normals unused
        rec[6] = float(s.sh[0].x);
        rec[7] = float(s.sh[0].y);
        rec[8] = float(s.sh[0].z);
        for (int ch = 0; ch < 3; ++ch)
            for (int j = 0; j < 15; ++j) {
                const Vec3& c = s.sh[j + 1];
                rec[9 + ch * 15 + j] = float(ch == 0 ? c.x : ch == 1 ? c.y : c.z);
            }
        rec[54] = float(logit(std::clamp(s.opacity, 1e-7, 1.0 - 1e-7)));
        rec[55] = float(std::log(s.scale.x));
        rec[56] = float(std::log(s.scale.y));
        rec[57] = float(std::log(s.scale.z));
        rec[58] = float(s.rotation.w);
        rec[59] = float(s.rotation.x);
        rec[60] = float(s.rotation.y);
        rec[61] = float(s.rotation.z);
        out.write(reinterpret_cast<const char*>(rec.data()), rec.size() * sizeof(float));
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ------------------------------------------------------------- cameras

std::vector<Camera> load_cameras(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("camera file: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("camera file: expected a JSON array");

    std::vector<Camera> cams;
    try {
        for (const auto& j : doc) {
            Camera c;
            c.id = j.at("id").get<int>();
            c.width = j.at("width").get<int>();
            c.height = j.at("height").get<int>();
            c.fx = j.at("fx").get<double>();
            c.fy = j.at("fy").get<double>();
            c.cx = j.at("cx").get<double>();
            c.cy = j.at("cy").get<double>();
            auto rot = j.at("rotation");
            auto tr = j.at("translation");
            if (rot.size() != 9 || tr.size() != 3)
                throw ParseError("camera file: rotation must have 9 entries, translation 3");
            for (int k = 0; k < 9; ++k) c.rotation.m[k] = rot[k].get<double>();
            c.translation = {tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>()};
            c.validate();
            cams.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("camera file: ") + e.what());
    }
    return cams;
}

void write_cameras(const std::vector<Camera>& cams, const std::string& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const Camera& c : cams) {
        nlohmann::json j;
        j["id"] = c.id;
        j["width"] = c.width;
        j["height"] = c.height;
        j["fx"] = c.fx;
        j["fy"] = c.fy;
        j["cx"] = c.cx;
        j["cy"] = c.cy;
        j["rotation"] = c.rotation.m;
        j["translation"] = {c.translation.x, c.translation.y, c.translation.z};
        doc.push_back(j);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ----------------------------------------------------- synthetic scenes

namespace {

// mt19937_64-backed uniforms; avoids distribution objects so scenes are
// reproducible across standard libraries
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }
    Quat rotation() {
        double u1 = uniform(), u2 = uniform(), u3 = uniform();
        double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
        return Quat{b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3)};
    }

private:
    std::mt19937_64 gen_;
};

constexpr double kSH0 = 0.28209479177387814;

Vec3 dc_for_color(const Vec3& color) {
    return {(color.x - 0.5) / kSH0, (color.y - 0.5) / kSH0, (color.z - 0.5) / kSH0};
}

SceneFile make_grid_scene() {
    SceneFile scene;
    scene.sh_degree = 0;
    const double spacing = 0.22, sigma = 0.09;
    const double opacities[3] = {0.35, 0.65, 0.95};
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            Splat3D s;
            s.mean = {(i - 4.5) * spacing, (j - 4.5) * spacing, 0.0};
            s.scale = {sigma, sigma, sigma};
            s.rotation = Quat{};
            s.opacity = opacities[(i + j) % 3];
            Vec3 color{i / 9.0, j / 9.0, 1.0 - (i + j) / 18.0};
            s.sh[0] = dc_for_color(color);
            scene.splats.push_back(s);
        }
    }
    return scene;
}

SceneFile make_random_scene(std::uint64_t seed) {
    SceneFile scene;
    scene.sh_degree = 3;
    Rng rng(seed);
    scene.splats.resize(5000);
    for (Splat3D& s : scene.splats) {
        s.mean = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        s.scale = {rng.log_uniform(0.008, 0.045), rng.log_uniform(0.008, 0.045),
                   rng.log_uniform(0.008, 0.045)};
        s.rotation = rng.rotation();
        s.opacity = rng.uniform(0.05, 0.995);
        s.sh[0] = dc_for_color({rng.uniform(), rng.uniform(), rng.uniform()});
        for (int j = 1; j < 16; ++j)
            s.sh[j] = {rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04),
                       rng.uniform(-0.04, 0.04)};
    }
    return scene;
}

SceneFile make_sky_scene(std::uint64_t seed) {
    SceneFile scene;
    scene.sh_degree = 0;
    Rng rng(seed);
    // large dim splats whose color sits far above 1; against a white
    // background their faint tails still carry visible energy
    for (int i = 0; i < 40; ++i) {
        Splat3D s;
        s.mean = {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(0.25, 0.45)};
        double sc = rng.uniform(0.35, 0.75);
        s.scale = {sc, sc, 0.05};
        s.rotation = Quat{};
        s.opacity = rng.uniform(0.03, 0.12);
        double intensity = rng.uniform(2.6, 3.2);
        s.sh[0] = dc_for_color({intensity, intensity, rng.uniform(2.2, 2.8)});
        scene.splats.push_back(s);
    }
    // a small opaque foreground for structure
    for (int i = 0; i < 150; ++i) {
        Splat3D s;
        s.mean = {rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45), rng.uniform(-0.4, 0.0)};
        s.scale = {rng.log_uniform(0.02, 0.06), rng.log_uniform(0.02, 0.06),
                   rng.log_uniform(0.02, 0.06)};
        s.rotation = rng.rotation();
        s.opacity = rng.uniform(0.3, 0.9);
        s.sh[0] = dc_for_color({rng.uniform(), rng.uniform(), rng.uniform()});
        scene.splats.push_back(s);
    }
    return scene;
}

} // namespace

SceneFile generate_synthetic_scene(SyntheticKind kind, std::uint64_t seed) {
    switch (kind) {
        case SyntheticKind::Grid: return make_grid_scene();
        case SyntheticKind::Random: return make_random_scene(seed);
        case SyntheticKind::OverexposedSky: return make_sky_scene(seed);
    }
    throw std::invalid_argument("unknown synthetic scene kind");
}

std::vector<Camera> orbit_cameras(int count, int width, int height, double fov_deg,
                                  double radius, double elevation) {
    std::vector<Camera> cams;
    double focal = 0.5 * width / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
    for (int i = 0; i < count; ++i) {
        double theta = 2.0 * std::numbers::pi * i / std::max(count, 1) - 0.5 * std::numbers::pi;
        Vec3 pos{radius * std::cos(theta), elevation, radius * std::sin(theta)};
        Vec3 fwd = (Vec3{0, 0, 0} - pos).normalized();
        Vec3 right = Vec3{0, 1, 0}.cross(fwd).normalized();
        Vec3 up = fwd.cross(right);
        Camera c;
        c.id = i;
        c.width = width;
        c.height = height;
        c.fx = c.fy = focal;
        c.cx = width / 2.0;
        c.cy = height / 2.0;
        for (int k = 0; k < 3; ++k) {
            c.rotation(0, k) = (k == 0 ? right.x : k == 1 ? right.y : right.z);
            c.rotation(1, k) = (k == 0 ? up.x : k == 1 ? up.y : up.z);
            c.rotation(2, k) = (k == 0 ? fwd.x : k == 1 ? fwd.y : fwd.z);
        }
        c.translation = c.rotation * pos * -1.0;
        cams.push_back(c);
    }
    return cams;
}

// ----------------------------------------------------------------- png

Image8 quantize_framebuffer(const Framebuffer& fb, const Vec3& background) {
    Image8 img;
    img.width = fb.width;
    img.height = fb.height;
    img.rgb.resize(3ull * fb.width * fb.height);
    const double bg[3] = {background.x, background.y, background.z};
    for (std::size_t i = 0; i < fb.transmittance.size(); ++i) {
        double t = fb.transmittance[i];
        for (int ch = 0; ch < 3; ++ch) {
            double v = fb.rgb[3 * i + ch] + t * bg[ch];
            v = std::clamp(v, 0.0, 1.0);
            img.rgb[3 * i + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return img;
}

void write_png(const Image8& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("png encode failed for '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + 3ull * y * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_png(const Framebuffer& fb, const std::string& path, const Vec3& background) {
    write_png(quantize_framebuffer(fb, background), path);
}

Image8 read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError("png decode failed for '" + path + "'");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Image8 img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.rgb.resize(3ull * img.width * img.height);
    for (int y = 0; y < img.height; ++y)
        png_read_row(png, img.rgb.data() + 3ull * y * img.width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

} // namespace polysplat
