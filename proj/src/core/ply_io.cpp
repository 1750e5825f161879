#include "core/ply_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace sg {

namespace {

    const char* kRequiredProps[] = {"x",     "y",     "z",     "scale_0", "scale_1",
                                    "scale_2", "rot_0", "rot_1", "rot_2",   "rot_3",
                                    "opacity", "red",   "green", "blue"};
    constexpr int kNumRequired = 14;

    [[noreturn]] void parse_fail(const std::filesystem::path& file, size_t offset,
                                 const std::string& msg) {
        throw ParseError(file.string() + ": " + msg + " (at byte " + std::to_string(offset) + ")");
    }

    std::string read_file(const std::filesystem::path& file) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            throw IoError("cannot open " + file.string());
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        return std::move(ss).str();
    }

    // One header line ending at '\n'; returns the line without the newline and
    // advances `pos` past it.
    std::string next_line(const std::string& data, size_t& pos,
                          const std::filesystem::path& file) {
        const size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) {
            parse_fail(file, pos, "unterminated header line");
        }
        std::string line = data.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        pos = nl + 1;
        return line;
    }

    float read_f32le(const char* p) {
        uint32_t bits;
        std::memcpy(&bits, p, 4);
        float out;
        std::memcpy(&out, &bits, 4);
        return out;
    }

} // namespace

std::vector<Gaussian> load_gaussian_ply(const std::filesystem::path& file,
                                        int default_feature_dim) {
    const std::string data = read_file(file);
    size_t pos = 0;

    if (next_line(data, pos, file) != "ply") {
        parse_fail(file, 0, "not a PLY file (missing 'ply' magic)");
    }
    {
        const size_t line_off = pos;
        if (next_line(data, pos, file) != "format binary_little_endian 1.0") {
            parse_fail(file, line_off, "expected 'format binary_little_endian 1.0'");
        }
    }

    long vertex_count = -1;
    std::vector<std::string> props;
    bool in_vertex_element = false;
    size_t header_end = 0;
    while (true) {
        const size_t line_off = pos;
        if (pos >= data.size()) {
            parse_fail(file, pos, "header missing 'end_header'");
        }
        const std::string line = next_line(data, pos, file);
        if (line == "end_header") {
            header_end = pos;
            break;
        }
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) {
            continue;
        }
        if (tok == "element") {
            std::string name;
            long count = -1;
            ls >> name >> count;
            if (name != "vertex") {
                parse_fail(file, line_off, "unsupported element '" + name + "'");
            }
            if (count < 0) {
                parse_fail(file, line_off, "bad vertex count");
            }
            vertex_count = count;
            in_vertex_element = true;
            continue;
        }
        if (tok == "property") {
            if (!in_vertex_element) {
                parse_fail(file, line_off, "property before element declaration");
            }
            std::string type, name;
            ls >> type >> name;
            if (type == "list") {
                parse_fail(file, line_off, "list properties are not supported");
            }
            if (type != "float" && type != "float32") {
                parse_fail(file, line_off,
                           "property '" + name + "' must be float32, got '" + type + "'");
            }
            props.push_back(name);
            continue;
        }
        parse_fail(file, line_off, "unrecognized header line '" + line + "'");
    }

    if (vertex_count < 0) {
        parse_fail(file, header_end, "missing 'element vertex' declaration");
    }
    if (vertex_count == 0) {
        throw ParseError(file.string() + ": scene contains zero Gaussians");
    }

    // Property layout: the 14 required names in order, then feat_0..feat_{D-1}.
    for (int i = 0; i < kNumRequired; ++i) {
        if (static_cast<size_t>(i) >= props.size() || props[i] != kRequiredProps[i]) {
            const std::string got =
                static_cast<size_t>(i) < props.size() ? "'" + props[i] + "'" : "nothing";
            parse_fail(file, header_end,
                       std::string("missing required property '") + kRequiredProps[i] +
                           "' (found " + got + " at position " + std::to_string(i) + ")");
        }
    }
    int feature_dim = 0;
    for (size_t i = kNumRequired; i < props.size(); ++i) {
        const std::string expect = "feat_" + std::to_string(i - kNumRequired);
        if (props[i] != expect) {
            parse_fail(file, header_end,
                       "unexpected property '" + props[i] + "' (expected '" + expect + "')");
        }
        ++feature_dim;
    }
    const bool has_features = feature_dim > 0;
    if (!has_features) {
        feature_dim = default_feature_dim;
    }

    const size_t stride = props.size() * 4;
    const size_t need = header_end + stride * static_cast<size_t>(vertex_count);
    if (data.size() < need) {
        parse_fail(file, data.size(),
                   "payload truncated: need " + std::to_string(need) + " bytes, have " +
                       std::to_string(data.size()));
    }

    std::vector<Gaussian> out;
    out.reserve(static_cast<size_t>(vertex_count));
    for (long v = 0; v < vertex_count; ++v) {
        const size_t base = header_end + stride * static_cast<size_t>(v);
        float vals[kNumRequired];
        for (int i = 0; i < kNumRequired; ++i) {
            vals[i] = read_f32le(data.data() + base + 4 * i);
            if (!std::isfinite(vals[i])) {
                parse_fail(file, base + 4 * i,
                           std::string("non-finite value in property '") + kRequiredProps[i] +
                               "' of vertex " + std::to_string(v));
            }
        }
        Gaussian g;
        g.position = Eigen::Vector3f(vals[0], vals[1], vals[2]);
        for (int i = 0; i < 3; ++i) {
            if (!(vals[3 + i] > 0.0f)) {
                parse_fail(file, base + 4 * (3 + i),
                           "scale_" + std::to_string(i) + " of vertex " + std::to_string(v) +
                               " must be positive");
            }
        }
        g.set_scale(Eigen::Vector3f(vals[3], vals[4], vals[5]));
        Eigen::Quaternionf q(vals[6], vals[7], vals[8], vals[9]); // (w,x,y,z)
        const float norm = q.norm();
        if (!(norm > 1e-12f)) {
            parse_fail(file, base + 4 * 6,
                       "zero-norm quaternion in vertex " + std::to_string(v));
        }
        g.rotation = q.normalized();
        if (vals[10] < 0.0f || vals[10] > 1.0f) {
            parse_fail(file, base + 4 * 10,
                       "opacity of vertex " + std::to_string(v) + " outside [0,1]");
        }
        g.set_opacity(vals[10]);
        g.color = Eigen::Vector3f(vals[11], vals[12], vals[13]);
        g.feature = Eigen::VectorXf::Zero(feature_dim);
        if (has_features) {
            for (int d = 0; d < feature_dim; ++d) {
                const float f = read_f32le(data.data() + base + 4 * (kNumRequired + d));
                if (!std::isfinite(f)) {
                    parse_fail(file, base + 4 * (kNumRequired + d),
                               "non-finite feature in vertex " + std::to_string(v));
                }
                g.feature[d] = f;
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

void save_gaussian_ply(const std::filesystem::path& file,
                       const std::vector<Gaussian>& gaussians) {
    if (gaussians.empty()) {
        throw InputError("refusing to save an empty scene to " + file.string());
    }
    const int feature_dim = static_cast<int>(gaussians.front().feature.size());

    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << gaussians.size() << "\n";
    for (const char* p : kRequiredProps) {
        out << "property float " << p << "\n";
    }
    for (int d = 0; d < feature_dim; ++d) {
        out << "property float feat_" << d << "\n";
    }
    out << "end_header\n";

    std::vector<float> row(static_cast<size_t>(kNumRequired) + feature_dim);
    for (const Gaussian& g : gaussians) {
        if (static_cast<int>(g.feature.size()) != feature_dim) {
            throw InputError("inconsistent feature dimension while saving " + file.string());
        }
        const Eigen::Vector3f s = g.scale();
        row[0] = g.position.x();
        row[1] = g.position.y();
        row[2] = g.position.z();
        row[3] = s.x();
        row[4] = s.y();
        row[5] = s.z();
        row[6] = g.rotation.w();
        row[7] = g.rotation.x();
        row[8] = g.rotation.y();
        row[9] = g.rotation.z();
        row[10] = g.opacity();
        row[11] = g.color.x();
        row[12] = g.color.y();
        row[13] = g.color.z();
        for (int d = 0; d < feature_dim; ++d) {
            row[kNumRequired + d] = g.feature[d];
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) {
        throw IoError("short write to " + file.string());
    }
}

std::vector<Camera> load_cameras_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    if (!doc.contains("cameras") || !doc["cameras"].is_array()) {
        throw ParseError(file.string() + ": missing 'cameras' array");
    }
    std::vector<Camera> cameras;
    std::vector<int> seen;
    for (const auto& jc : doc["cameras"]) {
        Camera c;
        try {
            c.id = jc.at("id").get<int>();
            c.width = jc.at("width").get<int>();
            c.height = jc.at("height").get<int>();
            c.fx = jc.at("fx").get<float>();
            c.fy = jc.at("fy").get<float>();
            c.cx = jc.at("cx").get<float>();
            c.cy = jc.at("cy").get<float>();
            const auto& m = jc.at("world_to_camera");
            if (!m.is_array() || m.size() != 16) {
                throw ParseError(file.string() + ": camera " + std::to_string(c.id) +
                                 ": world_to_camera must be 16 row-major floats");
            }
            for (int r = 0; r < 4; ++r) {
                for (int col = 0; col < 4; ++col) {
                    c.world_to_camera(r, col) = m[r * 4 + col].get<float>();
                }
            }
            if (jc.contains("z_near")) {
                c.z_near = jc["z_near"].get<float>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(file.string() + ": bad camera entry: " + e.what());
        }
        c.validate();
        if (std::find(seen.begin(), seen.end(), c.id) != seen.end()) {
            throw ParseError(file.string() + ": duplicate camera id " + std::to_string(c.id));
        }
        seen.push_back(c.id);
        cameras.push_back(c);
    }
    return cameras;
}

void save_cameras_json(const std::filesystem::path& file, const std::vector<Camera>& cameras) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Camera& c : cameras) {
        nlohmann::json jc;
        jc["id"] = c.id;
        jc["width"] = c.width;
        jc["height"] = c.height;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        jc["z_near"] = c.z_near;
        std::vector<float> m(16);
        for (int r = 0; r < 4; ++r) {
            for (int col = 0; col < 4; ++col) {
                m[r * 4 + col] = c.world_to_camera(r, col);
            }
        }
        jc["world_to_camera"] = m;
        arr.push_back(jc);
    }
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    out << nlohmann::json{{"cameras", arr}}.dump(2) << "\n";
}

Scene load_scene(const std::filesystem::path& gaussian_file,
                 const std::filesystem::path& camera_file, int default_feature_dim) {
    Scene scene;
    scene.gaussians = load_gaussian_ply(gaussian_file, default_feature_dim);
    scene.cameras = load_cameras_json(camera_file);
    return scene;
}

Mask3D load_mask3d(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    uint32_t count = 0;
    float threshold = 0.0f;
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&threshold), 4);
    if (!in) {
        throw ParseError(file.string() + ": truncated mask header");
    }
    Mask3D mask;
    mask.threshold = threshold;
    mask.soft.resize(count);
    in.read(reinterpret_cast<char*>(mask.soft.data()), static_cast<std::streamsize>(count) * 4);
    if (!in) {
        throw ParseError(file.string() + ": truncated mask payload");
    }
    return mask;
}

void save_mask3d(const std::filesystem::path& file, const Mask3D& mask) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    const uint32_t count = static_cast<uint32_t>(mask.soft.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&mask.threshold), 4);
    out.write(reinterpret_cast<const char*>(mask.soft.data()),
              static_cast<std::streamsize>(mask.soft.size()) * 4);
    if (!out) {
        throw IoError("short write to " + file.string());
    }
}

} // namespace sg
