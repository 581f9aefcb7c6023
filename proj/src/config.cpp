#include "cghair/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <type_traits>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cghair/error.h"

namespace cghair {

namespace pt = boost::property_tree;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    const std::string t = boost::trim_copy(s);
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw Error(ErrorCode::InvalidArgument, key + ": not a number: '" + s + "'");
    return v;
}

template <class T>
T parse_uint(const std::string& key, const std::string& s) {
    const std::string t = boost::trim_copy(s);
    T v{};
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw Error(ErrorCode::InvalidArgument, key + ": not a non-negative integer: '" + s + "'");
    return v;
}

std::string fmt_vec(const Vec3& v) { return fmt_double(v.x()) + " " + fmt_double(v.y()) + " " + fmt_double(v.z()); }

Vec3 parse_vec(const std::string& key, const std::string& s) {
    std::vector<std::string> parts;
    const std::string t = boost::trim_copy(s);
    boost::split(parts, t, boost::is_any_of(" \t,"), boost::token_compress_on);
    if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, key + ": expected 3 numbers");
    return Vec3(parse_double(key, parts[0]), parse_double(key, parts[1]), parse_double(key, parts[2]));
}

bool parse_bool(const std::string& key, const std::string& s) {
    const std::string t = boost::to_lower_copy(boost::trim_copy(s));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw Error(ErrorCode::InvalidArgument, key + ": not a boolean: '" + s + "'");
}

// One visitor drives parsing, serialization and the JSON echo, so the three
// can never disagree on keys.
struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

template <class T>
Field field(const std::string& key, T& ref) {
    Field f{key, {}, {}};
    if constexpr (std::is_same_v<T, double>) {
        f.get = [&ref] { return fmt_double(ref); };
        f.set = [&ref, key](const std::string& s) { ref = parse_double(key, s); };
    } else if constexpr (std::is_same_v<T, bool>) {
        f.get = [&ref] { return std::string(ref ? "true" : "false"); };
        f.set = [&ref, key](const std::string& s) { ref = parse_bool(key, s); };
    } else if constexpr (std::is_same_v<T, std::string>) {
        f.get = [&ref] { return ref; };
        f.set = [&ref](const std::string& s) { ref = boost::trim_copy(s); };
    } else if constexpr (std::is_same_v<T, Vec3>) {
        f.get = [&ref] { return fmt_vec(ref); };
        f.set = [&ref, key](const std::string& s) { ref = parse_vec(key, s); };
    } else if constexpr (std::is_same_v<T, int>) {
        f.get = [&ref] { return std::to_string(ref); };
        f.set = [&ref, key](const std::string& s) { ref = static_cast<int>(parse_uint<unsigned>(key, s)); };
    } else {
        f.get = [&ref] { return std::to_string(ref); };
        f.set = [&ref, key](const std::string& s) { ref = parse_uint<T>(key, s); };
    }
    return f;
}

std::vector<Field> fields(PipelineConfig& c) {
    return {
        field("paths.input", c.input),
        field("paths.output", c.output),
        field("general.seed", c.seed),
        field("general.threads", c.threads),
        field("synth.wisps", c.synth.n_wisps),
        field("synth.strands_per_wisp", c.synth.strands_per_wisp),
        field("synth.points_per_strand", c.synth.points_per_strand),
        field("synth.scalp_radius", c.synth.scalp_radius),
        field("synth.wisp_spread", c.synth.wisp_spread),
        field("synth.curl_amplitude", c.synth.curl_amplitude),
        field("synth.curl_frequency", c.synth.curl_frequency),
        field("synth.color_segments", c.color_segments),
        field("ingest.points_per_strand", c.points_per_strand),
        field("cluster.n_c", c.n_c),
        field("cluster.max_iter", c.kmeans_iters),
        field("cards.guide_ctrl", c.cards.guide_ctrl),
        field("cards.card_points", c.cards.card_points),
        field("cards.normal_iters", c.cards.normal_iters),
        field("cards.normal_step", c.cards.normal_step),
        field("cards.smooth_sigma", c.cards.smooth_sigma),
        field("cards.w_min", c.cards.w_min),
        field("cards.eps", c.cards.eps),
        field("uvmap.iters", c.uv_iters),
        field("uvmap.step", c.uv_step),
        field("uvmap.texture_width", c.texture_width),
        field("uvmap.texture_height", c.texture_height),
        field("codebook.n_t", c.n_t),
        field("codebook.k", c.k),
        field("codebook.d", c.d),
        field("codebook.hidden", c.hidden),
        field("codebook.sh_degree", c.sh_degree),
        field("codebook.feature_grid", c.feature_grid),
        field("codebook.initial_opacity", c.initial_opacity),
        field("fit.iters", c.fit.iters),
        field("fit.step", c.fit.step),
        field("fit.logit_step_scale", c.fit.logit_step_scale),
        field("fit.lambda_o", c.fit.lambda_o),
        field("fit.tau_start", c.fit.tau_start),
        field("fit.tau_end", c.fit.tau_end),
        field("fit.gumbel_noise", c.fit.gumbel_noise),
        field("fit.noise_warmup", c.fit.noise_warmup),
        field("fit.chunk", c.fit.chunk),
        field("fit.max_halvings", c.fit.max_halvings),
        field("render.gaussian_radius", c.gaussian_radius),
        field("render.opaque", c.opaque),
        field("render.background", c.background),
    };
}

std::vector<Field> camera_fields(Camera& cam) {
    return {field("position", cam.position), field("look_at", cam.look_at), field("up", cam.up),
            field("fov_y", cam.fov_y),       field("width", cam.width),     field("height", cam.height),
            field("near", cam.near)};
}

std::string fmt_palette(const std::vector<Vec3>& p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "; " : "") + fmt_vec(p[i]);
    return s;
}

std::vector<Vec3> parse_palette(const std::string& s) {
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(";"));
    std::vector<Vec3> out;
    for (const auto& p : parts)
        if (!boost::trim_copy(p).empty()) out.push_back(parse_vec("synth.palette", p));
    return out;
}

}  // namespace

PipelineConfig default_config() {
    PipelineConfig c;
    Camera front;
    front.position = Vec3(0.0, -0.05, 0.8);
    front.look_at = Vec3(0.0, -0.05, 0.0);
    Camera side = front;
    side.position = Vec3(0.8, 0.0, 0.0);
    c.cameras = {front, side};
    return c;
}

void PipelineConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be >= 1");
    };
    if (output.empty()) throw Error(ErrorCode::InvalidArgument, "paths.output is empty");
    positive(synth.n_wisps, "synth.wisps");
    positive(synth.strands_per_wisp, "synth.strands_per_wisp");
    if (synth.points_per_strand < 2) throw Error(ErrorCode::InvalidArgument, "synth.points_per_strand must be >= 2");
    positive(color_segments, "synth.color_segments");
    if (palette.empty()) throw Error(ErrorCode::InvalidArgument, "synth.palette is empty");
    if (points_per_strand < 4) throw Error(ErrorCode::InvalidArgument, "ingest.points_per_strand must be >= 4");
    positive(n_c, "cluster.n_c");
    positive(n_t, "codebook.n_t");
    positive(k, "codebook.k");
    positive(d, "codebook.d");
    positive(hidden, "codebook.hidden");
    positive(texture_width, "uvmap.texture_width");
    positive(texture_height, "uvmap.texture_height");
    positive(feature_grid, "codebook.feature_grid");
    positive(fit.chunk, "fit.chunk");
    if (!(fit.noise_warmup >= 0.0 && fit.noise_warmup <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fit.noise_warmup must lie in [0, 1]");
    if (sh_degree > 3) throw Error(ErrorCode::InvalidArgument, "codebook.sh_degree must be <= 3");
    if (threads < 1) throw Error(ErrorCode::InvalidArgument, "general.threads must be >= 1");
    if (!(gaussian_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "render.gaussian_radius must be positive");
    if (!(fit.tau_start > 0.0 && fit.tau_end > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "fit temperatures must be positive");
    for (const auto& cam : cameras) cam.validate();
}

PipelineConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    PipelineConfig c = default_config();
    // Typos would otherwise fall back to defaults without a word.
    std::set<std::string> known = {"synth.palette", "render.cameras"};
    for (auto& f : fields(c)) known.insert(f.key);
    Camera probe;
    for (const auto& [section, body] : tree) {
        const bool camera = section.rfind("camera", 0) == 0 && section.size() > 6 &&
                            section.find_first_not_of("0123456789", 6) == std::string::npos;
        for (const auto& [key, value] : body) {
            if (camera) {
                bool ok = false;
                for (auto& f : camera_fields(probe)) ok = ok || f.key == key;
                if (ok) continue;
            } else if (known.count(section + "." + key)) {
                continue;
            }
            throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + section + "." + key + "'");
        }
    }
    for (auto& f : fields(c))
        if (auto v = tree.get_optional<std::string>(f.key)) f.set(*v);
    if (auto v = tree.get_optional<std::string>("synth.palette")) c.palette = parse_palette(*v);
    if (auto v = tree.get_optional<std::string>("render.cameras")) {
        const auto n = parse_uint<std::size_t>("render.cameras", *v);
        std::vector<Camera> cams(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string sec = "camera" + std::to_string(i);
            if (i < c.cameras.size()) cams[i] = c.cameras[i];
            for (auto& f : camera_fields(cams[i]))
                if (auto cv = tree.get_optional<std::string>(sec + "." + f.key)) f.set(*cv);
        }
        c.cameras = cams;
    }
    c.synth.seed = c.seed;
    c.fit.seed = c.seed;
    c.fit.threads = c.threads;
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_ini(const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    pt::ptree tree;
    for (auto& f : fields(c)) tree.put(f.key, f.get());
    tree.put("synth.palette", fmt_palette(c.palette));
    tree.put("render.cameras", std::to_string(c.cameras.size()));
    for (std::size_t i = 0; i < c.cameras.size(); ++i)
        for (auto& f : camera_fields(c.cameras[i])) tree.put("camera" + std::to_string(i) + "." + f.key, f.get());
    std::ostringstream out;
    pt::write_ini(out, tree);
    return out.str();
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    nlohmann::json j;
    for (auto& f : fields(c)) {
        const auto dot = f.key.find('.');
        j[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get();
    }
    j["synth"]["palette"] = fmt_palette(c.palette);
    j["render"]["cameras"] = std::to_string(c.cameras.size());
    for (std::size_t i = 0; i < c.cameras.size(); ++i)
        for (auto& f : camera_fields(c.cameras[i])) j["camera" + std::to_string(i)][f.key] = f.get();
    return j;
}

}  // namespace cghair
