// SPDX-License-Identifier: Apache-2.0
// Text formats for scenes (.gsscene) and cameras (.gscam).
#include "msplat/errors.hpp"
#include "msplat/scene.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msplat {
namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Line {
    int number;
    std::vector<std::string_view> tokens;
};

/// Splits into non-empty logical lines with `#` comments stripped.
std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> lines;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        ++number;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        Line line{number, {}};
        std::size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            std::size_t j = i;
            while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
            if (j > i) line.tokens.push_back(raw.substr(i, j - i));
            i = j;
        }
        if (!line.tokens.empty()) lines.push_back(std::move(line));
        if (end == text.size()) break;
        pos = end + 1;
    }
    return lines;
}

double parse_number(std::string_view tok, int line) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("expected a number, got '" + std::string(tok) + "'", line);
    }
    if (!std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line) + ": non-finite value '" + std::string(tok) + "'");
    }
    return v;
}

long parse_integer(std::string_view tok, int line) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("expected an integer, got '" + std::string(tok) + "'", line);
    }
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

std::string format_scene(const Scene& scene) {
    std::string out = "gsscene v1 N=" + std::to_string(scene.gaussians.size()) + " bg=" +
                      fmt_double(scene.background.x()) + " " + fmt_double(scene.background.y()) + " " +
                      fmt_double(scene.background.z()) + "\n";
    const ParamVector p = pack_params(scene);
    for (std::size_t g = 0; g < scene.gaussians.size(); ++g) {
        for (std::size_t k = 0; k < kParamsPerGaussian; ++k) {
            if (k > 0) out += ' ';
            out += fmt_double(p.values[g * kParamsPerGaussian + k]);
        }
        out += '\n';
    }
    return out;
}

Scene parse_scene(std::string_view text) {
    const auto lines = tokenize(text);
    if (lines.empty()) throw ParseError("empty scene file", 0);

    const Line& head = lines.front();
    if (head.tokens.size() != 6 || head.tokens[0] != "gsscene" || head.tokens[1] != "v1" ||
        !head.tokens[2].starts_with("N=") || !head.tokens[3].starts_with("bg=")) {
        throw ParseError("expected header 'gsscene v1 N=<count> bg=<r> <g> <b>'", head.number);
    }
    const long count = parse_integer(head.tokens[2].substr(2), head.number);
    if (count < 0) throw ParseError("negative gaussian count", head.number);

    Scene scene;
    scene.background = {parse_number(head.tokens[3].substr(3), head.number),
                        parse_number(head.tokens[4], head.number), parse_number(head.tokens[5], head.number)};

    if (lines.size() - 1 != static_cast<std::size_t>(count)) {
        throw ParseError("header declares N=" + std::to_string(count) + " but file has " +
                             std::to_string(lines.size() - 1) + " records",
                         lines.back().number);
    }

    ParamVector params;
    params.values.reserve(static_cast<std::size_t>(count) * kParamsPerGaussian);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const Line& line = lines[i];
        if (line.tokens.size() != kParamsPerGaussian) {
            throw ParseError("expected 14 fields, got " + std::to_string(line.tokens.size()), line.number);
        }
        for (auto tok : line.tokens) params.values.push_back(parse_number(tok, line.number));
    }
    // Raw values are taken verbatim; validate() rejects degenerate quaternions.
    scene.gaussians.resize(static_cast<std::size_t>(count));
    const double* v = params.values.data();
    for (auto& g : scene.gaussians) {
        g.center = {v[0], v[1], v[2]};
        g.rotation = {v[3], v[4], v[5], v[6]};
        g.log_scale = {v[7], v[8], v[9]};
        g.color_logit = {v[10], v[11], v[12]};
        g.opacity_logit = v[13];
        v += kParamsPerGaussian;
    }
    scene.validate();
    return scene;
}

Scene load_scene(const std::filesystem::path& path) { return parse_scene(read_file(path)); }

void save_scene(const Scene& scene, const std::filesystem::path& path) { write_file(path, format_scene(scene)); }

std::string format_camera(const CameraModel& cam) {
    std::string out = "gscam v1\n";
    for (int r = 0; r < 3; ++r) {
        out += fmt_double(cam.rotation(r, 0)) + " " + fmt_double(cam.rotation(r, 1)) + " " +
               fmt_double(cam.rotation(r, 2)) + "\n";
    }
    out += fmt_double(cam.translation.x()) + " " + fmt_double(cam.translation.y()) + " " +
           fmt_double(cam.translation.z()) + "\n";
    out += fmt_double(cam.fx) + " " + fmt_double(cam.fy) + " " + fmt_double(cam.cx) + " " + fmt_double(cam.cy) + " " +
           std::to_string(cam.width) + " " + std::to_string(cam.height) + " " + fmt_double(cam.near_clip) + "\n";
    return out;
}

CameraModel parse_camera(std::string_view text) {
    const auto lines = tokenize(text);
    if (lines.empty() || lines[0].tokens.size() != 2 || lines[0].tokens[0] != "gscam" || lines[0].tokens[1] != "v1") {
        throw ParseError("expected header 'gscam v1'", lines.empty() ? 0 : lines[0].number);
    }
    // Values may be laid out freely across lines after the header.
    std::vector<std::pair<std::string_view, int>> toks;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        for (auto t : lines[i].tokens) toks.emplace_back(t, lines[i].number);
    }
    if (toks.size() != 19) {
        throw ParseError("camera needs 19 values (9 rotation, 3 translation, fx fy cx cy width height near), got " +
                             std::to_string(toks.size()),
                         lines.back().number);
    }
    CameraModel cam;
    for (int k = 0; k < 9; ++k) cam.rotation(k / 3, k % 3) = parse_number(toks[k].first, toks[k].second);
    for (int k = 0; k < 3; ++k) cam.translation[k] = parse_number(toks[9 + k].first, toks[9 + k].second);
    cam.fx = parse_number(toks[12].first, toks[12].second);
    cam.fy = parse_number(toks[13].first, toks[13].second);
    cam.cx = parse_number(toks[14].first, toks[14].second);
    cam.cy = parse_number(toks[15].first, toks[15].second);
    cam.width = static_cast<int>(parse_integer(toks[16].first, toks[16].second));
    cam.height = static_cast<int>(parse_integer(toks[17].first, toks[17].second));
    cam.near_clip = parse_number(toks[18].first, toks[18].second);
    cam.validate();
    return cam;
}

CameraModel load_camera(const std::filesystem::path& path) { return parse_camera(read_file(path)); }

void save_camera(const CameraModel& cam, const std::filesystem::path& path) { write_file(path, format_camera(cam)); }

}  // namespace msplat
