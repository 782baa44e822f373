#include "ssme/cube.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssme/error.hpp"
#include "ssme/rng.hpp"

namespace fs = std::filesystem;

namespace ssme {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Parses `key = value` lines; a value opening with '{' runs to the matching
// '}', possibly across lines (the ENVI list convention).
std::map<std::string, std::string> parse_kv_header(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t == "ENVI" || t[0] == ';' || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) continue;
        std::string key = lower(trim(t.substr(0, eq)));
        std::string value = trim(t.substr(eq + 1));
        if (!value.empty() && value.front() == '{') {
            while (value.find('}') == std::string::npos && std::getline(in, line)) {
                value += ' ';
                value += trim(line);
            }
            const auto close = value.find('}');
            if (close == std::string::npos)
                throw format_error("header: unterminated '{' in value of key '" + key + "'");
            value = trim(value.substr(1, close - 1));
        }
        kv[key] = value;
    }
    return kv;
}

long require_long(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw format_error("header: missing required key '" + key + "'");
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw format_error("header: key '" + key + "' is not an integer: '" + it->second + "'");
    }
}

std::string find_payload(const std::string& header_path) {
    fs::path hdr(header_path);
    std::vector<fs::path> candidates;
    if (lower(hdr.extension().string()) == ".hdr") candidates.push_back(fs::path(hdr).replace_extension());
    fs::path stem = (lower(hdr.extension().string()) == ".hdr") ? fs::path(hdr).replace_extension() : hdr;
    for (const char* ext : {".img", ".dat", ".raw", ".bsq", ".bil", ".bip"})
        candidates.push_back(fs::path(stem).concat(ext));
    for (const auto& c : candidates)
        if (fs::exists(c) && fs::is_regular_file(c)) return c.string();
    std::string tried;
    for (const auto& c : candidates) tried += " " + c.string();
    throw io_error("cube payload not found; tried:" + tried);
}

void byteswap_buffer(std::vector<char>& buf, std::size_t elem_size) {
    if (elem_size == 1) return;
    for (std::size_t i = 0; i + elem_size <= buf.size(); i += elem_size)
        std::reverse(buf.begin() + i, buf.begin() + i + elem_size);
}

std::size_t src_index(Interleave il, int b, int r, int c, int H, int W, int D) {
    switch (il) {
        case Interleave::bsq:
            return (static_cast<std::size_t>(b) * H + r) * W + c;
        case Interleave::bil:
            return (static_cast<std::size_t>(r) * D + b) * W + c;
        case Interleave::bip:
            return (static_cast<std::size_t>(r) * W + c) * D + b;
    }
    return 0;
}

}  // namespace

void HyperCube::validate() const {
    if (height < 1 || width < 1 || bands < 1)
        throw parameter_error("cube: dimensions must be at least 1x1x1");
    const std::size_t expect = static_cast<std::size_t>(height) * width * bands;
    if (data.size() != expect)
        throw data_error("cube: payload has " + std::to_string(data.size()) + " samples, expected " +
                         std::to_string(expect));
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!std::isfinite(data[i]))
            throw data_error("cube: non-finite sample at offset " + std::to_string(i));
    if (!wavelengths.empty()) {
        if (static_cast<int>(wavelengths.size()) != bands)
            throw format_error("cube: wavelength list has " + std::to_string(wavelengths.size()) +
                               " entries for " + std::to_string(bands) + " bands");
        for (std::size_t i = 1; i < wavelengths.size(); ++i)
            if (!(wavelengths[i] > wavelengths[i - 1]))
                throw format_error("cube: wavelengths must be strictly increasing");
    }
}

HyperCube load_cube(const std::string& header_path) {
    std::ifstream hdr(header_path);
    if (!hdr) throw io_error("cannot open header: " + header_path);
    std::stringstream ss;
    ss << hdr.rdbuf();
    const auto kv = parse_kv_header(ss.str());

    HyperCube cube;
    cube.width = static_cast<int>(require_long(kv, "samples"));
    cube.height = static_cast<int>(require_long(kv, "lines"));
    cube.bands = static_cast<int>(require_long(kv, "bands"));
    if (cube.width < 1 || cube.height < 1 || cube.bands < 1)
        throw format_error("header: samples/lines/bands must be positive");

    const auto il_it = kv.find("interleave");
    if (il_it == kv.end()) throw format_error("header: missing required key 'interleave'");
    Interleave il;
    const std::string il_s = lower(il_it->second);
    if (il_s == "bsq")
        il = Interleave::bsq;
    else if (il_s == "bil")
        il = Interleave::bil;
    else if (il_s == "bip")
        il = Interleave::bip;
    else
        throw format_error("header: unknown interleave '" + il_it->second + "'");

    const long dtype = require_long(kv, "data type");
    std::size_t elem_size;
    switch (dtype) {
        case 2:
        case 12:
            elem_size = 2;
            break;
        case 4:
            elem_size = 4;
            break;
        default:
            throw format_error("header: unsupported data type code " + std::to_string(dtype) +
                               " (supported: 2 = int16, 12 = uint16, 4 = float32)");
    }
    const long byte_order = require_long(kv, "byte order");
    if (byte_order != 0 && byte_order != 1)
        throw format_error("header: byte order must be 0 (little) or 1 (big)");
    long offset = 0;
    if (kv.count("header offset")) offset = require_long(kv, "header offset");

    const std::string payload_path = find_payload(header_path);
    const std::size_t count = static_cast<std::size_t>(cube.width) * cube.height * cube.bands;
    const std::size_t expect_bytes = static_cast<std::size_t>(offset) + count * elem_size;
    const std::uintmax_t actual_bytes = fs::file_size(payload_path);
    if (actual_bytes != expect_bytes)
        throw io_error("cube payload " + payload_path + ": expected " + std::to_string(expect_bytes) +
                       " bytes, found " + std::to_string(actual_bytes));

    std::ifstream bin(payload_path, std::ios::binary);
    if (!bin) throw io_error("cannot open cube payload: " + payload_path);
    bin.seekg(offset);
    std::vector<char> raw(count * elem_size);
    bin.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!bin) throw io_error("short read from cube payload: " + payload_path);
    if (byte_order == 1) byteswap_buffer(raw, elem_size);

    // Decode in source order, then reorder to band-sequential.
    std::vector<double> src(count);
    std::size_t first_bad = count;
    if (dtype == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            std::int16_t v;
            std::memcpy(&v, raw.data() + i * 2, 2);
            src[i] = static_cast<double>(v);
        }
    } else if (dtype == 12) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint16_t v;
            std::memcpy(&v, raw.data() + i * 2, 2);
            src[i] = static_cast<double>(v);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float v;
            std::memcpy(&v, raw.data() + i * 4, 4);
            if (!std::isfinite(v) && first_bad == count) first_bad = i;
            src[i] = static_cast<double>(v);
        }
    }
    if (first_bad != count)
        throw data_error("cube payload " + payload_path + ": non-finite sample at element offset " +
                         std::to_string(first_bad));

    cube.data.resize(count);
    const int H = cube.height, W = cube.width, D = cube.bands;
    for (int b = 0; b < D; ++b)
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                cube.data[(static_cast<std::size_t>(b) * H + r) * W + c] = src[src_index(il, b, r, c, H, W, D)];

    if (auto wl = kv.find("wavelength"); wl != kv.end()) {
        std::string list = wl->second;
        std::replace(list.begin(), list.end(), ',', ' ');
        std::istringstream ls(list);
        double v;
        while (ls >> v) cube.wavelengths.push_back(v);
    }

    cube.validate();
    return cube;
}

void write_cube(const HyperCube& cube, const std::string& header_path, Interleave interleave,
                int envi_data_type, int byte_order) {
    cube.validate();
    fs::path hdr(header_path);
    fs::path payload = (lower(hdr.extension().string()) == ".hdr")
                           ? fs::path(hdr).replace_extension(".img")
                           : fs::path(header_path + ".img");
    if (lower(hdr.extension().string()) != ".hdr") hdr = fs::path(header_path);

    std::ofstream out(hdr);
    if (!out) throw io_error("cannot write header: " + hdr.string());
    const char* il_name = interleave == Interleave::bsq ? "bsq" : interleave == Interleave::bil ? "bil" : "bip";
    out << "ENVI\n";
    out << "samples = " << cube.width << "\n";
    out << "lines = " << cube.height << "\n";
    out << "bands = " << cube.bands << "\n";
    out << "header offset = 0\n";
    out << "file type = ENVI Standard\n";
    out << "data type = " << envi_data_type << "\n";
    out << "interleave = " << il_name << "\n";
    out << "byte order = " << byte_order << "\n";
    if (!cube.wavelengths.empty()) {
        out << "wavelength = {";
        for (std::size_t i = 0; i < cube.wavelengths.size(); ++i)
            out << (i ? ", " : " ") << cube.wavelengths[i];
        out << " }\n";
    }
    out.close();

    const int H = cube.height, W = cube.width, D = cube.bands;
    const std::size_t count = cube.data.size();
    std::size_t elem_size;
    std::vector<char> raw;
    switch (envi_data_type) {
        case 2:
        case 12:
            elem_size = 2;
            break;
        case 4:
            elem_size = 4;
            break;
        default:
            throw parameter_error("write_cube: unsupported data type code " + std::to_string(envi_data_type));
    }
    raw.resize(count * elem_size);
    for (int b = 0; b < D; ++b)
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const double v = cube.at(b, r, c);
                const std::size_t s = src_index(interleave, b, r, c, H, W, D);
                if (envi_data_type == 2) {
                    const auto iv = static_cast<std::int16_t>(std::llround(v));
                    std::memcpy(raw.data() + s * 2, &iv, 2);
                } else if (envi_data_type == 12) {
                    const auto uv = static_cast<std::uint16_t>(std::llround(v));
                    std::memcpy(raw.data() + s * 2, &uv, 2);
                } else {
                    const auto fv = static_cast<float>(v);
                    std::memcpy(raw.data() + s * 4, &fv, 4);
                }
            }
    if (byte_order == 1) byteswap_buffer(raw, elem_size);
    std::ofstream bin(payload, std::ios::binary);
    if (!bin) throw io_error("cannot write cube payload: " + payload.string());
    bin.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

int LabelMap::num_classes() const {
    std::uint16_t m = 0;
    for (auto v : labels) m = std::max(m, v);
    return m;
}

std::vector<std::int64_t> LabelMap::histogram() const {
    std::vector<std::int64_t> h(static_cast<std::size_t>(num_classes()) + 1, 0);
    for (auto v : labels) ++h[v];
    return h;
}

void LabelMap::validate() const {
    if (height < 1 || width < 1) throw parameter_error("labels: dimensions must be positive");
    if (labels.size() != static_cast<std::size_t>(height) * width)
        throw format_error("labels: payload has " + std::to_string(labels.size()) + " entries, expected " +
                           std::to_string(static_cast<std::size_t>(height) * width));
    const auto h = histogram();
    for (std::size_t id = 1; id < h.size(); ++id)
        if (h[id] == 0)
            throw format_error("labels: class ids have a gap at id " + std::to_string(id) +
                               " (ids must form a contiguous set)");
}

namespace {

int pgm_next_int(std::istream& in) {
    // Skips whitespace and '#' comments between header tokens.
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw format_error("labels: malformed graymap header");
    return v;
}

LabelMap load_pgm(const std::string& path, bool ascii) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open labels: " + path);
    char magic[2];
    in.read(magic, 2);
    LabelMap lm;
    lm.width = pgm_next_int(in);
    lm.height = pgm_next_int(in);
    const int maxval = pgm_next_int(in);
    if (maxval <= 0 || maxval > 65535)
        throw format_error("labels: graymap maxval " + std::to_string(maxval) + " unsupported (1..65535)");
    if (lm.width < 1 || lm.height < 1) throw format_error("labels: graymap declares non-positive dimensions");
    const std::size_t n = static_cast<std::size_t>(lm.width) * lm.height;
    lm.labels.resize(n);
    if (ascii) {
        for (std::size_t i = 0; i < n; ++i) {
            long v;
            if (!(in >> v)) throw format_error("labels: graymap truncated at sample " + std::to_string(i));
            if (v < 0 || v > maxval) throw format_error("labels: sample exceeds declared maxval");
            lm.labels[i] = static_cast<std::uint16_t>(v);
        }
    } else {
        in.get();  // single whitespace after maxval
        const std::size_t bytes_per = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes_per);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw format_error("labels: graymap payload shorter than declared dimensions");
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = bytes_per == 2 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                              : raw[i];
            lm.labels[i] = static_cast<std::uint16_t>(v);
        }
    }
    lm.validate();
    return lm;
}

LabelMap load_raw_labels(const std::string& path) {
    const std::string sidecar = path + ".hdr";
    std::ifstream sc(sidecar);
    if (!sc)
        throw format_error("labels: " + path + " is not a graymap and no sidecar '" + sidecar + "' exists");
    LabelMap lm;
    long max_id;
    if (!(sc >> lm.width >> lm.height >> max_id))
        throw format_error("labels: sidecar must contain three integers (width, height, max_id)");
    if (max_id > 65535) throw format_error("labels: max_id " + std::to_string(max_id) + " unsupported");
    const std::size_t n = static_cast<std::size_t>(lm.width) * lm.height;
    const std::uintmax_t actual = fs::file_size(path);
    if (actual != n * 2)
        throw format_error("labels: raster is " + std::to_string(actual) + " bytes, sidecar declares " +
                           std::to_string(n * 2));
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> raw(n * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw io_error("short read from labels: " + path);
    lm.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = static_cast<unsigned>(raw[2 * i]) | (static_cast<unsigned>(raw[2 * i + 1]) << 8);
        if (static_cast<long>(v) > max_id)
            throw format_error("labels: id " + std::to_string(v) + " exceeds declared max_id " +
                               std::to_string(max_id));
        lm.labels[i] = static_cast<std::uint16_t>(v);
    }
    lm.validate();
    return lm;
}

}  // namespace

LabelMap load_labels(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw io_error("cannot open labels: " + path);
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();
    if (magic[0] == 'P' && magic[1] == '5') return load_pgm(path, false);
    if (magic[0] == 'P' && magic[1] == '2') return load_pgm(path, true);
    return load_raw_labels(path);
}

void write_labels_pgm(const LabelMap& labels, const std::string& path, bool ascii) {
    labels.validate();
    const int maxval = std::max(1, labels.num_classes());
    if (maxval > 65535) throw parameter_error("labels: ids above 65535 unsupported");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write labels: " + path);
    out << (ascii ? "P2" : "P5") << "\n" << labels.width << " " << labels.height << "\n" << maxval << "\n";
    if (ascii) {
        for (std::size_t i = 0; i < labels.labels.size(); ++i)
            out << labels.labels[i] << ((i + 1) % 16 == 0 ? "\n" : " ");
        out << "\n";
    } else if (maxval > 255) {
        for (auto v : labels.labels) {
            const unsigned char hi = static_cast<unsigned char>(v >> 8), lo = static_cast<unsigned char>(v & 0xff);
            out.put(static_cast<char>(hi));
            out.put(static_cast<char>(lo));
        }
    } else {
        for (auto v : labels.labels) out.put(static_cast<char>(v));
    }
}

void write_labels_raw(const LabelMap& labels, const std::string& path) {
    labels.validate();
    std::ofstream sc(path + ".hdr");
    if (!sc) throw io_error("cannot write labels sidecar: " + path + ".hdr");
    sc << labels.width << "\n" << labels.height << "\n" << labels.num_classes() << "\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write labels: " + path);
    for (auto v : labels.labels) {
        out.put(static_cast<char>(v & 0xff));
        out.put(static_cast<char>(v >> 8));
    }
}

SpectralMatrix flatten(const HyperCube& cube) {
    cube.validate();
    SpectralMatrix m;
    // Band-sequential storage is exactly a row-major D x N matrix.
    m.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cube.data.data(), cube.bands, cube.pixels());
    return m;
}

HyperCube unflatten(const SpectralMatrix& X, int height, int width) {
    if (height < 1 || width < 1) throw parameter_error("unflatten: dimensions must be positive");
    if (static_cast<std::int64_t>(height) * width != X.pixels())
        throw parameter_error("unflatten: " + std::to_string(height) + "x" + std::to_string(width) +
                              " does not match " + std::to_string(X.pixels()) + " pixels");
    HyperCube cube;
    cube.height = height;
    cube.width = width;
    cube.bands = X.bands();
    cube.data.resize(static_cast<std::size_t>(X.bands()) * X.pixels());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cube.data.data(), X.bands(), X.pixels()) = X.X;
    return cube;
}

HyperCube normalize_bands(const HyperCube& cube) {
    cube.validate();
    HyperCube out = cube;
    const std::size_t n = static_cast<std::size_t>(cube.pixels());
    for (int b = 0; b < cube.bands; ++b) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = cube.data[b * n + i];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i)
            out.data[b * n + i] = range > 0 ? (cube.data[b * n + i] - lo) / range : 0.0;
    }
    return out;
}

SyntheticScene synth_cube(int height, int width, int classes, int bands, double noise_sigma,
                          std::uint64_t seed) {
    if (classes < 2) throw parameter_error("synth: need at least 2 classes");
    if (bands < 2) throw parameter_error("synth: need at least 2 bands");
    if (height < 1 || width < 1) throw parameter_error("synth: dimensions must be positive");
    if (static_cast<std::int64_t>(classes) > static_cast<std::int64_t>(height) * width)
        throw parameter_error("synth: " + std::to_string(classes) + " classes exceed " +
                              std::to_string(static_cast<std::int64_t>(height) * width) + " pixels");
    if (noise_sigma < 0) throw parameter_error("synth: noise_sigma must be non-negative");

    // Pick the most square grid of rectangles whose cell count is `classes`.
    int grid_rows = 0, grid_cols = 0, best = -1;
    for (int a = 1; a <= classes; ++a) {
        if (classes % a != 0) continue;
        const int b = classes / a;
        if (a > height || b > width) continue;
        const int score = -std::abs(a - b);
        if (score > best || (score == best && a < grid_rows)) {
            best = score;
            grid_rows = a;
            grid_cols = b;
        }
    }
    if (grid_rows == 0)
        throw parameter_error("synth: cannot partition " + std::to_string(height) + "x" +
                              std::to_string(width) + " into " + std::to_string(classes) + " rectangles");

    SyntheticScene scene;
    scene.labels.height = height;
    scene.labels.width = width;
    scene.labels.labels.resize(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r) {
        const int gr = std::min(grid_rows - 1, r * grid_rows / height);
        for (int c = 0; c < width; ++c) {
            const int gc = std::min(grid_cols - 1, c * grid_cols / width);
            scene.labels.labels[static_cast<std::size_t>(r) * width + c] =
                static_cast<std::uint16_t>(gr * grid_cols + gc + 1);
        }
    }

    // One smooth signature per class; the per-class frequency and phase keep
    // all pairwise spectral distances strictly positive.
    Eigen::MatrixXd sig(bands, classes);
    for (int c = 0; c < classes; ++c)
        for (int b = 0; b < bands; ++b) {
            const double t = static_cast<double>(b) / (bands - 1);
            sig(b, c) = 0.55 + 0.35 * std::sin(6.283185307179586 * (1.0 + 0.5 * c) * t + 2.4 * c) + 0.04 * c;
        }

    scene.cube.height = height;
    scene.cube.width = width;
    scene.cube.bands = bands;
    scene.cube.data.resize(static_cast<std::size_t>(height) * width * bands);
    Rng rng = named_stream(seed, "synth");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    for (int b = 0; b < bands; ++b)
        for (std::size_t p = 0; p < n; ++p) {
            const int cls = scene.labels.labels[p] - 1;
            const double noise = noise_sigma > 0 ? noise_sigma * rng.normal() : 0.0;
            scene.cube.data[b * n + p] = sig(b, cls) + noise;
        }
    return scene;
}

}  // namespace ssme
