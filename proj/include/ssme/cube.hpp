#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ssme {

/// In-memory hyperspectral scene. Samples are stored band-sequential with
/// row-major pixel order: data[b*height*width + row*width + col].
struct HyperCube {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<double> data;
    std::vector<double> wavelengths;  // empty or exactly `bands` entries, strictly increasing

    int pixels() const { return height * width; }

    double at(int band, int row, int col) const {
        return data[static_cast<std::size_t>(band) * pixels() + static_cast<std::size_t>(row) * width + col];
    }
    double& at(int band, int row, int col) {
        return data[static_cast<std::size_t>(band) * pixels() + static_cast<std::size_t>(row) * width + col];
    }

    /// Throws if any structural invariant is broken (dimension/payload
    /// mismatch, non-finite sample, bad wavelength table).
    void validate() const;
};

/// Per-pixel class ids; 0 is reserved for unlabeled background.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> labels;  // row-major

    int pixels() const { return height * width; }
    std::uint16_t at(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * width + col];
    }

    /// Highest class id present.
    int num_classes() const;

    /// Count per class id, index 0..num_classes().
    std::vector<std::int64_t> histogram() const;

    /// Rejects dimension mismatches and gaps in the id set {0..C}.
    void validate() const;
};

/// D x N matrix view of a cube: column n is the spectrum of the pixel with
/// linear index n = row*width + col.
struct SpectralMatrix {
    Eigen::MatrixXd X;  // bands x pixels

    int bands() const { return static_cast<int>(X.rows()); }
    int pixels() const { return static_cast<int>(X.cols()); }
};

enum class Interleave { bsq, bil, bip };

/// Loads an ENVI-style cube: ASCII `key = value` header next to a flat
/// binary payload. Required keys: samples, lines, bands, interleave,
/// data type (2 = int16, 12 = uint16, 4 = float32), byte order.
HyperCube load_cube(const std::string& header_path);

/// Writes a cube in the same convention; used by `synth` and by tests.
void write_cube(const HyperCube& cube, const std::string& header_path,
                Interleave interleave = Interleave::bsq, int envi_data_type = 4,
                int byte_order = 0);

/// Loads a label raster: P2/P5 portable graymap, or flat little-endian
/// uint16 with a 3-line ASCII sidecar (width / height / max_id) at
/// `path + ".hdr"`.
LabelMap load_labels(const std::string& path);

void write_labels_pgm(const LabelMap& labels, const std::string& path, bool ascii = false);
void write_labels_raw(const LabelMap& labels, const std::string& path);

SpectralMatrix flatten(const HyperCube& cube);
HyperCube unflatten(const SpectralMatrix& X, int height, int width);

/// Per-band min-max scaling to [0,1]; constant bands map to zero.
HyperCube normalize_bands(const HyperCube& cube);

/// Deterministic labeled test scene: the image is partitioned into a grid of
/// `classes` rectangles, each with its own smooth spectral signature, plus
/// i.i.d. Gaussian noise of standard deviation `noise_sigma`.
struct SyntheticScene {
    HyperCube cube;
    LabelMap labels;
};
SyntheticScene synth_cube(int height, int width, int classes, int bands,
                          double noise_sigma, std::uint64_t seed);

}  // namespace ssme
