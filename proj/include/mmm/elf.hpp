#pragma once

#include "mmm/common.hpp"
#include "mmm/rng.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mmm {

constexpr double kBohrPerAngstrom = 1.8897259885789233;
constexpr double kSliceSpacing = 0.25;  // angstrom, fixed along the slice axis (z)
constexpr double kDensityFloor = 1e-10;  // atomic units; below it ELF := 0

struct GridDims {
    int nx = 64, ny = 64, nz = 8;
    double sx = 0.25, sy = 0.25, sz = kSliceSpacing;  // angstrom per voxel

    std::size_t size() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(nx) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(k));
    }
    // Voxel centers; extents in angstrom.
    double x(int i) const { return (i + 0.5) * sx; }
    double y(int j) const { return (j + 0.5) * sy; }
    double z(int k) const { return (k + 0.5) * sz; }
    double extent_x() const { return nx * sx; }
    double extent_y() const { return ny * sy; }
    double extent_z() const { return nz * sz; }

    void validate() const {
        if (nx < 1 || ny < 1 || nz < 1) throw ValidationError("grid dims must be positive");
        if (sx <= 0 || sy <= 0 || sz <= 0) throw ValidationError("grid spacing must be positive");
        if (sz != kSliceSpacing)
            throw ValidationError("slice-axis spacing must be exactly " + format_double(kSliceSpacing) +
                                  " angstrom, got " + format_double(sz));
    }
    bool same_shape(const GridDims& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }
};

// Scalar field on a grid, atomic units, x-fastest storage.
struct ScalarField {
    GridDims grid;
    std::vector<double> values;

    explicit ScalarField(const GridDims& g = {}) : grid(g), values(g.size(), 0.0) {}
    double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }
};

struct VectorField {
    GridDims grid;
    std::vector<double> gx, gy, gz;

    explicit VectorField(const GridDims& g = {})
        : grid(g), gx(g.size(), 0.0), gy(g.size(), 0.0), gz(g.size(), 0.0) {}
};

struct ElfVolume {
    GridDims grid;
    std::vector<double> values;  // in [0,1]

    explicit ElfVolume(const GridDims& g = {}) : grid(g), values(g.size(), 0.0) {}
    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

    void validate() const {
        grid.validate();
        if (values.size() != grid.size()) throw ValidationError("volume payload size mismatch");
        for (double v : values)
            if (!(v >= 0.0 && v <= 1.0))
                throw ValidationError("ELF value " + format_double(v) + " outside [0,1]");
    }
    std::uint64_t checksum() const { return fnv1a(values.data(), values.size()); }
};

struct PseudoAtom {
    std::string element;
    std::array<double, 3> pos{};  // angstrom
    double zeta = 1.0;            // bohr^-1
    double electrons = 1.0;
};

struct PseudoMolecule {
    std::vector<PseudoAtom> atoms;

    void validate() const {
        if (atoms.empty()) throw ValidationError("pseudo-molecule needs at least one atom");
        for (const auto& a : atoms) {
            if (a.zeta <= 0) throw ValidationError("atom zeta must be positive");
            if (a.electrons <= 0) throw ValidationError("atom electron count must be positive");
        }
    }
};

constexpr double kXyMarginAngstrom = 2.0;

// Becke-Edgecombe kernel against the Thomas-Fermi reference. The kinetic
// excess D is clamped at zero, so ELF lands in (0,1]; vacuum voxels below
// the density floor map to 0.
inline ElfVolume elf_kernel(const ScalarField& rho, const VectorField& grad_rho,
                            const ScalarField& tau) {
    if (!rho.grid.same_shape(grad_rho.grid) || !rho.grid.same_shape(tau.grid))
        throw ValidationError("elf_kernel: field grids have mismatched shapes");
    const double cf = 0.3 * std::pow(3.0 * M_PI * M_PI, 2.0 / 3.0);  // Thomas-Fermi constant
    ElfVolume vol(rho.grid);
    for (std::size_t n = 0; n < rho.values.size(); ++n) {
        double r = rho.values[n];
        if (r < 0) throw ValidationError("elf_kernel: negative density");
        if (r <= kDensityFloor) {
            vol.values[n] = 0.0;
            continue;
        }
        double g2 = grad_rho.gx[n] * grad_rho.gx[n] + grad_rho.gy[n] * grad_rho.gy[n] +
                    grad_rho.gz[n] * grad_rho.gz[n];
        double tw = g2 / (8.0 * r);
        double d = std::max(0.0, tau.values[n] - tw);
        double dh = cf * std::pow(r, 5.0 / 3.0);
        double chi = d / dh;
        vol.values[n] = 1.0 / (1.0 + chi * chi);
    }
    return vol;
}

struct PromolecularFields {
    ScalarField rho;
    VectorField grad_rho;
    ScalarField tau;
};

// Superposition of 1s Slater densities. tau is the sum of per-atom von
// Weizsaecker terms (zeta^2 rho_A / 2), exact for each isolated atom. The
// 2 A enclosure margin applies in-plane; along the thin slice axis atoms
// only have to sit at least half a voxel inside the grid.
inline PromolecularFields promolecular_fields(const PseudoMolecule& mol, const GridDims& grid) {
    grid.validate();
    mol.validate();
    for (const auto& a : mol.atoms) {
        if (a.pos[0] < kXyMarginAngstrom || a.pos[0] > grid.extent_x() - kXyMarginAngstrom ||
            a.pos[1] < kXyMarginAngstrom || a.pos[1] > grid.extent_y() - kXyMarginAngstrom)
            throw ValidationError("atom at x=" + format_double(a.pos[0]) + " y=" +
                                  format_double(a.pos[1]) + " violates the in-plane 2 A margin");
        if (a.pos[2] < 0.5 * grid.sz || a.pos[2] > grid.extent_z() - 0.5 * grid.sz)
            throw ValidationError("atom at z=" + format_double(a.pos[2]) + " lies outside the slab");
    }

    PromolecularFields f{ScalarField(grid), VectorField(grid), ScalarField(grid)};
    for (const auto& a : mol.atoms) {
        double amp = a.electrons * a.zeta * a.zeta * a.zeta / M_PI;
        // deltas taken in angstrom first, so a whole-voxel shift of the
        // molecule reproduces bitwise-identical distances
        for (int k = 0; k < grid.nz; ++k) {
            double dz = (grid.z(k) - a.pos[2]) * kBohrPerAngstrom;
            for (int j = 0; j < grid.ny; ++j) {
                double dy = (grid.y(j) - a.pos[1]) * kBohrPerAngstrom;
                for (int i = 0; i < grid.nx; ++i) {
                    double dx = (grid.x(i) - a.pos[0]) * kBohrPerAngstrom;
                    double r2 = dx * dx + dy * dy + dz * dz;
                    double r = std::sqrt(r2);
                    double rho_a = amp * std::exp(-2.0 * a.zeta * r);
                    std::size_t n = grid.index(i, j, k);
                    f.rho.values[n] += rho_a;
                    if (r > 0) {
                        double gscale = -2.0 * a.zeta * rho_a / r;
                        f.grad_rho.gx[n] += gscale * dx;
                        f.grad_rho.gy[n] += gscale * dy;
                        f.grad_rho.gz[n] += gscale * dz;
                    }
                    f.tau.values[n] += 0.5 * a.zeta * a.zeta * rho_a;
                }
            }
        }
    }
    return f;
}

// Deterministic stand-in for a computed molecular geometry: a short bonded
// chain of 3-12 pseudo-atoms near the slab mid-plane.
inline PseudoMolecule sample_pseudo_molecule(int drug_id, std::uint64_t seed, const GridDims& grid) {
    static const std::pair<const char*, double> kElements[] = {
        {"H", 1.0}, {"C", 4.0}, {"N", 5.0}, {"O", 6.0}, {"S", 6.0}};
    Rng rng(mix_seed(seed, 0xe1f0000ull + static_cast<std::uint64_t>(drug_id)));
    double lo_x = kXyMarginAngstrom + 0.2, hi_x = grid.extent_x() - kXyMarginAngstrom - 0.2;
    double lo_y = kXyMarginAngstrom + 0.2, hi_y = grid.extent_y() - kXyMarginAngstrom - 0.2;
    if (lo_x >= hi_x || lo_y >= hi_y)
        throw ValidationError("grid too small to hold a molecule inside the 2 A margin");
    double zmid = 0.5 * grid.extent_z();
    double zband = std::max(0.0, std::min(0.4, 0.5 * grid.extent_z() - 0.5 * grid.sz - 1e-9));

    PseudoMolecule mol;
    long n_atoms = rng.range(3, 12);
    double cx = 0.5 * (lo_x + hi_x) + rng.uniform(-1.0, 1.0);
    double cy = 0.5 * (lo_y + hi_y) + rng.uniform(-1.0, 1.0);
    double x = std::clamp(cx, lo_x, hi_x);
    double y = std::clamp(cy, lo_y, hi_y);
    for (long n = 0; n < n_atoms; ++n) {
        auto& [label, electrons] = kElements[rng.below(5)];
        PseudoAtom a;
        a.element = label;
        a.electrons = electrons;
        a.zeta = rng.uniform(0.9, 2.2);
        a.pos = {x, y, zmid + rng.uniform(-zband, zband)};
        mol.atoms.push_back(a);
        double step = rng.uniform(1.1, 1.6);
        double ang = rng.uniform(0.0, 2.0 * M_PI);
        x = std::clamp(x + step * std::cos(ang), lo_x, hi_x);
        y = std::clamp(y + step * std::sin(ang), lo_y, hi_y);
    }
    return mol;
}

inline ElfVolume synth_elf(int drug_id, std::uint64_t seed, const GridDims& grid = {}) {
    PseudoMolecule mol = sample_pseudo_molecule(drug_id, seed, grid);
    PromolecularFields f = promolecular_fields(mol, grid);
    return elf_kernel(f.rho, f.grad_rho, f.tau);
}

struct Patch {
    Mat tile;   // p x p, tile(py, px)
    int slice;  // z index
    int y0, x0; // top-left voxel of the tile
};

struct PatchSet {
    int drug_id = -1;
    int patch_size = 0;
    GridDims grid;
    std::vector<Patch> patches;
};

// Tiles every slice with p x p patches, zero-padded at the borders,
// ordered row-major by (slice, tile row, tile col).
inline PatchSet extract_patches(const ElfVolume& vol, int p, int drug_id = -1) {
    if (p < 1) throw ValidationError("patch size must be >= 1");
    if (p > std::max(vol.grid.nx, vol.grid.ny))
        throw ValidationError("patch size " + std::to_string(p) + " exceeds slice dims " +
                              std::to_string(vol.grid.nx) + "x" + std::to_string(vol.grid.ny));
    PatchSet set;
    set.drug_id = drug_id;
    set.patch_size = p;
    set.grid = vol.grid;
    int tiles_x = (vol.grid.nx + p - 1) / p;
    int tiles_y = (vol.grid.ny + p - 1) / p;
    set.patches.reserve(static_cast<std::size_t>(vol.grid.nz) * static_cast<std::size_t>(tiles_y) *
                        static_cast<std::size_t>(tiles_x));
    for (int k = 0; k < vol.grid.nz; ++k)
        for (int ty = 0; ty < tiles_y; ++ty)
            for (int tx = 0; tx < tiles_x; ++tx) {
                Patch patch;
                patch.slice = k;
                patch.y0 = ty * p;
                patch.x0 = tx * p;
                patch.tile = Mat::Zero(p, p);
                for (int py = 0; py < p; ++py) {
                    int j = patch.y0 + py;
                    if (j >= vol.grid.ny) break;
                    for (int px = 0; px < p; ++px) {
                        int i = patch.x0 + px;
                        if (i >= vol.grid.nx) break;
                        patch.tile(py, px) = vol.at(i, j, k);
                    }
                }
                set.patches.push_back(std::move(patch));
            }
    return set;
}

inline void write_elfv(const std::filesystem::path& path, const ElfVolume& vol) {
    vol.validate();
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "ELFV1 " << vol.grid.nx << ' ' << vol.grid.ny << ' ' << vol.grid.nz << ' '
        << format_double(vol.grid.sx) << ' ' << format_double(vol.grid.sy) << ' '
        << format_double(vol.grid.sz) << '\n';
    for (std::size_t n = 0; n < vol.values.size(); ++n) {
        out << format_double(vol.values[n]);
        out << ((n % 8 == 7 || n + 1 == vol.values.size()) ? '\n' : ' ');
    }
}

inline ElfVolume read_elfv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string magic;
    GridDims g;
    if (!(in >> magic >> g.nx >> g.ny >> g.nz)) throw LoadError(path.string() + ": truncated header");
    if (magic != "ELFV1") throw LoadError(path.string() + ": bad magic '" + magic + "'");
    std::string sx, sy, sz;
    if (!(in >> sx >> sy >> sz)) throw LoadError(path.string() + ": truncated header");
    g.sx = parse_double(sx);
    g.sy = parse_double(sy);
    g.sz = parse_double(sz);
    g.validate();
    ElfVolume vol(g);
    std::string tok;
    for (std::size_t n = 0; n < vol.values.size(); ++n) {
        if (!(in >> tok))
            throw LoadError(path.string() + ": truncated payload at value " + std::to_string(n) +
                            " of " + std::to_string(vol.values.size()));
        vol.values[n] = parse_double(tok);
    }
    if (in >> tok) throw LoadError(path.string() + ": trailing data after payload");
    vol.validate();
    return vol;
}

}  // namespace mmm
