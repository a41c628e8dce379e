#include <smpc/two_rooms.hpp>

#include <smpc/forward.hpp>
#include <smpc/norms.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace smpc {

namespace {

/// Subdomain-aligned 1D grid: each span [b_j, b_{j+1}] is split into
/// ceil(len / h) uniform cells so that every breakpoint is a mesh node.
std::vector<double> build_axis(const std::vector<double>& breaks, double h) {
    std::vector<double> xs;
    xs.push_back(breaks.front());
    for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
        const double a = breaks[j];
        const double b = breaks[j + 1];
        const int cells = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-12)));
        for (int c = 1; c <= cells; ++c) xs.push_back(a + (b - a) * c / cells);
        xs.back() = b;  // exact breakpoint
    }
    return xs;
}

/// Material region of a cell, decided by its center.
enum class Region { DoorRegion, Room, Wall };

Region classify(const BenchmarkConfig& cfg, double cx, double cy) {
    if (cx > cfg.wall_x0 && cx < cfg.wall_x1) {
        if (cy > cfg.door_y0 && cy < cfg.door_y1) return Region::DoorRegion;
        return Region::Wall;
    }
    return Region::Room;
}

/// Coefficient row (zeta, kappa) of a region in a given mode (1-based).
/// The door cells behave like the wall while closed (mode 1) and like the
/// rooms while open (mode 2); rooms and wall are mode-independent.
std::pair<double, double> coefficients(const BenchmarkConfig& cfg, Region reg, int mode) {
    switch (reg) {
        case Region::Room: return {cfg.zeta[1], cfg.kappa[1]};
        case Region::Wall: return {cfg.zeta[2], cfg.kappa[2]};
        case Region::DoorRegion:
            if (mode == 1) return {cfg.zeta[0], cfg.kappa[0]};
            return {cfg.zeta[1], cfg.kappa[1]};
    }
    throw std::logic_error("unreachable region");
}

struct TriangleGeometry {
    int v[3];        ///< global node indices.
    double area;
    double gx[3];    ///< gradient of each hat function, x component.
    double gy[3];    ///< gradient of each hat function, y component.
};

TriangleGeometry make_triangle(const std::array<double, 3>& px,
                               const std::array<double, 3>& py,
                               const std::array<int, 3>& vids) {
    TriangleGeometry tri{};
    for (int i = 0; i < 3; ++i) tri.v[i] = vids[i];
    const double det = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0]);
    tri.area = 0.5 * std::abs(det);
    // grad phi_i = (b_i, c_i) / (2 area) with the standard edge differences.
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        const int k = (i + 2) % 3;
        tri.gx[i] = (py[j] - py[k]) / det;
        tri.gy[i] = (px[k] - px[j]) / det;
    }
    return tri;
}

}  // namespace

BenchmarkAssembly assemble_two_rooms(const BenchmarkConfig& cfg) {
    BenchmarkAssembly out;
    MeshInfo& mesh = out.mesh;
    mesh.xs = build_axis({0.0, cfg.wall_x0, cfg.wall_x1, cfg.Lx}, cfg.target_h);
    mesh.ys = build_axis({0.0, cfg.door_y0, cfg.door_y1, cfg.Ly}, cfg.target_h);
    const int nx = mesh.nx();
    const int ny = mesh.ny();
    const int N = nx * ny;
    const int L = 2;
    const int rho = cfg.num_inputs;
    const int p = 2;

    mesh.room1_area = cfg.wall_x0 * cfg.Ly;
    mesh.room2_area = (cfg.Lx - cfg.wall_x1) * cfg.Ly;

    std::vector<std::vector<Triplet>> mass_trip(L), stiff_trip(L);
    Mat C = Mat::Zero(p, N);
    Mat B = Mat::Zero(N, rho);

    const double mass_ref[3][3] = {{2, 1, 1}, {1, 2, 1}, {1, 1, 2}};

    // Volume terms, cell by cell (two triangles per rectangular cell).
    for (int ix = 0; ix + 1 < nx; ++ix) {
        for (int iy = 0; iy + 1 < ny; ++iy) {
            const double x0 = mesh.xs[ix], x1 = mesh.xs[ix + 1];
            const double y0 = mesh.ys[iy], y1 = mesh.ys[iy + 1];
            const Region reg = classify(cfg, 0.5 * (x0 + x1), 0.5 * (y0 + y1));
            const int v00 = mesh.node_index(ix, iy);
            const int v10 = mesh.node_index(ix + 1, iy);
            const int v01 = mesh.node_index(ix, iy + 1);
            const int v11 = mesh.node_index(ix + 1, iy + 1);
            const TriangleGeometry tris[2] = {
                make_triangle({x0, x1, x1}, {y0, y0, y1}, {v00, v10, v11}),
                make_triangle({x0, x1, x0}, {y0, y1, y1}, {v00, v11, v01}),
            };
            for (const TriangleGeometry& tri : tris) {
                for (int mode = 1; mode <= L; ++mode) {
                    const auto [zeta, kappa] = coefficients(cfg, reg, mode);
                    auto& mt = mass_trip[mode - 1];
                    auto& st = stiff_trip[mode - 1];
                    for (int i = 0; i < 3; ++i) {
                        for (int j = 0; j < 3; ++j) {
                            const double mij = tri.area / 12.0 * mass_ref[i][j];
                            mt.emplace_back(tri.v[i], tri.v[j], zeta * mij);
                            // a(phi_j, phi_i): diffusion + convection + reaction.
                            double aij = kappa * tri.area *
                                         (tri.gx[i] * tri.gx[j] + tri.gy[i] * tri.gy[j]);
                            aij += (cfg.wind_x * tri.gx[j]) * tri.area / 3.0;
                            aij += cfg.reaction * mij;
                            st.emplace_back(tri.v[i], tri.v[j], aij);
                        }
                    }
                }
                // Output rows: mean temperature of each room.
                int room = -1;
                const double cx = (mesh.xs[ix] + mesh.xs[ix + 1]) * 0.5;
                if (cx < cfg.wall_x0) room = 0;
                else if (cx > cfg.wall_x1) room = 1;
                if (room >= 0) {
                    const double area = room == 0 ? mesh.room1_area : mesh.room2_area;
                    for (int i = 0; i < 3; ++i)
                        C(room, tri.v[i]) += tri.area / 3.0 / area;
                }
            }
        }
    }

    // Boundary terms.  The outer Robin coefficient acts on every boundary
    // edge except the control boundary (the left edge x = 0), where the
    // input channels live instead.
    auto add_robin_edge = [&](int n0, int n1, double len) {
        for (int mode = 0; mode < L; ++mode) {
            auto& st = stiff_trip[mode];
            st.emplace_back(n0, n0, cfg.gamma_out * len / 3.0);
            st.emplace_back(n1, n1, cfg.gamma_out * len / 3.0);
            st.emplace_back(n0, n1, cfg.gamma_out * len / 6.0);
            st.emplace_back(n1, n0, cfg.gamma_out * len / 6.0);
        }
    };
    for (int ix = 0; ix + 1 < nx; ++ix) {  // bottom and top edges
        const double len = mesh.xs[ix + 1] - mesh.xs[ix];
        add_robin_edge(mesh.node_index(ix, 0), mesh.node_index(ix + 1, 0), len);
        add_robin_edge(mesh.node_index(ix, ny - 1), mesh.node_index(ix + 1, ny - 1), len);
    }
    for (int iy = 0; iy + 1 < ny; ++iy) {  // right edge
        const double len = mesh.ys[iy + 1] - mesh.ys[iy];
        add_robin_edge(mesh.node_index(nx - 1, iy), mesh.node_index(nx - 1, iy + 1), len);
    }

    // Control channels: the left edge splits into `rho` equal segments; each
    // column of B integrates the hat functions over its segment exactly,
    // handling edges that straddle a channel boundary.
    const double channel_len = cfg.Ly / rho;
    for (int iy = 0; iy + 1 < ny; ++iy) {
        const double y0 = mesh.ys[iy];
        const double y1 = mesh.ys[iy + 1];
        const int n0 = mesh.node_index(0, iy);
        const int n1 = mesh.node_index(0, iy + 1);
        for (int ch = 0; ch < rho; ++ch) {
            const double a = std::max(y0, ch * channel_len);
            const double b = std::min(y1, (ch + 1) * channel_len);
            if (b <= a + 1e-14) continue;
            const double mid = 0.5 * (a + b);
            // integral of the two linear hat functions over [a, b]
            B(n0, ch) += (b - a) * (y1 - mid) / (y1 - y0);
            B(n1, ch) += (b - a) * (mid - y0) / (y1 - y0);
        }
    }

    SwitchedOperatorSet& ops = out.ops;
    ops.num_modes = L;
    ops.dim = N;
    ops.num_inputs = rho;
    ops.num_outputs = p;
    ops.M.resize(L);
    ops.A.resize(L);
    ops.B.resize(L);
    ops.C.resize(L);
    for (int mode = 0; mode < L; ++mode) {
        ops.M[mode] = SpMat(N, N);
        ops.M[mode].setFromTriplets(mass_trip[mode].begin(), mass_trip[mode].end());
        ops.A[mode] = SpMat(N, N);
        ops.A[mode].setFromTriplets(stiff_trip[mode].begin(), stiff_trip[mode].end());
        ops.B[mode] = B.sparseView();
        ops.C[mode] = C;
    }
    ops.identity_transitions();
    ops.v_inner = symmetric_part(ops.A[0]);
    return out;
}

Trajectory compute_tracking_target(const SwitchedOperatorSet& ops,
                                   const SwitchingSignal& sig,
                                   const TimeGrid& grid) {
    SystemSolvers solvers(ops);
    Trajectory u(grid, ops.num_inputs);
    for (int k = 0; k < grid.num_nodes; ++k) u.values[k].setOnes();
    const Vec theta0 = Vec::Ones(ops.dim);
    const Trajectory theta = solve_state(solvers, sig, grid, theta0, u);
    return apply_output(ops, sig, theta);
}

}  // namespace smpc
