#include "dcscan/routes.hpp"

#include <algorithm>
#include <numeric>

namespace dcscan {

std::string to_string(ScanDirection d) {
    switch (d) {
        case ScanDirection::HFwd: return "h-fwd";
        case ScanDirection::HBwd: return "h-bwd";
        case ScanDirection::VFwd: return "v-fwd";
        case ScanDirection::VBwd: return "v-bwd";
        case ScanDirection::DFwd: return "d-fwd";
        case ScanDirection::DBwd: return "d-bwd";
        case ScanDirection::ADFwd: return "ad-fwd";
        case ScanDirection::ADBwd: return "ad-bwd";
    }
    return "?";
}

std::array<ScanDirection, 4> route_set_directions(RouteSetKind kind) {
    if (kind == RouteSetKind::HV)
        return {ScanDirection::HFwd, ScanDirection::HBwd, ScanDirection::VFwd,
                ScanDirection::VBwd};
    return {ScanDirection::DFwd, ScanDirection::DBwd, ScanDirection::ADFwd,
            ScanDirection::ADBwd};
}

std::string to_string(RouteSetKind kind) { return kind == RouteSetKind::HV ? "hv" : "da"; }

RouteSetKind route_set_from_string(const std::string& s) {
    if (s == "hv") return RouteSetKind::HV;
    if (s == "da") return RouteSetKind::DA;
    throw std::invalid_argument("route set must be 'hv' or 'da', got '" + s + "'");
}

RoutePermutation route_order(ScanDirection dir, std::size_t h, std::size_t w) {
    check_arg(h >= 1 && w >= 1, "route_order: grid extents must be >= 1");
    RoutePermutation p;
    p.h = h;
    p.w = w;
    p.order.resize(h * w);
    auto fill_sorted = [&](auto key) {
        std::iota(p.order.begin(), p.order.end(), 0);
        std::stable_sort(p.order.begin(), p.order.end(), [&](std::size_t a, std::size_t b) {
            return key(a) < key(b);
        });
    };
    switch (dir) {
        case ScanDirection::HFwd:
        case ScanDirection::HBwd:
            std::iota(p.order.begin(), p.order.end(), 0);
            break;
        case ScanDirection::VFwd:
        case ScanDirection::VBwd: {
            std::size_t i = 0;
            for (std::size_t c = 0; c < w; ++c)
                for (std::size_t r = 0; r < h; ++r) p.order[i++] = r * w + c;
            break;
        }
        case ScanDirection::DFwd:
        case ScanDirection::DBwd:
            // ascending anti-diagonal groups r+c, ties by ascending row
            fill_sorted([&](std::size_t idx) {
                std::size_t r = idx / w, c = idx % w;
                return std::pair<std::size_t, std::size_t>(r + c, r);
            });
            break;
        case ScanDirection::ADFwd:
        case ScanDirection::ADBwd:
            fill_sorted([&](std::size_t idx) {
                std::size_t r = idx / w, c = idx % w;
                return std::pair<std::size_t, std::size_t>(r + (w - 1 - c), r);
            });
            break;
    }
    bool bwd = dir == ScanDirection::HBwd || dir == ScanDirection::VBwd ||
               dir == ScanDirection::DBwd || dir == ScanDirection::ADBwd;
    if (bwd) std::reverse(p.order.begin(), p.order.end());
    return p;
}

namespace {

std::size_t grid_cells(const RoutePermutation& perm, const Tensor& t, bool as_grid) {
    bool batched = t.rank() == (as_grid ? 4u : 3u);
    check_arg(batched || t.rank() == (as_grid ? 3u : 2u),
              as_grid ? "apply_route: grid must be [H,W,C] or [B,H,W,C]"
                      : "invert_route: seq must be [L,C] or [B,L,C]");
    if (as_grid) {
        std::size_t hh = t.extent(batched ? 1 : 0), ww = t.extent(batched ? 2 : 1);
        check_arg(hh == perm.h && ww == perm.w, "apply_route: grid extents do not match route");
    } else {
        check_arg(t.extent(batched ? 1 : 0) == perm.h * perm.w,
                  "invert_route: sequence length does not match route");
    }
    return perm.h * perm.w;
}

}  // namespace

Tensor apply_route(const RoutePermutation& perm, const Tensor& grid) {
    std::size_t cells = grid_cells(perm, grid, true);
    bool batched = grid.rank() == 4;
    std::size_t c = grid.shape().back();
    Shape flat = batched ? Shape{grid.extent(0), cells, c} : Shape{cells, c};
    return gather_rows(reshape(grid, flat), perm.order);
}

Tensor invert_route(const RoutePermutation& perm, const Tensor& seq) {
    grid_cells(perm, seq, false);
    bool batched = seq.rank() == 3;
    Tensor flat = scatter_rows(seq, perm.order);
    std::size_t c = seq.shape().back();
    Shape grid_shape =
        batched ? Shape{seq.extent(0), perm.h, perm.w, c} : Shape{perm.h, perm.w, c};
    return reshape(flat, grid_shape);
}

Ss2dResult ss2d_forward(RouteSetKind kind, std::array<SsmParams, 4>& params,
                        const Tensor& grid) {
    bool batched = grid.rank() == 4;
    check_arg(batched || grid.rank() == 3, "ss2d: grid must be [H,W,C] or [B,H,W,C]");
    std::size_t h = grid.extent(batched ? 1 : 0);
    std::size_t w = grid.extent(batched ? 2 : 1);
    auto dirs = route_set_directions(kind);
    Ss2dResult res;
    for (std::size_t k = 0; k < 4; ++k) {
        RoutePermutation perm = route_order(dirs[k], h, w);
        Tensor seq = apply_route(perm, grid);
        Tensor y = selective_scan(params[k], s6_parameterize(params[k], seq));
        res.route_feats[k] = invert_route(perm, y);
        res.out = k == 0 ? res.route_feats[k] : add(res.out, res.route_feats[k]);
    }
    return res;
}

}  // namespace dcscan
