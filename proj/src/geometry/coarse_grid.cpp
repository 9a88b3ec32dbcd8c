#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace nlmc::geometry {

CoarseGrid::CoarseGrid(const Rect& domain, int nx, int ny) : domain_(domain), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) {
    throw InputError(fmt::format("coarse grid needs positive counts, got {}x{}", nx, ny));
  }
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw InputError("coarse grid needs a rectangle with positive width and height");
  }
}

Rect CoarseGrid::rect(int i) const {
  const double hx = domain_.width() / nx_;
  const double hy = domain_.height() / ny_;
  const int cx = ix(i);
  const int cy = iy(i);
  return {domain_.x0 + cx * hx, domain_.y0 + cy * hy,
          cx + 1 == nx_ ? domain_.x1 : domain_.x0 + (cx + 1) * hx,
          cy + 1 == ny_ ? domain_.y1 : domain_.y0 + (cy + 1) * hy};
}

std::optional<int> CoarseGrid::cell_containing(Point p) const {
  const double tol = 1e-12 * domain_.diameter();
  if (!domain_.contains(p, tol)) return std::nullopt;
  const int cx = std::clamp(static_cast<int>(std::floor((p.x - domain_.x0) / domain_.width() * nx_)), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor((p.y - domain_.y0) / domain_.height() * ny_)), 0, ny_ - 1);
  return index(cx, cy);
}

CoarseGrid build_coarse_grid(const FineMesh& mesh, const FractureGeometry& fractures,
                             const FractureMesh& fracture_mesh, int nx_c, int ny_c) {
  CoarseGrid grid(mesh.bounding_box(), nx_c, ny_c);
  const Rect box = mesh.bounding_box();
  if (std::abs(mesh.total_area() - box.area()) > 1e-10 * box.area()) {
    throw GeometryError(fmt::format(
        "coarse partition check failed: mesh area {:.17g} differs from its bounding rectangle {:.17g}",
        mesh.total_area(), box.area()));
  }

  const int nc = grid.num_cells();
  grid.fine_cells_.assign(nc, {});
  grid.pieces_.assign(nc, {});
  grid.fragments_in_.assign(nc, {});

  grid.cell_of_fine_.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto owner = grid.cell_containing(mesh.cell_centroid(static_cast<int>(c)));
    if (!owner) {
      throw GeometryError(fmt::format("fine cell {} centroid lies outside every coarse cell", c));
    }
    grid.cell_of_fine_[c] = *owner;
    grid.fine_cells_[*owner].push_back(static_cast<int>(c));
  }

  grid.cell_of_piece_.resize(fracture_mesh.size());
  grid.fragment_of_piece_.assign(fracture_mesh.size(), -1);
  for (std::size_t k = 0; k < fracture_mesh.size(); ++k) {
    const auto owner = grid.cell_containing(fracture_mesh.pieces[k].geometry.midpoint());
    if (!owner) {
      throw GeometryError(fmt::format("fracture piece {} midpoint lies outside every coarse cell", k));
    }
    grid.cell_of_piece_[k] = *owner;
    grid.pieces_[*owner].push_back(static_cast<int>(k));
  }

  const double sliver = kFragmentSliver * mesh.diameter();
  for (int i = 0; i < nc; ++i) {
    std::map<int, Fragment> by_network;
    for (int k : grid.pieces_[i]) {
      const auto& piece = fracture_mesh.pieces[k];
      auto& frag = by_network[fractures.network[piece.segment]];
      frag.cell = i;
      frag.network = fractures.network[piece.segment];
      frag.measure += piece.length;
      frag.pieces.push_back(k);
    }
    for (auto& [network, frag] : by_network) {
      if (frag.measure < sliver) continue;
      const int id = static_cast<int>(grid.fragments_.size());
      for (int k : frag.pieces) grid.fragment_of_piece_[k] = id;
      grid.fragments_in_[i].push_back(id);
      grid.fragments_.push_back(std::move(frag));
    }
  }
  return grid;
}

Oversample oversample(const CoarseGrid& grid, int i, int layers) {
  if (i < 0 || i >= grid.num_cells()) {
    throw InputError(fmt::format("coarse cell index {} out of range [0, {})", i, grid.num_cells()));
  }
  if (layers < 1) throw InputError(fmt::format("oversampling needs at least one layer, got {}", layers));

  Oversample out;
  out.center = i;
  out.layers = layers;
  const int cx = grid.ix(i);
  const int cy = grid.iy(i);
  const int x0 = std::max(0, cx - layers);
  const int x1 = std::min(grid.nx() - 1, cx + layers);
  const int y0 = std::max(0, cy - layers);
  const int y1 = std::min(grid.ny() - 1, cy + layers);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const int j = grid.index(x, y);
      out.coarse_cells.push_back(j);
      const auto cells = grid.fine_cells(j);
      out.fine_cells.insert(out.fine_cells.end(), cells.begin(), cells.end());
      const auto pieces = grid.pieces(j);
      out.pieces.insert(out.pieces.end(), pieces.begin(), pieces.end());
      const auto frags = grid.fragments_in(j);
      out.fragments.insert(out.fragments.end(), frags.begin(), frags.end());
    }
  }
  std::sort(out.fine_cells.begin(), out.fine_cells.end());
  std::sort(out.pieces.begin(), out.pieces.end());
  std::sort(out.fragments.begin(), out.fragments.end());
  return out;
}

std::vector<int> Oversample::global_dofs(int num_matrix_cells) const {
  std::vector<int> dofs(fine_cells);
  dofs.reserve(num_local_dofs());
  for (int k : pieces) dofs.push_back(num_matrix_cells + k);
  return dofs;
}

std::optional<int> Oversample::local_of_cell(int fine_cell) const {
  auto it = std::lower_bound(fine_cells.begin(), fine_cells.end(), fine_cell);
  if (it == fine_cells.end() || *it != fine_cell) return std::nullopt;
  return static_cast<int>(it - fine_cells.begin());
}

std::optional<int> Oversample::local_of_piece(int piece) const {
  auto it = std::lower_bound(pieces.begin(), pieces.end(), piece);
  if (it == pieces.end() || *it != piece) return std::nullopt;
  return static_cast<int>(fine_cells.size() + (it - pieces.begin()));
}

bool Oversample::contains_coarse(int i) const {
  return std::binary_search(coarse_cells.begin(), coarse_cells.end(), i);
}

}  // namespace nlmc::geometry
