#include "lamopt/output.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lamopt {

namespace {

std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.precision(15);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void scalar_block(std::ostream& out, const char* name, const std::vector<double>& v) {
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (double x : v) out << x << '\n';
}

}  // namespace

std::vector<double> cell_von_mises(const DisplacementField& u, const DesignState& state,
                                   const IsotropicMaterial<double>& material) {
  const DesignTensors tensors(state, material);
  const Q2Space& space = u.space();
  const Rule2D& rule = space.rule();
  std::vector<double> out(static_cast<std::size_t>(space.mesh().num_cells()));
  for (Index c = 0; c < space.mesh().num_cells(); ++c) {
    double sum = 0;
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d eps = u.strain_at(c, rule.points[q]);
      sum += von_mises(tensors.at(c, q) * to_voigt_strain<double>(eps));
    }
    out[c] = sum / rule.size();
  }
  return out;
}

void write_vtk(const std::filesystem::path& path, const DisplacementField& u,
               const DesignState& state, const IsotropicMaterial<double>& material,
               const ElementIndicators* ind) {
  const QuadMesh& mesh = u.space().mesh();
  std::ofstream out = open_for_writing(path);
  out << "# vtk DataFile Version 3.0\nlaminate design\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (Index n = 0; n < mesh.num_nodes(); ++n)
    out << mesh.node(n).x() << ' ' << mesh.node(n).y() << " 0\n";
  const Index cells = mesh.num_cells();
  out << "CELLS " << cells << ' ' << 5 * cells << '\n';
  for (Index c = 0; c < cells; ++c) {
    const auto& n = mesh.cell_nodes(c);
    out << "4 " << n[0] << ' ' << n[2] << ' ' << n[8] << ' ' << n[6] << '\n';
  }
  out << "CELL_TYPES " << cells << '\n';
  for (Index c = 0; c < cells; ++c) out << "9\n";

  out << "POINT_DATA " << mesh.num_nodes() << "\nVECTORS displacement double\n";
  for (Index n = 0; n < mesh.num_nodes(); ++n)
    out << u.values()[2 * n] << ' ' << u.values()[2 * n + 1] << " 0\n";

  out << "CELL_DATA " << cells << '\n';
  scalar_block(out, "theta", state.theta);
  scalar_block(out, "von_mises", cell_von_mises(u, state, material));
  if (ind) {
    std::vector<double> a(cells), b(cells), m(cells), t(cells);
    for (Index c = 0; c < cells; ++c) {
      a[c] = ind->rho_u_cell[c] * ind->omega_u_cell[c];
      b[c] = ind->rho_u_edge[c] * ind->omega_u_edge[c];
      m[c] = 0.5 * ind->rho_m[c] * ind->omega_m[c];
      t[c] = 0.5 * ind->rho_theta[c] * ind->omega_theta[c];
    }
    scalar_block(out, "eta", ind->eta);
    scalar_block(out, "eta_cell", a);
    scalar_block(out, "eta_edge", b);
    scalar_block(out, "eta_m", m);
    scalar_block(out, "eta_theta", t);
  }
  finish(out, path);
}

void write_steps_csv(const std::filesystem::path& path, const std::vector<StudyRow>& rows,
                     bool timing) {
  bool levels = false;
  for (const StudyRow& r : rows) levels |= r.level >= 0;
  std::ofstream out = open_for_writing(path);
  out << "step,elements,dofs,J_h,sum_eta,volume,l,wall_ms";
  if (levels) out << ",level";
  out << '\n';
  for (const StudyRow& row : rows) {
    const AdaptiveStep& r = row.record;
    out << r.step << ',' << r.elements << ',' << r.dofs << ',' << r.compliance << ','
        << r.eta_sum << ',' << r.volume << ',' << r.multiplier << ','
        << (timing ? r.wall_ms : 0.0);
    if (levels) out << ',' << row.level;
    out << '\n';
  }
  finish(out, path);
}

void write_iterations_csv(const std::filesystem::path& path,
                          const std::vector<IterationRow>& rows, bool timing) {
  std::ofstream out = open_for_writing(path);
  out << "step,iteration,J,volume,l,wall_ms\n";
  for (const IterationRow& row : rows) {
    const IterationRecord& r = row.record;
    out << row.step << ',' << r.iteration << ',' << r.compliance << ',' << r.volume << ','
        << r.multiplier << ',' << (timing ? r.wall_ms : 0.0) << '\n';
  }
  finish(out, path);
}

void write_indicators_csv(const std::filesystem::path& path, const QuadMesh& mesh,
                          const ElementIndicators& ind) {
  std::ofstream out = open_for_writing(path);
  out << "cell,level,x,y,size,eta,rho_u_cell,omega_u_cell,rho_u_edge,omega_u_edge,"
         "rho_m,omega_m,rho_theta,omega_theta,fallback\n";
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::Vector2d x = mesh.cell_center(c);
    out << c << ',' << mesh.cell(c).level << ',' << x.x() << ',' << x.y() << ','
        << mesh.cell_size(c) << ',' << ind.eta[c] << ',' << ind.rho_u_cell[c] << ','
        << ind.omega_u_cell[c] << ',' << ind.rho_u_edge[c] << ',' << ind.omega_u_edge[c] << ','
        << ind.rho_m[c] << ',' << ind.omega_m[c] << ',' << ind.rho_theta[c] << ','
        << ind.omega_theta[c] << ',' << (ind.fallback[c] ? 1 : 0) << '\n';
  }
  finish(out, path);
}

std::string format_fit(const FitResult& fit, const std::vector<std::pair<double, double>>& data) {
  std::ostringstream s;
  s.precision(10);
  s << "fit J_h = J* + c h^p over " << data.size() << " levels\n";
  s << "  J*       = " << fit.j_star << '\n';
  s << "  c        = " << fit.c << '\n';
  s << "  p        = " << fit.p << (fit.rate_identified ? "" : " (not identifiable, c = 0)") << '\n';
  s << "  residual = " << fit.residual << '\n';
  s << "  status   = " << (fit.converged ? "converged" : "not converged") << '\n';
  s << "  h, J_h, J_h - J*\n";
  for (const auto& [h, j] : data) s << "  " << h << ", " << j << ", " << j - fit.j_star << '\n';
  return s.str();
}

}  // namespace lamopt
