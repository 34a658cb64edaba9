#pragma once

// Legacy VTK snapshots and CSV tables.

#include "lamopt/adaptivity.hpp"
#include "lamopt/dwr.hpp"
#include "lamopt/scenarios.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lamopt {

/// 2D von Mises stress of a Voigt stress (s11, s22, s12).
inline double von_mises(const Eigen::Vector3d& s) {
  return std::sqrt(std::max(0.0, s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3 * s[2] * s[2]));
}

/// Mean over the quadrature points of each cell of the von Mises stress of u
/// under the design's tensors.
std::vector<double> cell_von_mises(const DisplacementField& u, const DesignState& state,
                                   const IsotropicMaterial<double>& material);

/// ASCII legacy VTK 3.0, UNSTRUCTURED_GRID of QUAD cells (corner connectivity;
/// all Q2 nodes are written as points). Point data: displacement. Cell data:
/// theta, von Mises stress and, when given, eta and its four addends.
void write_vtk(const std::filesystem::path& path, const DisplacementField& u,
               const DesignState& state, const IsotropicMaterial<double>& material,
               const ElementIndicators* indicators);

struct StudyRow {
  AdaptiveStep record;
  int level = -1;  ///< uniform studies only
};

/// step, elements, dofs, J_h, sum_eta, volume, l, wall_ms (plus level when
/// any row has one). Without timing the wall_ms column is written as 0 so
/// reruns are byte-identical.
void write_steps_csv(const std::filesystem::path& path, const std::vector<StudyRow>& rows,
                     bool timing = true);

struct IterationRow {
  int step = 0;
  IterationRecord record;
};

void write_iterations_csv(const std::filesystem::path& path,
                          const std::vector<IterationRow>& rows, bool timing = true);

/// One row per element: geometry, eta, the eight factors and the fallback flag.
void write_indicators_csv(const std::filesystem::path& path, const QuadMesh& mesh,
                          const ElementIndicators& indicators);

std::string format_fit(const FitResult& fit, const std::vector<std::pair<double, double>>& data);

}  // namespace lamopt
