/**
 * @file formats.hpp
 * @brief Readers and writers for every file the toolkit exchanges.
 *
 * Byte-level layouts are documented in docs/formats.md. Every writer's
 * output parses back through the matching reader.
 */
#pragma once

#include <iosfwd>
#include <vector>

#include "avoharvest/harvest_sim.hpp"
#include "avoharvest/perception.hpp"
#include "avoharvest/planner.hpp"
#include "avoharvest/workspace.hpp"

namespace avo {

// Run-length encoded mask interchange file ("AVMK").
void write_masks(std::ostream& os, const DetectionSet& detections);
DetectionSet read_masks(std::istream& is);

// 16-bit binary PGM depth image in millimetres; read converts to metres.
void write_depth_pgm(std::ostream& os, const DepthImage& depth_m);
DepthImage read_depth_pgm(std::istream& is);

// One estimate per line.
void write_estimates(std::ostream& os, const std::vector<AvocadoEstimate>& estimates);
std::vector<AvocadoEstimate> read_estimates(std::istream& is);

// Workspace grid text file and a CSV point list of occupied voxel centres.
void write_grid(std::ostream& os, const WorkspaceGrid& grid);
WorkspaceGrid read_grid(std::istream& is);
void write_grid_points_csv(std::ostream& os, const WorkspaceGrid& grid);

void write_trajectory_csv(std::ostream& os, const JointTrajectory& trajectory);
JointTrajectory read_trajectory_csv(std::istream& is);

void write_report(std::ostream& os, const HarvestReport& report);
HarvestReport read_report(std::istream& is);
void write_timeline_csv(std::ostream& os, const HarvestReport& report);

}  // namespace avo
