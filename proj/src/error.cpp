#include "avoharvest/error.hpp"

namespace avo {

ClusterCountError::ClusterCountError(int requested, int achievable)
    : std::runtime_error("requested " + std::to_string(requested) + " clusters but only " +
                         std::to_string(achievable) + " histogram peaks are available"),
      requested_(requested),
      achievable_(achievable) {}

DegenerateCloudError::DegenerateCloudError(int rank)
    : std::runtime_error("point cloud scatter has rank " + std::to_string(rank) + " (need 3)"),
      rank_(rank) {}

}  // namespace avo
