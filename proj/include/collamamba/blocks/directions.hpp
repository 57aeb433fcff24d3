#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "collamamba/core/error.hpp"

namespace collamamba {

enum class DirectionOrder { LeftRight = 0, RightLeft = 1, TopDown = 2, BottomUp = 3 };

inline constexpr std::array<DirectionOrder, 4> kAllDirections = {
    DirectionOrder::LeftRight, DirectionOrder::RightLeft, DirectionOrder::TopDown, DirectionOrder::BottomUp};

constexpr std::string_view direction_name(DirectionOrder d) {
  switch (d) {
    case DirectionOrder::LeftRight: return "left-right";
    case DirectionOrder::RightLeft: return "right-left";
    case DirectionOrder::TopDown: return "top-down";
    case DirectionOrder::BottomUp: return "bottom-up";
  }
  return "?";
}

/// Visiting order over an H x W grid: perm[k] is the row-major index of the
/// k-th token visited. LeftRight is row-major, TopDown column-major, and the
/// other two are their reversals.
inline std::vector<std::size_t> order_directions(std::size_t H, std::size_t W, DirectionOrder dir) {
  detail::require(H >= 1 && W >= 1, "order_directions: grid extents must be >= 1");
  const std::size_t n = H * W;
  std::vector<std::size_t> perm(n);
  const bool column_major = dir == DirectionOrder::TopDown || dir == DirectionOrder::BottomUp;
  for (std::size_t k = 0; k < n; ++k) perm[k] = column_major ? (k % H) * W + k / H : k;
  if (dir == DirectionOrder::RightLeft || dir == DirectionOrder::BottomUp)
    for (std::size_t k = 0; k < n / 2; ++k) std::swap(perm[k], perm[n - 1 - k]);
  return perm;
}

inline std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  return inv;
}

/// Frame-stack orders for the spatial-temporal block over T frames of
/// H*W tokens stored frame-major (index t * HW + p).
enum class StOrder { SpatialForward = 0, SpatialBackward = 1, Temporal = 2 };

inline std::vector<std::size_t> st_order(std::size_t T, std::size_t HW, StOrder order) {
  detail::require(T >= 1 && HW >= 1, "st_order: extents must be >= 1");
  const std::size_t n = T * HW;
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) {
    switch (order) {
      case StOrder::SpatialForward: perm[k] = k; break;
      case StOrder::SpatialBackward: perm[k] = n - 1 - k; break;
      case StOrder::Temporal: perm[k] = (k % T) * HW + k / T; break;  // position-major, time-minor
    }
  }
  return perm;
}

}  // namespace collamamba
