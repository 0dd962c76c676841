#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pfd/geometry.hpp"

namespace pfd {

/// Row-major binary mask, usually a crop of the detection box. Pixel (x, y)
/// sits at image coordinates origin_offset + (x, y).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 0 background, nonzero foreground
  Eigen::Vector2d origin_offset = Eigen::Vector2d::Zero();

  BinaryMask() = default;
  BinaryMask(int w, int h, Eigen::Vector2d origin = Eigen::Vector2d::Zero());

  [[nodiscard]] bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool value = true) {
    data[static_cast<std::size_t>(y) * width + x] = value ? 1 : 0;
  }
};

/// Centroid and population covariance of the foreground pixel centers, in
/// image coordinates.
struct MaskMoments {
  Eigen::Vector2d centroid;
  Eigen::Matrix2d covariance;
  std::size_t count = 0;
};

MaskMoments mask_moments(const BinaryMask& mask);

/// Ellipse with the mask's centroid and second central moments: axes along
/// the covariance eigenvectors, semi-axes 2 sqrt(eigenvalue).
/// Throws DegenerateMask for fewer than three pixels or collinear pixels.
Ellipse2D moments_ellipse(const BinaryMask& mask);

/// Second central moments of the uniform region inside an ellipse.
Eigen::Matrix2d ellipse_second_moments(const Ellipse2D& ellipse);

/// Reads a PGM (P2/P5) or PNG image and thresholds gray values (scaled to
/// 0..255) at > 127. Throws InvalidInput on unreadable files.
BinaryMask load_mask(const std::filesystem::path& path);

}  // namespace pfd
