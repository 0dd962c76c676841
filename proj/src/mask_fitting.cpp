#include "pfd/mask_fitting.hpp"

#include <png.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace pfd {

BinaryMask::BinaryMask(int w, int h, Eigen::Vector2d origin)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0), origin_offset(std::move(origin)) {
  if (w < 0 || h < 0) throw InvalidInput("mask dimensions must be nonnegative");
}

MaskMoments mask_moments(const BinaryMask& mask) {
  MaskMoments m;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        sum += Eigen::Vector2d(x, y);
        ++m.count;
      }
  if (m.count == 0) throw DegenerateMask("mask has no foreground pixels");

  const Eigen::Vector2d mean = sum / static_cast<double>(m.count);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        const Eigen::Vector2d d = Eigen::Vector2d(x, y) - mean;
        cov += d * d.transpose();
      }
  m.centroid = mean + mask.origin_offset;
  m.covariance = cov / static_cast<double>(m.count);
  return m;
}

Ellipse2D moments_ellipse(const BinaryMask& mask) {
  const MaskMoments m = mask_moments(mask);
  if (m.count < 3)
    throw DegenerateMask("mask has " + std::to_string(m.count) + " foreground pixels, need 3");

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m.covariance);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(0) > 1e-10 * lambda(1))) throw DegenerateMask("mask pixels are collinear");

  // A uniform ellipse with semi-axis l has second moment l^2/4 along it.
  Ellipse2D e;
  e.center = m.centroid;
  e.l1 = 2.0 * std::sqrt(lambda(1));
  e.l2 = 2.0 * std::sqrt(lambda(0));
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  e.alpha = normalize_half_turn(std::atan2(major.y(), major.x()));
  return e;
}

Eigen::Matrix2d ellipse_second_moments(const Ellipse2D& e) {
  const double c = std::cos(e.alpha);
  const double s = std::sin(e.alpha);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  return R * Eigen::Vector2d(e.l1 * e.l1 / 4.0, e.l2 * e.l2 / 4.0).asDiagonal() * R.transpose();
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] != '#') return tok;
    std::string rest;
    std::getline(in, rest);
  }
  return {};
}

BinaryMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw InvalidInput(path.string() + " is not a PGM file");

  int w = 0, h = 0;
  long maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stol(next_token(in));
  } catch (const std::exception&) {
    throw InvalidInput("malformed PGM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw InvalidInput("unsupported PGM header in " + path.string());

  BinaryMask mask(w, h);
  const auto threshold = [maxval](long v) { return v * 255 > 127 * maxval; };
  if (magic == "P2") {
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      long v = 0;
      if (!(in >> v)) throw InvalidInput("truncated PGM data in " + path.string());
      mask.data[i] = threshold(v) ? 1 : 0;
    }
    return mask;
  }

  in.get();  // single whitespace after maxval
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(mask.data.size() * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw InvalidInput("truncated PGM data in " + path.string());
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    const long v = bytes == 1 ? raw[i] : (static_cast<long>(raw[2 * i]) << 8) | raw[2 * i + 1];
    mask.data[i] = threshold(v) ? 1 : 0;
  }
  return mask;
}

BinaryMask load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw InvalidInput("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw InvalidInput("cannot decode PNG " + path.string() + ": " + image.message);
  }
  BinaryMask mask(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = buffer[i] > 127 ? 1 : 0;
  return mask;
}

}  // namespace

BinaryMask load_mask(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw InvalidInput("cannot open " + path.string());
  char head[2] = {0, 0};
  probe.read(head, 2);
  if (head[0] == 'P' && (head[1] == '5' || head[1] == '2')) return load_pgm(path);
  if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P') return load_png(path);
  throw InvalidInput(path.string() + " is neither PGM nor PNG");
}

}  // namespace pfd
