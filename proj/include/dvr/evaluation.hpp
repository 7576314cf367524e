// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dvr/common.hpp"
#include "dvr/image.hpp"
#include "dvr/io.hpp"
#include "dvr/raycaster.hpp"
#include "dvr/transfer_function.hpp"
#include "dvr/views.hpp"
#include "dvr/volume.hpp"

namespace dvr {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0) throw ValidationError("mask", "dimensions must be positive");
  }

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

template <std::floating_point T>
int axis_extent(const BasicVolumeGrid<T>& grid, SliceAxis axis) {
  return grid.dims()[static_cast<std::size_t>(slice_layout(axis).normal_axis)];
}

// Orthogonal slice. Axial: x->cols, y->rows; coronal: x->cols, z->rows;
// sagittal: y->cols, z->rows.
template <std::floating_point T>
ScalarImage extract_slice(const BasicVolumeGrid<T>& grid, SliceAxis axis, int index) {
  const SliceLayout l = slice_layout(axis);
  const Index3& d = grid.dims();
  const int extent = d[static_cast<std::size_t>(l.normal_axis)];
  if (index < 0 || index >= extent)
    throw IndexError(std::string(to_string(axis)) + " slice " + std::to_string(index) + " outside [0," +
                     std::to_string(extent) + ")");
  const int cols = d[static_cast<std::size_t>(l.col_axis)];
  const int rows = d[static_cast<std::size_t>(l.row_axis)];
  ScalarImage img(cols, rows);
  int ijk[3];
  ijk[l.normal_axis] = index;
  for (int r = 0; r < rows; ++r) {
    ijk[l.row_axis] = r;
    for (int c = 0; c < cols; ++c) {
      ijk[l.col_axis] = c;
      img.at(c, r) = static_cast<double>(grid(ijk[0], ijk[1], ijk[2]));
    }
  }
  return img;
}

// Same orientation as extract_slice, applied to a voxel mask.
inline BinaryMask extract_mask_slice(const VoxelMask& mask, SliceAxis axis, int index) {
  const SliceLayout l = slice_layout(axis);
  const int extent = mask.dims[static_cast<std::size_t>(l.normal_axis)];
  if (index < 0 || index >= extent) throw IndexError("mask slice " + std::to_string(index) + " out of range");
  const int cols = mask.dims[static_cast<std::size_t>(l.col_axis)];
  const int rows = mask.dims[static_cast<std::size_t>(l.row_axis)];
  BinaryMask out(cols, rows);
  int ijk[3];
  ijk[l.normal_axis] = index;
  for (int r = 0; r < rows; ++r) {
    ijk[l.row_axis] = r;
    for (int c = 0; c < cols; ++c) {
      ijk[l.col_axis] = c;
      out.set(c, r, mask.at(ijk[0], ijk[1], ijk[2]));
    }
  }
  return out;
}

inline BinaryMask threshold_mask(const ScalarImage& image, double theta) {
  BinaryMask m(image.width, image.height);
  for (std::size_t i = 0; i < image.data.size(); ++i) m.bits[i] = image.data[i] >= theta ? 1 : 0;
  return m;
}

// Any non-zero pixel is foreground.
inline BinaryMask mask_from_gray8(const Image8& img) {
  if (img.channels != 1) throw UnsupportedFormatError("mask image must be 8-bit grayscale");
  BinaryMask m(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) m.bits[i] = img.data[i] != 0 ? 1 : 0;
  return m;
}

inline Image8 mask_to_gray8(const BinaryMask& m) {
  Image8 img{m.width, m.height, 1, {}};
  img.data.reserve(m.bits.size());
  for (const std::uint8_t b : m.bits) img.data.push_back(b ? 255 : 0);
  return img;
}

// Dice similarity 2|A∩B| / (|A|+|B|). Two empty masks agree perfectly (1).
inline double dice(const BinaryMask& seg, const BinaryMask& gt) {
  if (seg.width != gt.width || seg.height != gt.height)
    throw ValidationError("mask", "dimension mismatch: " + std::to_string(seg.width) + "x" +
                                      std::to_string(seg.height) + " vs " + std::to_string(gt.width) + "x" +
                                      std::to_string(gt.height));
  std::size_t both = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < seg.bits.size(); ++i) {
    const bool s = seg.bits[i] != 0;
    const bool g = gt.bits[i] != 0;
    a += s;
    b += g;
    both += s && g;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

// How a slice is turned into a segmentation before thresholding.
enum class SegmentationPathway {
  // Raw slice intensities, or their TF opacity when a TF is supplied.
  threshold,
  // Alpha of an orthographic render of the single slice.
  rendered,
};

// Opacity image of one slice as seen by the renderer: the slice is
// duplicated into a two-sample-thick slab with unit spacing and rendered
// orthographically along the slice normal, so each pixel center lands on a
// voxel. Returns the accumulated alpha per pixel.
template <std::floating_point T>
ScalarImage rendered_slice_alpha(const BasicVolumeGrid<T>& grid, SliceAxis axis, int index, const TransferFunction& tf,
                                 const SamplingConfig& sampling = {}) {
  const ScalarImage slice = extract_slice(grid, axis, index);
  const SliceLayout l = slice_layout(axis);
  int dims[3];
  dims[l.col_axis] = slice.width;
  dims[l.row_axis] = slice.height;
  dims[l.normal_axis] = 2;
  std::vector<T> values(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int i = 0; i < dims[0]; ++i) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int k = 0; k < dims[2]; ++k) {
        const int ijk[3] = {i, j, k};
        values[static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k)] =
            static_cast<T>(slice.at(ijk[l.col_axis], ijk[l.row_axis]));
      }
    }
  }
  const BasicVolumeGrid<T> slab({dims[0], dims[1], dims[2]}, {1.0, 1.0, 1.0}, std::move(values));
  const ViewBasis b = preset_basis(axis);
  const Vec3 center = slab.extent() * 0.5;
  const Camera cam(center - b.forward * 2.0, center, b.up, 0.0, slice.width, slice.height, Projection::orthographic,
                   static_cast<double>(slice.height));
  SamplingConfig cfg = sampling;
  cfg.background = {0, 0, 0};
  ShadingConfig shading;
  shading.model = ShadingModel::none;
  const FrameImage frame = render(slab, tf, shading, cfg, cam, RenderOptions{1});
  ScalarImage alpha(slice.width, slice.height);
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) alpha.data[i] = frame.pixels[i].a;
  return alpha;
}

template <std::floating_point T>
ScalarImage segmentation_image(const BasicVolumeGrid<T>& grid, SliceAxis axis, int index, const TransferFunction* tf,
                               SegmentationPathway pathway) {
  if (pathway == SegmentationPathway::rendered) {
    return rendered_slice_alpha(grid, axis, index, tf ? *tf : TransferFunction::ramp());
  }
  ScalarImage img = extract_slice(grid, axis, index);
  if (tf) {
    for (double& v : img.data) v = tf->opacity_at(v);
  }
  return img;
}

struct DiceEntry {
  int index = 0;
  double dice = 0.0;
  // True when both the ground truth and the segmentation are empty.
  bool both_empty = false;
  bool gt_empty = false;
};

struct DiceCurve {
  std::vector<DiceEntry> entries;
  double mean = 0.0;

  std::string to_csv() const {
    std::ostringstream os;
    os << "slice_index,dice\n" << std::setprecision(6) << std::fixed;
    for (const DiceEntry& e : entries) os << e.index << ',' << e.dice << '\n';
    os << "mean," << mean << '\n';
    return os.str();
  }
};

inline double mean_dice(const std::vector<DiceEntry>& entries) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const DiceEntry& e : entries) sum += e.dice;
  return sum / static_cast<double>(entries.size());
}

// Mean over the slices whose ground truth is non-empty; 0 when there are none.
inline double mean_dice_over_foreground(const DiceCurve& curve) {
  std::vector<DiceEntry> kept;
  for (const DiceEntry& e : curve.entries) {
    if (!e.gt_empty) kept.push_back(e);
  }
  return mean_dice(kept);
}

// Scores every slice along `axis` against its ground-truth mask. The mean is
// over all slices, in index order.
template <std::floating_point T>
DiceCurve dice_curve(const BasicVolumeGrid<T>& grid, const std::vector<BinaryMask>& gt, SliceAxis axis, double theta,
                     const TransferFunction* tf = nullptr,
                     SegmentationPathway pathway = SegmentationPathway::threshold) {
  const int extent = axis_extent(grid, axis);
  if (static_cast<int>(gt.size()) != extent)
    throw ValidationError("gt", "expected " + std::to_string(extent) + " masks along " + std::string(to_string(axis)) +
                                    ", got " + std::to_string(gt.size()));
  DiceCurve curve;
  curve.entries.reserve(gt.size());
  for (int k = 0; k < extent; ++k) {
    const BinaryMask seg = threshold_mask(segmentation_image(grid, axis, k, tf, pathway), theta);
    const BinaryMask& truth = gt[static_cast<std::size_t>(k)];
    try {
      const bool gt_empty = truth.count() == 0;
      curve.entries.push_back({k, dice(seg, truth), gt_empty && seg.count() == 0, gt_empty});
    } catch (const ValidationError& e) {
      throw ValidationError("gt[" + std::to_string(k) + "]", e.message());
    }
  }
  curve.mean = mean_dice(curve.entries);
  return curve;
}

}  // namespace dvr
