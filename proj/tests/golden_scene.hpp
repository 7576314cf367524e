// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The scene behind tests/data/axial_sphere_pyramid32.ppm. It matches
//   dvr phantom --size 32 --no-masks
//   dvr render --volume phantom.raw --view axial --early-termination 1 --width 64 --height 64
// with every pixel integrated by the closed-form reference instead of the
// front-to-back marcher.

#include "dvr/service.hpp"

namespace dvr::testing {

inline constexpr int kGoldenSize = 64;
inline constexpr int kGoldenPhantom = 32;

// Round trip through u16 RAW, as the CLI sees the volume.
inline VolumeGrid golden_volume() {
  const Phantom<> ph = generate_phantom(sphere_pyramid_phantom(kGoldenPhantom));
  const IntensityRange range{0.0, 65535.0};
  const VolumeMeta meta{ph.grid.dims(), ph.grid.spacing(), SampleType::u16le, range};
  return load_raw_volume(write_raw_volume(ph.grid, SampleType::u16le, range), meta);
}

inline Image8 golden_reference_image() {
  const VolumeGrid grid = golden_volume();
  SceneDoc doc;
  SamplingConfig sampling;
  sampling.early_termination_alpha = 1.0;
  doc.sampling = sampling;
  const ResolvedScene s = resolve_scene(grid, doc, SliceAxis::axial, kGoldenSize, kGoldenSize);
  const SceneView<double> view{grid, s.tf, s.shading, s.sampling};
  FrameImage img(kGoldenSize, kGoldenSize);
  for (int y = 0; y < kGoldenSize; ++y)
    for (int x = 0; x < kGoldenSize; ++x) img.at(x, y) = integrate_ray_reference(generate_ray(s.camera, x, y), view);
  return to_rgb8(img);
}

}  // namespace dvr::testing
