#pragma once

// Joint image/mask augmentation. Geometric transforms move the mask with
// the image (nearest-neighbour for the mask), photometric ones leave it be.

#include "imloc/rng.hpp"
#include "imloc/sample.hpp"

namespace imloc {

struct AugmentationPolicy {
  double rescale_prob = 0.0;
  double rescale_min = 0.75, rescale_max = 1.25;
  double hflip_prob = 0.0;
  double vflip_prob = 0.0;
  double blur_prob = 0.0;
  double blur_sigma_min = 0.5, blur_sigma_max = 2.0;
  double rot90_prob = 0.0;
  double small_rotation_prob = 0.0;
  double small_rotation_max_deg = 15.0;
  double copy_move_prob = 0.0;
  double inpaint_prob = 0.0;

  static AugmentationPolicy identity() { return {}; }
  /// Every operation enabled at moderate probability.
  static AugmentationPolicy standard();
};

Sample augment(const Sample& sample, const AugmentationPolicy& policy, Rng& rng);

}  // namespace imloc
