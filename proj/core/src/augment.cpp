#include "imloc/augment.hpp"

#include <cmath>

#include "imloc/image_ops.hpp"
#include "imloc/synth.hpp"

namespace imloc {

AugmentationPolicy AugmentationPolicy::standard() {
  AugmentationPolicy p;
  p.rescale_prob = 0.3;
  p.hflip_prob = 0.5;
  p.vflip_prob = 0.5;
  p.blur_prob = 0.2;
  p.rot90_prob = 0.3;
  p.small_rotation_prob = 0.2;
  p.copy_move_prob = 0.1;
  p.inpaint_prob = 0.1;
  return p;
}

Sample augment(const Sample& sample, const AugmentationPolicy& policy, Rng& rng) {
  sample.validate();
  Sample s = sample;
  // Every draw is taken unconditionally so the stream layout does not depend
  // on which operations fire.
  const bool do_rescale = rng.bernoulli(policy.rescale_prob);
  const double rescale = rng.uniform(policy.rescale_min, policy.rescale_max);
  const bool do_hflip = rng.bernoulli(policy.hflip_prob);
  const bool do_vflip = rng.bernoulli(policy.vflip_prob);
  const bool do_blur = rng.bernoulli(policy.blur_prob);
  const double sigma = rng.uniform(policy.blur_sigma_min, policy.blur_sigma_max);
  const bool do_rot90 = rng.bernoulli(policy.rot90_prob);
  const auto turns = static_cast<int>(rng.uniform_int(1, 3));
  const bool do_rot = rng.bernoulli(policy.small_rotation_prob);
  const double degrees = rng.uniform(-policy.small_rotation_max_deg, policy.small_rotation_max_deg);
  const bool do_copy_move = rng.bernoulli(policy.copy_move_prob);
  const bool do_inpaint = rng.bernoulli(policy.inpaint_prob);
  Rng tamper_rng = rng.derive("naive-manipulation");

  if (do_rescale) {
    const auto nh = std::max<std::int64_t>(1, std::llround(static_cast<double>(s.height()) * rescale));
    const auto nw = std::max<std::int64_t>(1, std::llround(static_cast<double>(s.width()) * rescale));
    s.image = resize_bilinear(s.image, nh, nw);
    s.mask = resize_nearest(s.mask, nh, nw);
  }
  if (do_hflip) {
    s.image = flip_horizontal(s.image);
    s.mask = flip_horizontal(s.mask);
  }
  if (do_vflip) {
    s.image = flip_vertical(s.image);
    s.mask = flip_vertical(s.mask);
  }
  if (do_rot90) {
    s.image = rotate90(s.image, turns);
    s.mask = rotate90(s.mask, turns);
  }
  if (do_rot) {
    s.image = rotate_small(s.image, degrees);
    s.mask = rotate_small(s.mask, degrees);
  }
  if (do_blur) s.image = gaussian_blur(s.image, sigma);
  const bool big_enough = s.height() >= 32 && s.width() >= 32;
  if (do_copy_move && big_enough) s = synthesize_tamper(s, TamperKind::copy_move, tamper_rng).sample;
  if (do_inpaint && big_enough) s = synthesize_tamper(s, TamperKind::inpaint, tamper_rng).sample;
  return s;
}

}  // namespace imloc
