#include "imloc/pyramid.hpp"

namespace imloc {

SimpleFeaturePyramid::SimpleFeaturePyramid(const ModelConfig& cfg, ParameterStore& store, Rng& rng) : cfg_(cfg) {
  const auto c = cfg_.embed_dim, cs = cfg_.pyramid_channels;
  auto norm_pair = [&](const std::string& name, std::int64_t ch, ConvNorm& cn) {
    cn.norm_w = store.add_parameter(name + "_norm.weight", Tensor::full(Shape{ch}, 1.0f), false);
    cn.norm_b = store.add_parameter(name + "_norm.bias", Tensor::zeros(Shape{ch}), false);
  };
  for (std::size_t level = 0; level < branches_.size(); ++level) {
    const std::string pre = std::string("sfpn.scale") + kPyramidScaleNames[level] + ".";
    Branch& br = branches_[level];
    std::int64_t in = c;
    const int ups = level == 0 ? 2 : level == 1 ? 1 : 0;
    for (int u = 0; u < ups; ++u) {
      const std::string name = pre + "up" + std::to_string(u + 1);
      ConvNorm cn;
      cn.w = store.add_parameter(name + ".weight", init::fan_in_uniform(Shape{in, in / 2, 2, 2}, in, rng));
      cn.b = store.add_parameter(name + ".bias", Tensor::zeros(Shape{in / 2}), false);
      norm_pair(name, in / 2, cn);
      br.upsample.push_back(std::move(cn));
      in /= 2;
    }
    br.lateral.w = store.add_parameter(pre + "lateral.weight", init::fan_in_uniform(Shape{cs, in, 1, 1}, in, rng));
    br.lateral.b = store.add_parameter(pre + "lateral.bias", Tensor::zeros(Shape{cs}), false);
    norm_pair(pre + "lateral", cs, br.lateral);
    br.output.w = store.add_parameter(pre + "output.weight", init::fan_in_uniform(Shape{cs, cs, 3, 3}, cs * 9, rng));
    br.output.b = store.add_parameter(pre + "output.bias", Tensor::zeros(Shape{cs}), false);
    norm_pair(pre + "output", cs, br.output);
  }
}

ag::Var SimpleFeaturePyramid::run_branch(std::size_t level, const ag::Var& x) const {
  const Branch& br = branches_[level];
  ag::Var h = x;
  for (std::size_t u = 0; u < br.upsample.size(); ++u) {
    const auto& cn = br.upsample[u];
    h = ag::channel_layer_norm(ag::conv_transpose2x2(h, cn.w, cn.b), cn.norm_w, cn.norm_b);
    if (u + 1 < br.upsample.size()) h = ag::gelu(h);
  }
  if (level >= 3) h = ag::max_pool2x2(h);
  h = ag::channel_layer_norm(ag::conv2d(h, br.lateral.w, br.lateral.b, 0), br.lateral.norm_w, br.lateral.norm_b);
  h = ag::channel_layer_norm(ag::conv2d(h, br.output.w, br.output.b, 1), br.output.norm_w, br.output.norm_b);
  if (level == 4) h = ag::max_pool2x2(h);
  return h;
}

PyramidFeatures SimpleFeaturePyramid::build(const FeatureMap& ge) const {
  if (ge.data.value().rank() != 3 || ge.channels() != cfg_.embed_dim) {
    throw ShapeError("feature pyramid: expected " + std::to_string(cfg_.embed_dim) + " input channels, got " +
                     shape_str(ge.data.shape()));
  }
  if (ge.stride != cfg_.patch_size) throw ShapeError("feature pyramid: input stride does not match patch size");
  PyramidFeatures out;
  for (std::size_t level = 0; level < branches_.size(); ++level) {
    out.maps.push_back({run_branch(level, ge.data), kPyramidStrides[level] * ge.stride / 16});
  }
  return out;
}

}  // namespace imloc
