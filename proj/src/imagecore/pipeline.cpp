#include "cxr/imagecore/pipeline.hpp"

#include "cxr/imagecore/clahe.hpp"
#include "cxr/imagecore/transforms.hpp"

namespace cxr::image {

PreprocessTrace inference_preprocess_trace(const GrayImage& img, const ClaheParams& p, const NormalizationStats& s,
                                           CropPolicy policy) {
  s.validate();
  PreprocessTrace trace;
  auto& st = trace.stages;
  st.push_back(to_tensor(img));
  st.push_back(to_tensor(clahe(img, p)));
  st.push_back(resize_shorter_side(st.back(), kResizeShorterSide));

  const ImageTensor& resized = st.back();
  PreprocessGeometry& g = trace.geometry;
  g.source_height = img.height;
  g.source_width = img.width;
  g.resized_height = resized.height;
  g.resized_width = resized.width;
  g.policy = policy;
  if (policy == CropPolicy::kCenter) {
    g.crop_top = (resized.height - kModelInputSize) / 2;
    g.crop_left = (resized.width - kModelInputSize) / 2;
    st.push_back(center_crop(resized, kModelInputSize, kModelInputSize));
  } else {
    st.push_back(bilinear_resize(resized, kModelInputSize, kModelInputSize));
  }
  st.push_back(minmax_scale(st.back()));
  st.push_back(replicate_channels(st.back()));
  st.push_back(channel_normalize(st.back(), s));
  return trace;
}

ImageTensor inference_preprocess(const GrayImage& img, const ClaheParams& p, const NormalizationStats& s,
                                 CropPolicy policy) {
  auto trace = inference_preprocess_trace(img, p, s, policy);
  return std::move(trace.stages.back());
}

}  // namespace cxr::image
