#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refdense/random.hpp"
#include "refdense/tensor.hpp"

namespace refdense {

// Architecture of the dual-stream detector. The entity stream runs a few
// full-resolution self-attention blocks over frame features; the motion
// stream runs a fine self-attention path plus num_scales stride-2 coarse
// paths over segment features, each optionally guided by cross-attention
// with the entity representation as keys/values.
struct ModelConfig {
  int d_model = 64;  // shared hidden width
  int heads = 4;
  int num_scales = 3;  // coarse levels, each halving T
  int entity_layers = 1;
  int conv_width = 3;
  int t_train = 64;
  bool use_cross_attention = true;
  // Concatenated segment+frame features through the multi-scale backbone
  // with self-attention only; no decomposition heads.
  bool single_stream = false;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Input/output extents discovered from data, not hard-coded.
struct ModelDims {
  int segment_dim = 0;  // D
  int frame_dim = 0;
  int num_actions = 0;
  int num_entities = 0;
  int num_motions = 0;
  int text_dim_ent = 0;
  int text_dim_mot = 0;

  std::string to_json() const;
  static ModelDims from_json(const std::string& text);
};

// Named learnable tensors, ordered by name for deterministic iteration,
// serialization and optimizer updates.
class ParamStore {
 public:
  Tensor get(const std::string& name) const;
  void set(const std::string& name, Tensor t);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Tensor> params_;
};

// Glorot-uniform matrices, zero biases, unit layer-norm gains, small normal
// position embeddings. Creation order is fixed by the architecture so a
// seeded Rng yields identical parameters.
ParamStore init_params(const ModelConfig& cfg, const ModelDims& dims, Rng& rng);

struct MotionActivations {
  Tensor fine;                    // T x D*
  std::vector<Tensor> coarse;     // level i: (T / 2^(i+1)) x D*
  std::vector<Tensor> upsampled;  // each T x D*
  Tensor fused;                   // T x D*
};

Tensor entity_forward(const Tensor& frame_features, const ParamStore& params,
                      const ModelConfig& cfg);
MotionActivations motion_forward(const Tensor& segment_features,
                                 const Tensor& entity_repr,
                                 const ParamStore& params,
                                 const ModelConfig& cfg);

// P = sigmoid(width-1 conv over [entity; motion]).
Tensor fuse_predict(const Tensor& entity_repr, const Tensor& motion_repr,
                    const ParamStore& params);
// Training-only heads mapping each stream to its sub-concept probabilities.
Tensor subtask_predict_entity(const Tensor& entity_repr,
                              const ParamStore& params);
Tensor subtask_predict_motion(const Tensor& motion_repr,
                              const ParamStore& params);

// Ablation baseline: concatenated [segment; frame] projections through the
// self-attention-only multi-scale backbone. num_scales == 0 degenerates to
// the fine path alone.
MotionActivations single_stream_forward(const Tensor& segment_features,
                                        const Tensor& frame_features,
                                        const ParamStore& params,
                                        const ModelConfig& cfg);
Tensor single_stream_predict(const Tensor& fused, const ParamStore& params);

// Learned projections from stream features into the text embedding spaces
// (used only by the contrastive loss; excluded from the architecture hash).
Tensor project_text_entity(const Tensor& feats, const ParamStore& params);
Tensor project_text_motion(const Tensor& feats, const ParamStore& params);

// Hash over the config and the names/shapes of inference-reachable
// parameters. Loss-only parameters ("loss.*") do not contribute, so adding
// or removing optimization terms cannot change it.
std::uint64_t architecture_hash(const ModelConfig& cfg,
                                const ParamStore& params);

}  // namespace refdense
