#include "refdense/model.hpp"

#include <cmath>

#include <json.hpp>

#include "refdense/errors.hpp"
#include "refdense/manifest.hpp"
#include "refdense/ops.hpp"

namespace refdense {

namespace {

using nlohmann::json;

Tensor glorot(int fan_in, int fan_out, Shape shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> vals(numel_of(shape));
  for (auto& v : vals) v = rng.uniform(-limit, limit);
  return Tensor::from(std::move(shape), std::move(vals), true);
}

void add_linear(ParamStore& p, const std::string& prefix, int d_in, int d_out,
                Rng& rng) {
  p.set(prefix + ".W", glorot(d_in, d_out, {d_in, d_out}, rng));
  p.set(prefix + ".b", Tensor::zeros({d_out}, true));
}

void add_layer_norm(ParamStore& p, const std::string& prefix, int d) {
  p.set(prefix + ".gamma", Tensor::from({d}, std::vector<double>(d, 1.0), true));
  p.set(prefix + ".beta", Tensor::zeros({d}, true));
}

// Pre-LN self-attention block: attention residual followed by a feed-forward
// residual (hidden width 2 * d_model, gelu).
void add_self_block(ParamStore& p, const std::string& prefix, int d, Rng& rng) {
  add_layer_norm(p, prefix + ".ln1", d);
  add_linear(p, prefix + ".attn.q", d, d, rng);
  add_linear(p, prefix + ".attn.k", d, d, rng);
  add_linear(p, prefix + ".attn.v", d, d, rng);
  add_linear(p, prefix + ".attn.o", d, d, rng);
  add_layer_norm(p, prefix + ".ln2", d);
  add_linear(p, prefix + ".ffn.1", d, 2 * d, rng);
  add_linear(p, prefix + ".ffn.2", 2 * d, d, rng);
}

// Cross-attention block: attention residual only. Queries come from the
// stream (pre-LN), keys/values from the guiding representation, so a zero
// guidance tensor contributes exactly nothing through the residual.
void add_cross_block(ParamStore& p, const std::string& prefix, int d, Rng& rng) {
  add_layer_norm(p, prefix + ".ln", d);
  add_linear(p, prefix + ".attn.q", d, d, rng);
  add_linear(p, prefix + ".attn.k", d, d, rng);
  add_linear(p, prefix + ".attn.v", d, d, rng);
  add_linear(p, prefix + ".attn.o", d, d, rng);
}

void add_conv(ParamStore& p, const std::string& prefix, int width, int d_in,
              int d_out, Rng& rng) {
  p.set(prefix + ".K",
        glorot(width * d_in, width * d_out, {width, d_in, d_out}, rng));
  p.set(prefix + ".b", Tensor::zeros({d_out}, true));
}

Tensor position_embedding(int t_train, int d, Rng& rng) {
  std::vector<double> vals(static_cast<std::size_t>(t_train) * d);
  for (auto& v : vals) v = rng.normal(0.0, 0.02);
  return Tensor::from({t_train, d}, std::move(vals), true);
}

Tensor linear(const Tensor& x, const ParamStore& p, const std::string& prefix) {
  return add_bias(matmul(x, p.get(prefix + ".W")), p.get(prefix + ".b"));
}

Tensor self_block(const Tensor& x, const ParamStore& p,
                  const std::string& prefix, int heads) {
  Tensor h = layer_norm(x, p.get(prefix + ".ln1.gamma"),
                        p.get(prefix + ".ln1.beta"));
  Tensor a = attention(linear(h, p, prefix + ".attn.q"),
                       linear(h, p, prefix + ".attn.k"),
                       linear(h, p, prefix + ".attn.v"), heads);
  Tensor y = add(x, linear(a, p, prefix + ".attn.o"));
  Tensor h2 = layer_norm(y, p.get(prefix + ".ln2.gamma"),
                         p.get(prefix + ".ln2.beta"));
  Tensor f = linear(gelu(linear(h2, p, prefix + ".ffn.1")), p, prefix + ".ffn.2");
  return add(y, f);
}

Tensor cross_block(const Tensor& x, const Tensor& kv, const ParamStore& p,
                   const std::string& prefix, int heads) {
  Tensor h = layer_norm(x, p.get(prefix + ".ln.gamma"),
                        p.get(prefix + ".ln.beta"));
  Tensor a = attention(linear(h, p, prefix + ".attn.q"),
                       linear(kv, p, prefix + ".attn.k"),
                       linear(kv, p, prefix + ".attn.v"), heads);
  return add(x, linear(a, p, prefix + ".attn.o"));
}

// Learned position embeddings have t_train rows; other lengths are reached
// by endpoint-aligned interpolation (identity at t_train).
Tensor add_positions(const Tensor& x, const Tensor& pos) {
  if (x.rows() == pos.rows()) return add(x, pos);
  return add(x, upsample_linear(pos, x.rows()));
}

Tensor head_predict(const Tensor& feats, const ParamStore& p,
                    const std::string& prefix) {
  return sigmoid(linear(feats, p, prefix));
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model < 1 || heads < 1 || d_model % heads != 0)
    throw ConfigError("model config: d_model " + std::to_string(d_model) +
                      " must be positive and divisible by heads " +
                      std::to_string(heads));
  const int min_scales = single_stream ? 0 : 1;
  if (num_scales < min_scales)
    throw ConfigError("model config: num_scales must be >= " +
                      std::to_string(min_scales));
  if (entity_layers < 1)
    throw ConfigError("model config: entity_layers must be >= 1");
  if (conv_width < 1 || conv_width % 2 == 0)
    throw ConfigError("model config: conv_width must be odd, got " +
                      std::to_string(conv_width));
  if (t_train < 1 || t_train % (1 << num_scales) != 0)
    throw ConfigError("model config: t_train " + std::to_string(t_train) +
                      " must be divisible by 2^num_scales = " +
                      std::to_string(1 << num_scales));
}

std::string ModelConfig::to_json() const {
  json j;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["num_scales"] = num_scales;
  j["entity_layers"] = entity_layers;
  j["conv_width"] = conv_width;
  j["t_train"] = t_train;
  j["use_cross_attention"] = use_cross_attention;
  j["single_stream"] = single_stream;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model config: invalid JSON: ") + e.what());
  }
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("d_model", c.d_model);
  get("heads", c.heads);
  get("num_scales", c.num_scales);
  get("entity_layers", c.entity_layers);
  get("conv_width", c.conv_width);
  get("t_train", c.t_train);
  get("use_cross_attention", c.use_cross_attention);
  get("single_stream", c.single_stream);
  c.validate();
  return c;
}

std::string ModelDims::to_json() const {
  json j;
  j["segment_dim"] = segment_dim;
  j["frame_dim"] = frame_dim;
  j["num_actions"] = num_actions;
  j["num_entities"] = num_entities;
  j["num_motions"] = num_motions;
  j["text_dim_ent"] = text_dim_ent;
  j["text_dim_mot"] = text_dim_mot;
  return j.dump();
}

ModelDims ModelDims::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelDims d;
  d.segment_dim = j.at("segment_dim").get<int>();
  d.frame_dim = j.at("frame_dim").get<int>();
  d.num_actions = j.at("num_actions").get<int>();
  d.num_entities = j.at("num_entities").get<int>();
  d.num_motions = j.at("num_motions").get<int>();
  d.text_dim_ent = j.at("text_dim_ent").get<int>();
  d.text_dim_mot = j.at("text_dim_mot").get<int>();
  return d;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ConfigError("param store: no parameter named " + name);
  return it->second;
}

void ParamStore::set(const std::string& name, Tensor t) {
  params_[name] = std::move(t);
}

ParamStore init_params(const ModelConfig& cfg, const ModelDims& dims,
                       Rng& rng) {
  cfg.validate();
  if (dims.segment_dim < 1 || dims.frame_dim < 1 || dims.num_actions < 1)
    throw ConfigError("init_params: dims not populated");
  const int d = cfg.d_model;
  ParamStore p;

  if (cfg.single_stream) {
    add_linear(p, "ss.proj", dims.segment_dim + dims.frame_dim, d, rng);
    p.set("ss.pos", position_embedding(cfg.t_train, d, rng));
    add_self_block(p, "ss.fine.self", d, rng);
    for (int s = 1; s <= cfg.num_scales; ++s) {
      const std::string prefix = "ss.scale" + std::to_string(s);
      add_conv(p, prefix + ".conv", cfg.conv_width, d, d, rng);
      add_self_block(p, prefix + ".self", d, rng);
    }
    add_linear(p, "ss.fuse", (cfg.num_scales + 1) * d, d, rng);
    add_linear(p, "head.action", d, dims.num_actions, rng);
  } else {
    add_linear(p, "ent.proj", dims.frame_dim, d, rng);
    p.set("ent.pos", position_embedding(cfg.t_train, d, rng));
    for (int i = 0; i < cfg.entity_layers; ++i)
      add_self_block(p, "ent.block" + std::to_string(i), d, rng);

    add_linear(p, "mot.proj", dims.segment_dim, d, rng);
    p.set("mot.pos", position_embedding(cfg.t_train, d, rng));
    add_self_block(p, "mot.fine.self", d, rng);
    if (cfg.use_cross_attention) add_cross_block(p, "mot.fine.cross", d, rng);
    for (int s = 1; s <= cfg.num_scales; ++s) {
      const std::string prefix = "mot.scale" + std::to_string(s);
      add_conv(p, prefix + ".conv", cfg.conv_width, d, d, rng);
      add_self_block(p, prefix + ".self", d, rng);
      if (cfg.use_cross_attention) add_cross_block(p, prefix + ".cross", d, rng);
    }
    add_linear(p, "mot.fuse", (cfg.num_scales + 1) * d, d, rng);

    add_linear(p, "head.action", 2 * d, dims.num_actions, rng);
    add_linear(p, "head.ent", d, dims.num_entities, rng);
    add_linear(p, "head.mot", d, dims.num_motions, rng);
  }

  // Text projections exist regardless of whether the contrastive loss is
  // enabled; disabling the loss must only zero their gradients.
  add_linear(p, "loss.txtproj.ent", d, dims.text_dim_ent, rng);
  add_linear(p, "loss.txtproj.mot", d, dims.text_dim_mot, rng);
  return p;
}

Tensor entity_forward(const Tensor& frame_features, const ParamStore& params,
                      const ModelConfig& cfg) {
  Tensor x = linear(frame_features, params, "ent.proj");
  x = add_positions(x, params.get("ent.pos"));
  for (int i = 0; i < cfg.entity_layers; ++i)
    x = self_block(x, params, "ent.block" + std::to_string(i), cfg.heads);
  return x;
}

MotionActivations motion_forward(const Tensor& segment_features,
                                 const Tensor& entity_repr,
                                 const ParamStore& params,
                                 const ModelConfig& cfg) {
  const int T = segment_features.rows();
  if (entity_repr.rows() != T)
    throw DimensionError("motion_forward: entity representation rows " +
                         std::to_string(entity_repr.rows()) +
                         " do not match segment rows " + std::to_string(T));
  if (T % (1 << cfg.num_scales) != 0)
    throw ConfigError("motion_forward: sequence length " + std::to_string(T) +
                      " not divisible by 2^num_scales = " +
                      std::to_string(1 << cfg.num_scales));

  MotionActivations acts;
  Tensor x = linear(segment_features, params, "mot.proj");
  x = add_positions(x, params.get("mot.pos"));
  x = self_block(x, params, "mot.fine.self", cfg.heads);
  if (cfg.use_cross_attention)
    x = cross_block(x, entity_repr, params, "mot.fine.cross", cfg.heads);
  acts.fine = x;

  Tensor cur = x;
  for (int s = 1; s <= cfg.num_scales; ++s) {
    const std::string prefix = "mot.scale" + std::to_string(s);
    cur = add_bias(conv1d(cur, params.get(prefix + ".conv.K"), 2),
                   params.get(prefix + ".conv.b"));
    cur = self_block(cur, params, prefix + ".self", cfg.heads);
    if (cfg.use_cross_attention)
      cur = cross_block(cur, entity_repr, params, prefix + ".cross", cfg.heads);
    acts.coarse.push_back(cur);
    acts.upsampled.push_back(upsample_linear(cur, T));
  }

  std::vector<Tensor> branches{acts.fine};
  for (const auto& u : acts.upsampled) branches.push_back(u);
  acts.fused = linear(concat_cols(branches), params, "mot.fuse");
  return acts;
}

Tensor fuse_predict(const Tensor& entity_repr, const Tensor& motion_repr,
                    const ParamStore& params) {
  if (entity_repr.rows() != motion_repr.rows())
    throw DimensionError("fuse_predict: stream lengths differ");
  return head_predict(concat_cols({entity_repr, motion_repr}), params,
                      "head.action");
}

Tensor subtask_predict_entity(const Tensor& entity_repr,
                              const ParamStore& params) {
  return head_predict(entity_repr, params, "head.ent");
}

Tensor subtask_predict_motion(const Tensor& motion_repr,
                              const ParamStore& params) {
  return head_predict(motion_repr, params, "head.mot");
}

MotionActivations single_stream_forward(const Tensor& segment_features,
                                        const Tensor& frame_features,
                                        const ParamStore& params,
                                        const ModelConfig& cfg) {
  const int T = segment_features.rows();
  if (frame_features.rows() != T)
    throw DimensionError("single_stream_forward: feature lengths differ");
  if (cfg.num_scales > 0 && T % (1 << cfg.num_scales) != 0)
    throw ConfigError("single_stream_forward: sequence length " +
                      std::to_string(T) + " not divisible by 2^num_scales");

  MotionActivations acts;
  Tensor x = linear(concat_cols({segment_features, frame_features}), params,
                    "ss.proj");
  x = add_positions(x, params.get("ss.pos"));
  x = self_block(x, params, "ss.fine.self", cfg.heads);
  acts.fine = x;

  Tensor cur = x;
  for (int s = 1; s <= cfg.num_scales; ++s) {
    const std::string prefix = "ss.scale" + std::to_string(s);
    cur = add_bias(conv1d(cur, params.get(prefix + ".conv.K"), 2),
                   params.get(prefix + ".conv.b"));
    cur = self_block(cur, params, prefix + ".self", cfg.heads);
    acts.coarse.push_back(cur);
    acts.upsampled.push_back(upsample_linear(cur, T));
  }
  std::vector<Tensor> branches{acts.fine};
  for (const auto& u : acts.upsampled) branches.push_back(u);
  acts.fused = linear(concat_cols(branches), params, "ss.fuse");
  return acts;
}

Tensor single_stream_predict(const Tensor& fused, const ParamStore& params) {
  return head_predict(fused, params, "head.action");
}

Tensor project_text_entity(const Tensor& feats, const ParamStore& params) {
  return linear(feats, params, "loss.txtproj.ent");
}

Tensor project_text_motion(const Tensor& feats, const ParamStore& params) {
  return linear(feats, params, "loss.txtproj.mot");
}

std::uint64_t architecture_hash(const ModelConfig& cfg,
                                const ParamStore& params) {
  std::string desc = cfg.to_json();
  for (const auto& [name, tensor] : params.all()) {
    if (name.rfind("loss.", 0) == 0) continue;
    desc += "|" + name + ":" + shape_str(tensor.shape());
  }
  return fnv1a64(desc);
}

}  // namespace refdense
