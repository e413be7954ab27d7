#include "ctxnmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctxnmt/adam.hpp"
#include "ctxnmt/bleu.hpp"
#include "ctxnmt/checkpoint.hpp"
#include "ctxnmt/rng.hpp"

namespace ctxnmt {

using NodeId = Graph::NodeId;

void TrainingConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) {
      throw std::invalid_argument(std::string("config: ") + name +
                                  " must be positive, got " + std::to_string(v));
    }
  };
  positive(embedding_dim, "embedding_dim");
  positive(context_dim, "context_dim");
  positive(encoder_hidden, "encoder_hidden");
  positive(decoder_hidden, "decoder_hidden");
  positive(source_vocab, "source_vocab");
  positive(target_vocab, "target_vocab");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(patience, "patience");
  if (!(learning_rate > 0) || !(clip_threshold > 0)) {
    throw std::invalid_argument("config: learning_rate and clip_threshold must be > 0");
  }
  if (early_stop_metric != "nll" && early_stop_metric != "bleu") {
    throw std::invalid_argument("config: early_stop_metric must be nll or bleu, got " +
                                early_stop_metric);
  }
}

namespace {

void fill_uniform(Tensor& t, Xorshift64Star& rng) {
  for (double& v : t.values) v = rng.uniform(-0.08, 0.08);
}

LstmWeights init_lstm(int input, int hidden, Xorshift64Star& rng) {
  LstmWeights w;
  auto weight = [&](int r, int c) {
    Tensor t({r, c}, 0.0, true);
    fill_uniform(t, rng);
    return t;
  };
  auto bias = [&](double v) { return Tensor({hidden}, v, true); };
  w.W_i = weight(hidden, input); w.U_i = weight(hidden, hidden); w.b_i = bias(0.0);
  w.W_f = weight(hidden, input); w.U_f = weight(hidden, hidden); w.b_f = bias(1.0);
  w.W_g = weight(hidden, input); w.U_g = weight(hidden, hidden); w.b_g = bias(0.0);
  w.W_o = weight(hidden, input); w.U_o = weight(hidden, hidden); w.b_o = bias(0.0);
  return w;
}

void visit_lstm(const std::string& prefix, LstmWeights& w,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".W_i", w.W_i); fn(prefix + ".U_i", w.U_i); fn(prefix + ".b_i", w.b_i);
  fn(prefix + ".W_f", w.W_f); fn(prefix + ".U_f", w.U_f); fn(prefix + ".b_f", w.b_f);
  fn(prefix + ".W_g", w.W_g); fn(prefix + ".U_g", w.U_g); fn(prefix + ".b_g", w.b_g);
  fn(prefix + ".W_o", w.W_o); fn(prefix + ".U_o", w.U_o); fn(prefix + ".b_o", w.b_o);
}

}  // namespace

ModelParameters ModelParameters::init(const TrainingConfig& config) {
  config.validate();
  const int E = config.embedding_dim, C = config.context_dim;
  const int H = config.encoder_hidden, Hp = config.decoder_hidden;
  const int V = config.source_vocab, Vp = config.target_vocab;
  Xorshift64Star rng(config.seed);

  ModelParameters p;
  p.config = config;
  auto weight = [&](std::vector<int> shape) {
    Tensor t(std::move(shape), 0.0, true);
    fill_uniform(t, rng);
    return t;
  };
  auto bias = [&](int n) { return Tensor({n}, 0.0, true); };

  // draw order is part of the determinism contract; do not reorder
  p.E_x = weight({V, E});
  p.E_y = weight({Vp, E});
  p.c_out = bias(Vp);
  p.enc_fwd = init_lstm(E, H, rng);
  p.enc_rev = init_lstm(E, H, rng);
  p.dec = init_lstm(E + 2 * H, Hp, rng);
  p.attn_U = weight({H, Hp});
  p.attn_V = weight({H, 2 * H});
  p.attn_v = weight({H});
  p.ctx_W1 = weight({C, E});
  p.ctx_b1 = bias(C);
  p.ctx_W2 = weight({C, C});
  p.ctx_b2 = bias(C);
  p.W_x = weight({E, C});
  p.b_x = bias(E);
  p.W_y = weight({E, C});
  p.b_y = bias(E);
  p.init_W = weight({Hp, 2 * H});
  p.init_b = bias(Hp);
  p.out_P = weight({E, Hp});
  p.out_b = bias(E);
  return p;
}

void ModelParameters::visit(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("E_x", E_x);
  fn("E_y", E_y);
  fn("c_out", c_out);
  visit_lstm("enc_fwd", enc_fwd, fn);
  visit_lstm("enc_rev", enc_rev, fn);
  visit_lstm("dec", dec, fn);
  fn("attn.U", attn_U);
  fn("attn.V", attn_V);
  fn("attn.v", attn_v);
  fn("ctx.W1", ctx_W1);
  fn("ctx.b1", ctx_b1);
  fn("ctx.W2", ctx_W2);
  fn("ctx.b2", ctx_b2);
  fn("W_x", W_x);
  fn("b_x", b_x);
  fn("W_y", W_y);
  fn("b_y", b_y);
  fn("init.W", init_W);
  fn("init.b", init_b);
  fn("out.P", out_P);
  fn("out.b", out_b);
}

std::vector<Tensor*> ModelParameters::parameters() {
  std::vector<Tensor*> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

void save_model(const std::string& path, ModelParameters& params,
                const std::string& src_vocab_ref,
                const std::string& tgt_vocab_ref) {
  std::vector<std::pair<std::string, const Tensor*>> named;
  params.visit([&](const std::string& name, Tensor& t) {
    named.emplace_back(name, &t);
  });
  save_checkpoint(path, named);

  const TrainingConfig& c = params.config;
  nlohmann::json meta;
  meta["format"] = "ctxnmt-model-meta-1";
  meta["source_vocab"] = src_vocab_ref;
  meta["target_vocab"] = tgt_vocab_ref;
  nlohmann::json& cfg = meta["config"];
  cfg["embedding_dim"] = c.embedding_dim;
  cfg["context_dim"] = c.context_dim;
  cfg["encoder_hidden"] = c.encoder_hidden;
  cfg["decoder_hidden"] = c.decoder_hidden;
  cfg["source_vocab"] = c.source_vocab;
  cfg["target_vocab"] = c.target_vocab;
  cfg["learning_rate"] = c.learning_rate;
  cfg["beta1"] = c.beta1;
  cfg["beta2"] = c.beta2;
  cfg["epsilon"] = c.epsilon;
  cfg["clip_threshold"] = c.clip_threshold;
  cfg["batch_size"] = c.batch_size;
  cfg["max_epochs"] = c.max_epochs;
  cfg["patience"] = c.patience;
  cfg["seed"] = c.seed;
  cfg["contextualize"] = c.contextualize;
  cfg["mask_output_embeddings"] = c.mask_output_embeddings;
  cfg["early_stop_metric"] = c.early_stop_metric;

  std::ofstream out(path + ".meta.json", std::ios::binary);
  if (!out) throw std::runtime_error("model: cannot write " + path + ".meta.json");
  out << meta.dump(2) << "\n";
}

LoadedModel load_model(const std::string& path) {
  const std::string meta_path = path + ".meta.json";
  std::ifstream in(meta_path, std::ios::binary);
  if (!in) throw std::runtime_error("model: cannot open " + meta_path);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model: bad JSON in " + meta_path + ": " + e.what());
  }
  if (meta.value("format", "") != "ctxnmt-model-meta-1") {
    throw std::runtime_error("model: unrecognized meta format in " + meta_path);
  }

  TrainingConfig c;
  try {
    const nlohmann::json& cfg = meta.at("config");
    c.embedding_dim = cfg.at("embedding_dim").get<int>();
    c.context_dim = cfg.at("context_dim").get<int>();
    c.encoder_hidden = cfg.at("encoder_hidden").get<int>();
    c.decoder_hidden = cfg.at("decoder_hidden").get<int>();
    c.source_vocab = cfg.at("source_vocab").get<int>();
    c.target_vocab = cfg.at("target_vocab").get<int>();
    c.learning_rate = cfg.at("learning_rate").get<double>();
    c.beta1 = cfg.at("beta1").get<double>();
    c.beta2 = cfg.at("beta2").get<double>();
    c.epsilon = cfg.at("epsilon").get<double>();
    c.clip_threshold = cfg.at("clip_threshold").get<double>();
    c.batch_size = cfg.at("batch_size").get<int>();
    c.max_epochs = cfg.at("max_epochs").get<int>();
    c.patience = cfg.at("patience").get<int>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.contextualize = cfg.at("contextualize").get<bool>();
    c.mask_output_embeddings = cfg.at("mask_output_embeddings").get<bool>();
    c.early_stop_metric = cfg.at("early_stop_metric").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model: incomplete config in " + meta_path + ": " +
                             e.what());
  }

  LoadedModel loaded{ModelParameters::init(c), meta.value("source_vocab", ""),
                     meta.value("target_vocab", "")};
  std::map<std::string, Tensor> by_name;
  for (auto& [name, tensor] : load_checkpoint(path)) {
    by_name.emplace(name, std::move(tensor));
  }
  std::size_t used = 0;
  loaded.params.visit([&](const std::string& name, Tensor& t) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("model: checkpoint " + path + " lacks tensor " + name);
    }
    if (it->second.shape != t.shape) {
      throw std::runtime_error("model: tensor " + name + " has shape " +
                               shape_str(it->second.shape) + ", config implies " +
                               shape_str(t.shape));
    }
    t.values = std::move(it->second.values);
    t.requires_grad = true;
    ++used;
  });
  if (used != by_name.size()) {
    throw std::runtime_error("model: checkpoint " + path + " holds " +
                             std::to_string(by_name.size()) +
                             " tensors, expected " + std::to_string(used));
  }
  return loaded;
}

namespace {

LstmNodes bind_lstm(Graph& g, LstmWeights& w) {
  return LstmNodes{g.param(w.W_i), g.param(w.U_i), g.param(w.b_i),
                   g.param(w.W_f), g.param(w.U_f), g.param(w.b_f),
                   g.param(w.W_g), g.param(w.U_g), g.param(w.b_g),
                   g.param(w.W_o), g.param(w.U_o), g.param(w.b_o)};
}

struct LstmState {
  NodeId h, c;
};

LstmState lstm_step(Graph& g, const LstmNodes& w, NodeId x, LstmState s) {
  auto gate = [&](NodeId W, NodeId U, NodeId b) {
    return g.add(g.add(g.matmul(W, x), g.matmul(U, s.h)), b);
  };
  const NodeId i = g.sigmoid(gate(w.W_i, w.U_i, w.b_i));
  const NodeId f = g.sigmoid(gate(w.W_f, w.U_f, w.b_f));
  const NodeId gt = g.tanh(gate(w.W_g, w.U_g, w.b_g));
  const NodeId o = g.sigmoid(gate(w.W_o, w.U_o, w.b_o));
  const NodeId c = g.add(g.mul(f, s.c), g.mul(i, gt));
  return LstmState{g.mul(o, g.tanh(c)), c};
}

NodeId affine(Graph& g, NodeId W, NodeId x, NodeId b) {
  return g.add(g.matmul(W, x), b);
}

}  // namespace

ModelNodes bind_params(Graph& g, ModelParameters& p) {
  ModelNodes n;
  n.E_x = g.param(p.E_x);
  n.E_y = g.param(p.E_y);
  n.c_out = g.param(p.c_out);
  n.enc_fwd = bind_lstm(g, p.enc_fwd);
  n.enc_rev = bind_lstm(g, p.enc_rev);
  n.dec = bind_lstm(g, p.dec);
  n.attn_U = g.param(p.attn_U);
  n.attn_V = g.param(p.attn_V);
  n.attn_v = g.param(p.attn_v);
  n.ctx_W1 = g.param(p.ctx_W1);
  n.ctx_b1 = g.param(p.ctx_b1);
  n.ctx_W2 = g.param(p.ctx_W2);
  n.ctx_b2 = g.param(p.ctx_b2);
  n.W_x = g.param(p.W_x);
  n.b_x = g.param(p.b_x);
  n.W_y = g.param(p.W_y);
  n.b_y = g.param(p.b_y);
  n.init_W = g.param(p.init_W);
  n.init_b = g.param(p.init_b);
  n.out_P = g.param(p.out_P);
  n.out_b = g.param(p.out_b);
  return n;
}

EncodedSource encode_source(Graph& g, const ModelNodes& nodes,
                            const TrainingConfig& config,
                            const std::vector<int>& src_ids) {
  if (src_ids.empty()) throw std::invalid_argument("encode_source: empty source");
  for (std::size_t t = 0; t < src_ids.size(); ++t) {
    if (src_ids[t] < 0 || src_ids[t] >= config.source_vocab) {
      throw std::invalid_argument(
          "encode_source: source id " + std::to_string(src_ids[t]) +
          " out of range [0," + std::to_string(config.source_vocab) +
          ") at position " + std::to_string(t));
    }
  }

  EncodedSource enc;
  enc.T = static_cast<int>(src_ids.size());

  std::vector<NodeId> x;
  x.reserve(src_ids.size());
  for (const int id : src_ids) x.push_back(g.gather_row(nodes.E_x, id));

  if (config.contextualize) {
    std::vector<NodeId> transformed;
    transformed.reserve(x.size());
    for (const NodeId xt : x) {
      const NodeId hidden = g.tanh(affine(g, nodes.ctx_W1, xt, nodes.ctx_b1));
      transformed.push_back(affine(g, nodes.ctx_W2, hidden, nodes.ctx_b2));
    }
    enc.context = g.mean_rows(g.stack_rows(transformed));
    enc.mask_x = g.sigmoid(affine(g, nodes.W_x, enc.context, nodes.b_x));
    enc.mask_y = g.sigmoid(affine(g, nodes.W_y, enc.context, nodes.b_y));
    for (NodeId& xt : x) xt = g.mul(xt, enc.mask_x);
  }

  const int H = config.encoder_hidden;
  const NodeId zero_h = g.constant(Tensor({H}, 0.0));
  std::vector<NodeId> fwd(x.size()), rev(x.size());
  LstmState s{zero_h, zero_h};
  for (std::size_t t = 0; t < x.size(); ++t) {
    s = lstm_step(g, nodes.enc_fwd, x[t], s);
    fwd[t] = s.h;
  }
  s = LstmState{zero_h, zero_h};
  for (std::size_t t = x.size(); t-- > 0;) {
    s = lstm_step(g, nodes.enc_rev, x[t], s);
    rev[t] = s.h;
  }

  enc.annotations.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    enc.annotations.push_back(g.concat({fwd[t], rev[t]}, 0));
  }
  enc.annotation_matrix = g.stack_rows(enc.annotations);

  const NodeId mean_h = g.mean_rows(enc.annotation_matrix);
  enc.z0 = g.tanh(affine(g, nodes.init_W, mean_h, nodes.init_b));
  enc.cell0 = g.constant(Tensor({config.decoder_hidden}, 0.0));
  return enc;
}

StepResult decode_step(Graph& g, const ModelNodes& nodes,
                       const TrainingConfig& config, const EncodedSource& enc,
                       NodeId z, NodeId cell, int prev_id) {
  if (prev_id < 0 || prev_id >= config.target_vocab) {
    throw std::invalid_argument("decode_step: target id " + std::to_string(prev_id) +
                                " out of range [0," +
                                std::to_string(config.target_vocab) + ")");
  }
  NodeId y = g.gather_row(nodes.E_y, prev_id);
  if (config.contextualize) y = g.mul(y, enc.mask_y);

  // e_t = v . tanh(U z + V h_t); U z is shared across t
  const NodeId uz = g.matmul(nodes.attn_U, z);
  std::vector<NodeId> scores;
  scores.reserve(enc.annotations.size());
  for (const NodeId h : enc.annotations) {
    scores.push_back(
        g.matmul(nodes.attn_v, g.tanh(g.add(uz, g.matmul(nodes.attn_V, h)))));
  }
  StepResult r;
  r.attention = g.softmax(g.concat(scores, 0));
  const NodeId context = g.matmul(r.attention, enc.annotation_matrix);

  const LstmState s =
      lstm_step(g, nodes.dec, g.concat({y, context}, 0), LstmState{z, cell});
  r.z = s.h;
  r.cell = s.c;

  NodeId proj = affine(g, nodes.out_P, s.h, nodes.out_b);
  if (config.mask_output_embeddings && config.contextualize) {
    proj = g.mul(enc.mask_y, proj);
  }
  r.logits = g.add(g.matmul(nodes.E_y, proj), nodes.c_out);
  return r;
}

NodeId sentence_loss_node(Graph& g, const ModelNodes& nodes,
                          const TrainingConfig& config,
                          const std::vector<int>& src_ids,
                          const std::vector<int>& tgt_ids) {
  if (tgt_ids.empty()) throw std::invalid_argument("sentence_loss: empty target");
  const EncodedSource enc = encode_source(g, nodes, config, src_ids);

  NodeId z = enc.z0, cell = enc.cell0;
  int prev = Vocabulary::kBos;
  NodeId loss = -1;
  for (const int gold : tgt_ids) {
    const StepResult r = decode_step(g, nodes, config, enc, z, cell, prev);
    if (gold < 0 || gold >= config.target_vocab) {
      throw std::invalid_argument("sentence_loss: target id " +
                                  std::to_string(gold) + " out of range [0," +
                                  std::to_string(config.target_vocab) + ")");
    }
    const NodeId term = g.nll(r.logits, gold);
    loss = loss < 0 ? term : g.add(loss, term);
    z = r.z;
    cell = r.cell;
    prev = gold;
  }
  return loss;
}

double sentence_loss(ModelParameters& params, const std::vector<int>& src_ids,
                     const std::vector<int>& tgt_ids) {
  Graph g;
  const ModelNodes nodes = bind_params(g, params);
  return g.scalar_value(
      sentence_loss_node(g, nodes, params.config, src_ids, tgt_ids));
}

namespace {

std::vector<double> log_softmax(const Tensor& logits) {
  double mx = logits.values[0];
  for (const double v : logits.values) mx = std::max(mx, v);
  double sum = 0.0;
  for (const double v : logits.values) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits.values[i] - lse;
  return out;
}

long length_cap(const std::vector<int>& src_ids) {
  return 2 * static_cast<long>(src_ids.size()) + 10;
}

}  // namespace

DecodeResult greedy_decode(ModelParameters& params,
                           const std::vector<int>& src_ids, int eos_id,
                           int bos_id) {
  Graph g;
  const ModelNodes nodes = bind_params(g, params);
  const EncodedSource enc = encode_source(g, nodes, params.config, src_ids);

  DecodeResult out;
  NodeId z = enc.z0, cell = enc.cell0;
  int prev = bos_id;
  const long cap = length_cap(src_ids);
  for (long step = 0; step < cap; ++step) {
    const StepResult r = decode_step(g, nodes, params.config, enc, z, cell, prev);
    const std::vector<double> logp = log_softmax(g.value(r.logits));
    int best = 0;
    for (int v = 1; v < static_cast<int>(logp.size()); ++v) {
      if (logp[v] > logp[best]) best = v;  // ties keep the lowest id
    }
    if (best == eos_id) {
      out.log_prob += logp[best];
      return out;
    }
    out.tokens.push_back(best);
    out.log_prob += logp[best];
    z = r.z;
    cell = r.cell;
    prev = best;
  }
  return out;
}

DecodeResult beam_search(ModelParameters& params, const std::vector<int>& src_ids,
                         int width, int eos_id, int bos_id, long max_steps) {
  if (width < 1) {
    throw std::invalid_argument("beam_search: width must be >= 1, got " +
                                std::to_string(width));
  }
  Graph g;
  const ModelNodes nodes = bind_params(g, params);
  const EncodedSource enc = encode_source(g, nodes, params.config, src_ids);

  struct Hyp {
    std::vector<int> tokens;
    double log_prob = 0.0;
    NodeId z, cell;
    int prev;
  };
  std::vector<Hyp> beam{{{}, 0.0, enc.z0, enc.cell0, bos_id}};
  std::vector<DecodeResult> completed;

  struct Cand {
    double log_prob;
    std::size_t parent;
    int token;
  };
  const long cap = max_steps > 0 ? max_steps : length_cap(src_ids);
  for (long step = 0; step < cap && !beam.empty(); ++step) {
    std::vector<StepResult> results(beam.size());
    std::vector<Cand> cands;
    cands.reserve(beam.size() * static_cast<std::size_t>(params.config.target_vocab));
    for (std::size_t p = 0; p < beam.size(); ++p) {
      results[p] =
          decode_step(g, nodes, params.config, enc, beam[p].z, beam[p].cell,
                      beam[p].prev);
      const std::vector<double> logp = log_softmax(g.value(results[p].logits));
      for (int v = 0; v < static_cast<int>(logp.size()); ++v) {
        cands.push_back({beam[p].log_prob + logp[v], p, v});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    // only the top `width` candidates survive: finished ones retire to the
    // completed pool, the rest form the next beam (so width 1 is exactly
    // iterated argmax)
    const std::size_t take =
        std::min(cands.size(), static_cast<std::size_t>(width));
    std::vector<Hyp> next;
    next.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const Cand& c = cands[i];
      if (c.token == eos_id) {
        completed.push_back({beam[c.parent].tokens, c.log_prob});
        continue;
      }
      Hyp h;
      h.tokens = beam[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.z = results[c.parent].z;
      h.cell = results[c.parent].cell;
      h.prev = c.token;
      next.push_back(std::move(h));
    }
    beam = std::move(next);
  }

  if (!completed.empty()) {
    const DecodeResult* best = &completed[0];
    for (const DecodeResult& c : completed) {
      if (c.log_prob > best->log_prob) best = &c;
    }
    return *best;
  }
  // length cap hit with nothing finished; beam is sorted by construction
  return {beam.front().tokens, beam.front().log_prob};
}

std::string format_metrics_line(const EpochMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\t%.2f", m.epoch, m.train_nll,
                m.dev_nll, m.dev_bleu);
  return buf;
}

namespace {

std::vector<int> to_ids(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab, bool append_eos) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& t : tokens) ids.push_back(vocab.lookup(t));
  if (append_eos) ids.push_back(Vocabulary::kEos);
  return ids;
}

struct DevScore {
  double nll = 0.0;
  double bleu = 0.0;
};

DevScore evaluate_dev(ModelParameters& params,
                      const std::vector<SentencePair>& dev_pairs,
                      const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  DevScore score;
  double loss_sum = 0.0;
  long token_sum = 0;
  std::vector<std::vector<int>> hyps, refs;
  hyps.reserve(dev_pairs.size());
  refs.reserve(dev_pairs.size());
  for (const SentencePair& pair : dev_pairs) {
    const std::vector<int> src = to_ids(pair.source, src_vocab, true);
    const std::vector<int> tgt = to_ids(pair.target, tgt_vocab, true);
    loss_sum += sentence_loss(params, src, tgt);
    token_sum += static_cast<long>(tgt.size());
    hyps.push_back(greedy_decode(params, src).tokens);
    refs.push_back(to_ids(pair.target, tgt_vocab, false));
  }
  score.nll = loss_sum / static_cast<double>(token_sum);
  score.bleu = corpus_bleu_ids(hyps, refs).bleu;
  return score;
}

}  // namespace

TrainResult train(const std::vector<SentencePair>& train_pairs,
                  const std::vector<SentencePair>& dev_pairs,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                  const TrainingConfig& config, std::ostream* metrics_out) {
  config.validate();
  if (train_pairs.empty()) throw std::invalid_argument("train: empty training corpus");
  if (dev_pairs.empty()) throw std::invalid_argument("train: empty dev corpus");

  TrainResult result;
  ModelParameters params = ModelParameters::init(config);
  ModelParameters last_good = params;
  ModelParameters best = params;
  const std::vector<Tensor*> tensors = params.parameters();

  AdamState opt;
  opt.learning_rate = config.learning_rate;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.epsilon = config.epsilon;
  opt.clip_threshold = config.clip_threshold;

  double best_metric = 0.0;
  bool have_best = false;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::vector<Batch> batches =
        make_batches(train_pairs, src_vocab, tgt_vocab, config.batch_size,
                     config.seed + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    long token_sum = 0;
    for (const Batch& batch : batches) {
      Graph g;
      const ModelNodes nodes = bind_params(g, params);
      NodeId total = -1;
      long batch_tokens = 0;
      for (int i = 0; i < batch.size(); ++i) {
        const std::vector<int> src(batch.source[i].begin(),
                                   batch.source[i].begin() + batch.source_len[i]);
        const std::vector<int> tgt(batch.target[i].begin() + 1,
                                   batch.target[i].begin() + batch.target_len[i]);
        const NodeId loss = sentence_loss_node(g, nodes, config, src, tgt);
        total = total < 0 ? loss : g.add(total, loss);
        batch_tokens += static_cast<long>(tgt.size());
      }
      const double value = g.scalar_value(total);
      if (!std::isfinite(value)) {
        result.diverged = true;
        break;
      }
      zero_grads(tensors);
      g.backward(total);
      try {
        adam_step(tensors, opt);
      } catch (const std::runtime_error&) {  // non-finite gradients
        result.diverged = true;
        break;
      }
      loss_sum += value;
      token_sum += batch_tokens;
    }
    if (result.diverged) break;

    EpochMetrics m;
    m.epoch = epoch;
    m.train_nll = loss_sum / static_cast<double>(token_sum);
    const DevScore dev = evaluate_dev(params, dev_pairs, src_vocab, tgt_vocab);
    m.dev_nll = dev.nll;
    m.dev_bleu = dev.bleu;
    result.metrics.push_back(m);
    if (metrics_out) *metrics_out << format_metrics_line(m) << "\n" << std::flush;

    // minimized; BLEU enters negated
    const double metric =
        config.early_stop_metric == "bleu" ? -dev.bleu : dev.nll;
    if (!have_best || metric < best_metric) {
      have_best = true;
      best_metric = metric;
      best = params;
      result.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      last_good = params;
      break;
    }
    last_good = params;
  }

  result.params = result.diverged ? std::move(last_good) : std::move(best);
  return result;
}

}  // namespace ctxnmt
