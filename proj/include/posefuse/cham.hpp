#pragma once

#include "posefuse/backbones.hpp"
#include "posefuse/grid.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace posefuse {

/// One cross-attention layer, shared by both directions.
struct AttentionLayer {
  Eigen::MatrixXd wq, wk, wv, wo;  // C x C
  Eigen::MatrixXd f1;              // F x C
  Eigen::VectorXd fb1;
  Eigen::MatrixXd f2;  // C x F
  Eigen::VectorXd fb2;

  template <typename F>
  void visit(F&& f) {
    f(wq);
    f(wk);
    f(wv);
    f(wo);
    f(f1);
    f(fb1);
    f(f2);
    f(fb2);
  }
};

/// Per-block 1x1 maps of one side: out_k = feats W_k^T + b_k.
struct BranchMaps {
  std::vector<Eigen::MatrixXd> w;  // D x (C x C)
  std::vector<Eigen::VectorXd> b;  // D x C
};

struct ChamParams {
  int depth = 0;
  int channels = 0;
  std::vector<AttentionLayer> attention;
  std::array<BranchMaps, 2> branch;  // indexed by Side

  const BranchMaps& side(Side s) const { return branch[static_cast<std::size_t>(side_index(s))]; }

  template <typename F>
  void visit(F&& f) {
    for (auto& l : attention) l.visit(f);
    for (auto& br : branch) {
      for (auto& m : br.w) f(m);
      for (auto& v : br.b) f(v);
    }
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<ChamParams*>(this)->visit([&](const auto& m) { f(m); });
  }

  Eigen::Index parameter_count() const;
};

inline constexpr int kAttentionLayers = 3;

/// Branch maps and biases exactly zero; attention drawn from the seed.
ChamParams init_cham(std::uint64_t seed, int depth, int channels, int layers = kAttentionLayers);

/// Same structure, every entry zero (gradient accumulator).
ChamParams zeros_like(const ChamParams& p);

/// a += s * b over every tensor.
void axpy(ChamParams& a, double s, const ChamParams& b);

/// All tensors flattened in visit order.
Eigen::VectorXd flatten(const ChamParams& p);
void unflatten(ChamParams& p, const Eigen::VectorXd& v);

std::uint64_t cham_hash(const ChamParams& p);
std::string serialize_cham(const ChamParams& p);
ChamParams deserialize_cham(const std::string& bytes);

/// Cached activations of one layer in one direction (queries from `a`).
struct AttentionCache {
  Eigen::MatrixXd a, b;  // inputs
  Eigen::MatrixXd q, k, v, p, o;
  Eigen::MatrixXd a1, h;
};

struct CrossAttentionTrace {
  std::vector<std::array<AttentionCache, 2>> layers;  // [0]: a <- b, [1]: b <- a
};

/// Three (or `params.attention.size()`) bidirectional layers: each side attends to
/// the other side's previous state, with residual and tanh feed-forward sublayers.
std::pair<TokenGrid, TokenGrid> cross_attention_encode(const TokenGrid& a, const TokenGrid& b, const ChamParams& params,
                                                       CrossAttentionTrace* trace = nullptr);

/// Positional encoding plus cross-attention when both hands are detected;
/// otherwise the tokens pass through unchanged.
std::pair<TokenGrid, TokenGrid> build_condition(const HandObservation& left, const HandObservation& right,
                                                const ChamParams& params, double image_w, double image_h,
                                                CrossAttentionTrace* trace = nullptr);

/// D grids, out[k] = feats W_k^T + b_k per token; geometry preserved.
std::vector<TokenGrid> project_per_block(const BranchMaps& branch, const TokenGrid& feats);

/// Inverse crop-and-resize onto the body grid with zero fill.
TokenGrid realign_to_body(const TokenGrid& grid, int body_h, int body_w, const Affine2D& body_affine);

/// Element-wise max per block. Throws DimMismatch.
ModulationStack merge_hands(const std::vector<TokenGrid>& left, const std::vector<TokenGrid>& right);

struct BodyGridGeometry {
  int h = 16;
  int w = 12;
  Affine2D affine;
  double image_w = 288.0;
  double image_h = 384.0;
};

/// Everything the backward pass needs from one forward.
struct ChamTrace {
  bool attended = false;
  CrossAttentionTrace attention;
  std::array<bool, 2> detected{false, false};
  std::array<TokenGrid, 2> condition;                     // build_condition output per side
  std::array<std::vector<Eigen::MatrixXd>, 2> realigned;  // body-grid stacks before the merge
  std::array<std::vector<ResampleMap>, 2> maps;           // hand grid -> body grid, one per side (size 0 or 1)
};

/// Undetected sides contribute an all-zero stack.
ModulationStack cham_forward(const HandObservation& left, const HandObservation& right, const ChamParams& params,
                             const BodyGridGeometry& body, ChamTrace* trace = nullptr);

/// Parameter gradient from dL/dmodulation (one body-grid matrix per block).
/// Ties in the max merge split the gradient evenly.
ChamParams cham_backward(const ChamParams& params, const ChamTrace& trace,
                         const std::vector<Eigen::MatrixXd>& g_modulation);

}  // namespace posefuse
