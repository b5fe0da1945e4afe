#pragma once

#include <array>
#include <cstdint>
#include <cstring>

#include "sev/parallel.hpp"
#include "sev/tensor.hpp"

// Direct (no FFT / Winograd) 3D cross-correlation kernels and companions.
// Reduction order is fixed and documented: for every output element the
// accumulation runs over input channels (outer) and kernel taps (inner),
// sequentially, so results are bit-identical for any worker count.
// Parallelism only ever partitions disjoint output elements.

namespace sev {

using Dim3 = std::array<std::int64_t, 3>;

struct ConvSpec {
  Dim3 kernel{1, 1, 1};
  Dim3 stride{1, 1, 1};
  Dim3 pad{0, 0, 0};
  Dim3 output_padding{0, 0, 0};

  static ConvSpec cubic(std::int64_t k, std::int64_t s = 1, std::int64_t p = 0,
                        std::int64_t op = 0) {
    ConvSpec spec;
    spec.kernel = {k, k, k};
    spec.stride = {s, s, s};
    spec.pad = {p, p, p};
    spec.output_padding = {op, op, op};
    return spec;
  }

  /// Stride-1 spec that preserves spatial extents (pad = (k-1)/2).
  static ConvSpec same(std::int64_t k) { return cubic(k, 1, (k - 1) / 2); }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (kernel[a] < 1 || kernel[a] % 2 == 0)
        throw ShapeError("kernel extent must be odd and >= 1, got " +
                         std::to_string(kernel[a]));
      if (stride[a] < 1) throw ShapeError("stride must be >= 1");
      if (pad[a] < 0) throw ShapeError("padding must be >= 0");
      if (output_padding[a] < 0 || output_padding[a] >= stride[a])
        throw ShapeError("output_padding must be in [0, stride)");
    }
  }

  Dim3 conv_output_extents(const Dim3& in) const {
    Dim3 out;
    for (int a = 0; a < 3; ++a) {
      out[a] = (in[a] + 2 * pad[a] - kernel[a]) / stride[a] + 1;
      if (in[a] + 2 * pad[a] < kernel[a] || out[a] < 1)
        throw ShapeError("convolution output extent < 1 on axis " +
                         std::to_string(a));
    }
    return out;
  }

  Dim3 transpose_output_extents(const Dim3& in) const {
    Dim3 out;
    for (int a = 0; a < 3; ++a) {
      out[a] = (in[a] - 1) * stride[a] - 2 * pad[a] + kernel[a] +
               output_padding[a];
      if (out[a] < 1)
        throw ShapeError("transposed convolution output extent < 1 on axis " +
                         std::to_string(a));
    }
    return out;
  }
};

namespace detail {

inline Dim3 spatial_extents(const Tensor<double>& t);

template <typename T>
Dim3 trailing3(const Tensor<T>& t) {
  const int r = t.rank();
  return {t.extent(r - 3), t.extent(r - 2), t.extent(r - 1)};
}

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& filters,
                     const ConvSpec& spec, bool transposed) {
  spec.validate();
  if (input.rank() != 4)
    throw ShapeError("conv input must be rank 4 [C,D,H,W], got " +
                     shape_str(input.shape()));
  if (filters.rank() != 5)
    throw ShapeError("conv filters must be rank 5, got " +
                     shape_str(filters.shape()));
  const Dim3 k = trailing3(filters);
  if (k[0] != spec.kernel[0] || k[1] != spec.kernel[1] || k[2] != spec.kernel[2])
    throw ShapeError("filter extents " + shape_str(filters.shape()) +
                     " do not match spec kernel");
  const std::int64_t fin = transposed ? filters.extent(0) : filters.extent(1);
  if (fin != input.extent(0))
    throw ShapeError("filter input-channel count " + std::to_string(fin) +
                     " does not match input channels " +
                     std::to_string(input.extent(0)));
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -(((-a) + b - 1) / b);
}

}  // namespace detail

// Cross-correlation (no kernel flip):
//   out[o, z] = sum_i sum_k in[i, z*stride - pad + k] * w[o, i, k]
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& filters,
                 const ConvSpec& spec) {
  detail::check_conv_args(input, filters, spec, false);
  const std::int64_t Ci = input.extent(0), D = input.extent(1),
                     H = input.extent(2), W = input.extent(3);
  const std::int64_t Co = filters.extent(0);
  const Dim3 out_e = spec.conv_output_extents({D, H, W});
  const std::int64_t Do = out_e[0], Ho = out_e[1], Wo = out_e[2];
  const Dim3 K = spec.kernel, S = spec.stride, P = spec.pad;

  Tensor<T> out({Co, Do, Ho, Wo});
  const T* in = input.data();
  const T* w = filters.data();
  T* o = out.data();

  // Output rows with every kernel tap in bounds (no per-tap checks needed).
  Dim3 lo, hi;  // inclusive interior output ranges per axis
  const Dim3 in_e = {D, H, W};
  for (int a = 0; a < 3; ++a) {
    lo[a] = detail::ceil_div(P[a], S[a]);
    hi[a] = detail::floor_div(in_e[a] - K[a] + P[a], S[a]);
    if (hi[a] > out_e[a] - 1) hi[a] = out_e[a] - 1;
  }

  parallel_for(0, Co * Do, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t od_flat = begin; od_flat < end; ++od_flat) {
      const std::int64_t oc = od_flat / Do, od = od_flat % Do;
      const bool d_in = od >= lo[0] && od <= hi[0];
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        const bool h_in = oh >= lo[1] && oh <= hi[1];
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          const bool interior = d_in && h_in && ow >= lo[2] && ow <= hi[2];
          const std::int64_t id0 = od * S[0] - P[0];
          const std::int64_t ih0 = oh * S[1] - P[1];
          const std::int64_t iw0 = ow * S[2] - P[2];
          T acc = T(0);
          if (interior) {
            for (std::int64_t ic = 0; ic < Ci; ++ic) {
              const T* wrow = w + (((oc * Ci + ic) * K[0]) * K[1]) * K[2];
              const T* inc = in + ((ic * D + id0) * H + ih0) * W + iw0;
              for (std::int64_t kd = 0; kd < K[0]; ++kd) {
                for (std::int64_t kh = 0; kh < K[1]; ++kh) {
                  const T* irow = inc + (kd * H + kh) * W;
                  for (std::int64_t kw = 0; kw < K[2]; ++kw)
                    acc += irow[kw] * wrow[(kd * K[1] + kh) * K[2] + kw];
                }
              }
            }
          } else {
            for (std::int64_t ic = 0; ic < Ci; ++ic) {
              const T* wrow = w + (((oc * Ci + ic) * K[0]) * K[1]) * K[2];
              for (std::int64_t kd = 0; kd < K[0]; ++kd) {
                const std::int64_t id = id0 + kd;
                if (id < 0 || id >= D) continue;
                for (std::int64_t kh = 0; kh < K[1]; ++kh) {
                  const std::int64_t ih = ih0 + kh;
                  if (ih < 0 || ih >= H) continue;
                  const T* irow = in + ((ic * D + id) * H + ih) * W;
                  for (std::int64_t kw = 0; kw < K[2]; ++kw) {
                    const std::int64_t iw = iw0 + kw;
                    if (iw < 0 || iw >= W) continue;
                    acc += irow[iw] * wrow[(kd * K[1] + kh) * K[2] + kw];
                  }
                }
              }
            }
          }
          o[((oc * Do + od) * Ho + oh) * Wo + ow] = acc;
        }
      }
    }
  });
  ensure_finite(out, "conv3d output");
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> filters;
};

template <typename T>
ConvGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& filters,
                             const ConvSpec& spec, const Tensor<T>& grad_out) {
  detail::check_conv_args(input, filters, spec, false);
  const std::int64_t Ci = input.extent(0), D = input.extent(1),
                     H = input.extent(2), W = input.extent(3);
  const std::int64_t Co = filters.extent(0);
  const Dim3 out_e = spec.conv_output_extents({D, H, W});
  const std::int64_t Do = out_e[0], Ho = out_e[1], Wo = out_e[2];
  if (grad_out.shape() != Shape{Co, Do, Ho, Wo})
    throw ShapeError("conv3d_backward: grad_out shape mismatch");
  const Dim3 K = spec.kernel, S = spec.stride, P = spec.pad;

  ConvGrads<T> g{Tensor<T>({Ci, D, H, W}), Tensor<T>(filters.shape())};
  const T* in = input.data();
  const T* w = filters.data();
  const T* go = grad_out.data();

  // d loss / d input: gather over the output positions each input voxel fed.
  T* gi = g.input.data();
  parallel_for(0, Ci * D, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      const std::int64_t ic = f / D, id = f % D;
      for (std::int64_t ih = 0; ih < H; ++ih) {
        for (std::int64_t iw = 0; iw < W; ++iw) {
          T acc = T(0);
          for (std::int64_t oc = 0; oc < Co; ++oc) {
            const T* wrow = w + (((oc * Ci + ic) * K[0]) * K[1]) * K[2];
            for (std::int64_t kd = 0; kd < K[0]; ++kd) {
              const std::int64_t num_d = id + P[0] - kd;
              if (num_d % S[0] != 0) continue;
              const std::int64_t od = num_d / S[0];
              if (od < 0 || od >= Do) continue;
              for (std::int64_t kh = 0; kh < K[1]; ++kh) {
                const std::int64_t num_h = ih + P[1] - kh;
                if (num_h % S[1] != 0) continue;
                const std::int64_t oh = num_h / S[1];
                if (oh < 0 || oh >= Ho) continue;
                for (std::int64_t kw = 0; kw < K[2]; ++kw) {
                  const std::int64_t num_w = iw + P[2] - kw;
                  if (num_w % S[2] != 0) continue;
                  const std::int64_t ow = num_w / S[2];
                  if (ow < 0 || ow >= Wo) continue;
                  acc += go[((oc * Do + od) * Ho + oh) * Wo + ow] *
                         wrow[(kd * K[1] + kh) * K[2] + kw];
                }
              }
            }
          }
          gi[((ic * D + id) * H + ih) * W + iw] = acc;
        }
      }
    }
  });

  // d loss / d filters: each filter tap sums over the valid output range.
  T* gw = g.filters.data();
  parallel_for(0, Co * Ci, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      const std::int64_t oc = f / Ci, ic = f % Ci;
      for (std::int64_t kd = 0; kd < K[0]; ++kd) {
        const std::int64_t od_lo =
            std::max<std::int64_t>(0, detail::ceil_div(P[0] - kd, S[0]));
        const std::int64_t od_hi = std::min<std::int64_t>(
            Do - 1, detail::floor_div(D - 1 + P[0] - kd, S[0]));
        for (std::int64_t kh = 0; kh < K[1]; ++kh) {
          const std::int64_t oh_lo =
              std::max<std::int64_t>(0, detail::ceil_div(P[1] - kh, S[1]));
          const std::int64_t oh_hi = std::min<std::int64_t>(
              Ho - 1, detail::floor_div(H - 1 + P[1] - kh, S[1]));
          for (std::int64_t kw = 0; kw < K[2]; ++kw) {
            const std::int64_t ow_lo =
                std::max<std::int64_t>(0, detail::ceil_div(P[2] - kw, S[2]));
            const std::int64_t ow_hi = std::min<std::int64_t>(
                Wo - 1, detail::floor_div(W - 1 + P[2] - kw, S[2]));
            T acc = T(0);
            for (std::int64_t od = od_lo; od <= od_hi; ++od) {
              const std::int64_t id = od * S[0] - P[0] + kd;
              for (std::int64_t oh = oh_lo; oh <= oh_hi; ++oh) {
                const std::int64_t ih = oh * S[1] - P[1] + kh;
                const T* grow = go + ((oc * Do + od) * Ho + oh) * Wo;
                const T* irow = in + ((ic * D + id) * H + ih) * W;
                for (std::int64_t ow = ow_lo; ow <= ow_hi; ++ow)
                  acc += grow[ow] * irow[ow * S[2] - P[2] + kw];
              }
            }
            gw[(((oc * Ci + ic) * K[0] + kd) * K[1] + kh) * K[2] + kw] = acc;
          }
        }
      }
    }
  });

  ensure_finite(g.input, "conv3d_backward input gradient");
  ensure_finite(g.filters, "conv3d_backward filter gradient");
  return g;
}

// Exact adjoint of conv3d. Filter layout is [C_in, C_out, K, K, K] where
// C_in are the channels of the transposed-conv input, so a conv3d filter
// tensor can be passed unchanged for the adjoint identity
//   <conv3d(x, w), y> == <x, conv_transpose3d(y, w)>.
//   out[o, x] = sum_i sum_k in[i, (x + pad - k) / stride] * w[i, o, k]
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& input, const Tensor<T>& filters,
                           const ConvSpec& spec) {
  detail::check_conv_args(input, filters, spec, true);
  const std::int64_t Ci = input.extent(0), D = input.extent(1),
                     H = input.extent(2), W = input.extent(3);
  const std::int64_t Co = filters.extent(1);
  const Dim3 out_e = spec.transpose_output_extents({D, H, W});
  const std::int64_t Xd = out_e[0], Xh = out_e[1], Xw = out_e[2];
  const Dim3 K = spec.kernel, S = spec.stride, P = spec.pad;

  Tensor<T> out({Co, Xd, Xh, Xw});
  const T* in = input.data();
  const T* w = filters.data();
  T* o = out.data();

  parallel_for(0, Co * Xd, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      const std::int64_t oc = f / Xd, xd = f % Xd;
      for (std::int64_t xh = 0; xh < Xh; ++xh) {
        for (std::int64_t xw = 0; xw < Xw; ++xw) {
          T acc = T(0);
          for (std::int64_t ic = 0; ic < Ci; ++ic) {
            const T* wrow = w + (((ic * Co + oc) * K[0]) * K[1]) * K[2];
            for (std::int64_t kd = 0; kd < K[0]; ++kd) {
              const std::int64_t num_d = xd + P[0] - kd;
              if (num_d % S[0] != 0) continue;
              const std::int64_t zd = num_d / S[0];
              if (zd < 0 || zd >= D) continue;
              for (std::int64_t kh = 0; kh < K[1]; ++kh) {
                const std::int64_t num_h = xh + P[1] - kh;
                if (num_h % S[1] != 0) continue;
                const std::int64_t zh = num_h / S[1];
                if (zh < 0 || zh >= H) continue;
                for (std::int64_t kw = 0; kw < K[2]; ++kw) {
                  const std::int64_t num_w = xw + P[2] - kw;
                  if (num_w % S[2] != 0) continue;
                  const std::int64_t zw = num_w / S[2];
                  if (zw < 0 || zw >= W) continue;
                  acc += in[((ic * D + zd) * H + zh) * W + zw] *
                         wrow[(kd * K[1] + kh) * K[2] + kw];
                }
              }
            }
          }
          o[((oc * Xd + xd) * Xh + xh) * Xw + xw] = acc;
        }
      }
    }
  });
  ensure_finite(out, "conv_transpose3d output");
  return out;
}

template <typename T>
ConvGrads<T> conv_transpose3d_backward(const Tensor<T>& input,
                                       const Tensor<T>& filters,
                                       const ConvSpec& spec,
                                       const Tensor<T>& grad_out) {
  detail::check_conv_args(input, filters, spec, true);
  const std::int64_t Ci = input.extent(0), D = input.extent(1),
                     H = input.extent(2), W = input.extent(3);
  const std::int64_t Co = filters.extent(1);
  const Dim3 out_e = spec.transpose_output_extents({D, H, W});
  const std::int64_t Xd = out_e[0], Xh = out_e[1], Xw = out_e[2];
  if (grad_out.shape() != Shape{Co, Xd, Xh, Xw})
    throw ShapeError("conv_transpose3d_backward: grad_out shape mismatch");
  const Dim3 K = spec.kernel, S = spec.stride, P = spec.pad;

  ConvGrads<T> g{Tensor<T>({Ci, D, H, W}), Tensor<T>(filters.shape())};
  const T* in = input.data();
  const T* w = filters.data();
  const T* go = grad_out.data();

  // Adjoint of the adjoint: gradient w.r.t. input is a forward gather.
  T* gi = g.input.data();
  parallel_for(0, Ci * D, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      const std::int64_t ic = f / D, zd = f % D;
      for (std::int64_t zh = 0; zh < H; ++zh) {
        for (std::int64_t zw = 0; zw < W; ++zw) {
          T acc = T(0);
          for (std::int64_t oc = 0; oc < Co; ++oc) {
            const T* wrow = w + (((ic * Co + oc) * K[0]) * K[1]) * K[2];
            for (std::int64_t kd = 0; kd < K[0]; ++kd) {
              const std::int64_t xd = zd * S[0] - P[0] + kd;
              if (xd < 0 || xd >= Xd) continue;
              for (std::int64_t kh = 0; kh < K[1]; ++kh) {
                const std::int64_t xh = zh * S[1] - P[1] + kh;
                if (xh < 0 || xh >= Xh) continue;
                const T* grow = go + ((oc * Xd + xd) * Xh + xh) * Xw;
                for (std::int64_t kw = 0; kw < K[2]; ++kw) {
                  const std::int64_t xw = zw * S[2] - P[2] + kw;
                  if (xw < 0 || xw >= Xw) continue;
                  acc += grow[xw] * wrow[(kd * K[1] + kh) * K[2] + kw];
                }
              }
            }
          }
          gi[((ic * D + zd) * H + zh) * W + zw] = acc;
        }
      }
    }
  });

  T* gw = g.filters.data();
  parallel_for(0, Ci * Co, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      const std::int64_t ic = f / Co, oc = f % Co;
      for (std::int64_t kd = 0; kd < K[0]; ++kd) {
        const std::int64_t zd_lo =
            std::max<std::int64_t>(0, detail::ceil_div(P[0] - kd, S[0]));
        const std::int64_t zd_hi = std::min<std::int64_t>(
            D - 1, detail::floor_div(Xd - 1 + P[0] - kd, S[0]));
        for (std::int64_t kh = 0; kh < K[1]; ++kh) {
          const std::int64_t zh_lo =
              std::max<std::int64_t>(0, detail::ceil_div(P[1] - kh, S[1]));
          const std::int64_t zh_hi = std::min<std::int64_t>(
              H - 1, detail::floor_div(Xh - 1 + P[1] - kh, S[1]));
          for (std::int64_t kw = 0; kw < K[2]; ++kw) {
            const std::int64_t zw_lo =
                std::max<std::int64_t>(0, detail::ceil_div(P[2] - kw, S[2]));
            const std::int64_t zw_hi = std::min<std::int64_t>(
                W - 1, detail::floor_div(Xw - 1 + P[2] - kw, S[2]));
            T acc = T(0);
            for (std::int64_t zd = zd_lo; zd <= zd_hi; ++zd) {
              const std::int64_t xd = zd * S[0] - P[0] + kd;
              for (std::int64_t zh = zh_lo; zh <= zh_hi; ++zh) {
                const std::int64_t xh = zh * S[1] - P[1] + kh;
                const T* irow = in + ((ic * D + zd) * H + zh) * W;
                const T* grow = go + ((oc * Xd + xd) * Xh + xh) * Xw;
                for (std::int64_t zw = zw_lo; zw <= zw_hi; ++zw)
                  acc += irow[zw] * grow[zw * S[2] - P[2] + kw];
              }
            }
            gw[(((ic * Co + oc) * K[0] + kd) * K[1] + kh) * K[2] + kw] = acc;
          }
        }
      }
    }
  });

  ensure_finite(g.input, "conv_transpose3d_backward input gradient");
  ensure_finite(g.filters, "conv_transpose3d_backward filter gradient");
  return g;
}

/// Grow `axis` by `before + after` entries that copy the nearest boundary
/// slice.
template <typename T>
Tensor<T> pad_replicate_axis(const Tensor<T>& input, int axis,
                             std::int64_t before, std::int64_t after) {
  if (axis < 0 || axis >= input.rank())
    throw ShapeError("pad_replicate_axis: invalid axis " +
                     std::to_string(axis));
  if (before < 0 || after < 0)
    throw ShapeError("pad_replicate_axis: negative pad");
  if (before == 0 && after == 0) return input;

  const Shape& s = input.shape();
  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= s[static_cast<std::size_t>(a)];
  for (int a = axis + 1; a < input.rank(); ++a)
    inner *= s[static_cast<std::size_t>(a)];
  const std::int64_t n = s[static_cast<std::size_t>(axis)];
  const std::int64_t n_out = n + before + after;

  Shape out_shape = s;
  out_shape[static_cast<std::size_t>(axis)] = n_out;
  Tensor<T> out(out_shape);
  const T* in = input.data();
  T* o = out.data();
  for (std::int64_t u = 0; u < outer; ++u) {
    for (std::int64_t j = 0; j < n_out; ++j) {
      const std::int64_t src = std::clamp<std::int64_t>(j - before, 0, n - 1);
      std::memcpy(o + (u * n_out + j) * inner, in + (u * n + src) * inner,
                  static_cast<std::size_t>(inner) * sizeof(T));
    }
  }
  return out;
}

/// Symmetric removal of `margins[i]` entries per side on the trailing axes
/// (margins may cover fewer axes than the tensor rank; leading axes keep
/// their full extent).
template <typename T>
Tensor<T> crop_center(const Tensor<T>& input,
                      const std::vector<std::int64_t>& margins) {
  const int r = input.rank();
  if (static_cast<int>(margins.size()) > r)
    throw ShapeError("crop_center: more margins than axes");
  std::vector<std::int64_t> m(static_cast<std::size_t>(r), 0);
  std::copy(margins.begin(), margins.end(),
            m.end() - static_cast<std::int64_t>(margins.size()));
  Shape out_shape(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) {
    const auto ma = m[static_cast<std::size_t>(a)];
    if (ma < 0) throw ShapeError("crop_center: negative margin");
    out_shape[static_cast<std::size_t>(a)] = input.extent(a) - 2 * ma;
    if (2 * ma >= input.extent(a))
      throw ShapeError("crop_center: margin " + std::to_string(ma) +
                       " too large for extent " +
                       std::to_string(input.extent(a)));
  }
  Tensor<T> out(out_shape);
  const Shape ist = input.strides();
  const std::int64_t row = out_shape.back();
  const std::int64_t rows = out.size() / row;
  const T* in = input.data();
  T* o = out.data();
  for (std::int64_t ri = 0; ri < rows; ++ri) {
    std::int64_t rem = ri, src = 0;
    for (int a = r - 2; a >= 0; --a) {
      const std::int64_t e = out_shape[static_cast<std::size_t>(a)];
      const std::int64_t c = rem % e;
      rem /= e;
      src += (c + m[static_cast<std::size_t>(a)]) * ist[static_cast<std::size_t>(a)];
    }
    std::memcpy(o + ri * row, in + src + m.back(),
                static_cast<std::size_t>(row) * sizeof(T));
  }
  return out;
}

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::int64_t> argmax;  // input linear offsets, one per output
};

/// Spatial max pooling over [C,D,H,W]; ties resolve to the lowest linear
/// index (first in scan order) so gradients are reproducible.
template <typename T>
MaxPoolResult<T> max_pool3d(const Tensor<T>& input, const Dim3& window,
                            const Dim3& stride) {
  if (input.rank() != 4) throw ShapeError("max_pool3d input must be rank 4");
  for (int a = 0; a < 3; ++a)
    if (window[a] < 1 || stride[a] < 1)
      throw ShapeError("max_pool3d: window and stride must be >= 1");
  const std::int64_t C = input.extent(0), D = input.extent(1),
                     H = input.extent(2), W = input.extent(3);
  Dim3 out_e;
  const Dim3 in_e{D, H, W};
  for (int a = 0; a < 3; ++a) {
    if (in_e[a] < window[a])
      throw ShapeError("max_pool3d: output extent < 1");
    out_e[a] = (in_e[a] - window[a]) / stride[a] + 1;
  }
  MaxPoolResult<T> r{Tensor<T>({C, out_e[0], out_e[1], out_e[2]}), {}};
  r.argmax.assign(static_cast<std::size_t>(r.output.size()), 0);
  const T* in = input.data();
  T* o = r.output.data();
  std::int64_t* am = r.argmax.data();
  std::int64_t oi = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t od = 0; od < out_e[0]; ++od) {
      for (std::int64_t oh = 0; oh < out_e[1]; ++oh) {
        for (std::int64_t ow = 0; ow < out_e[2]; ++ow, ++oi) {
          T best = T(0);
          std::int64_t best_idx = -1;
          for (std::int64_t kd = 0; kd < window[0]; ++kd) {
            const std::int64_t id = od * stride[0] + kd;
            for (std::int64_t kh = 0; kh < window[1]; ++kh) {
              const std::int64_t ih = oh * stride[1] + kh;
              for (std::int64_t kw = 0; kw < window[2]; ++kw) {
                const std::int64_t iw = ow * stride[2] + kw;
                const std::int64_t idx = ((c * D + id) * H + ih) * W + iw;
                if (best_idx < 0 || in[idx] > best) {
                  best = in[idx];
                  best_idx = idx;
                }
              }
            }
          }
          o[oi] = best;
          am[oi] = best_idx;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> max_pool3d_backward(const MaxPoolResult<T>& fwd,
                              const Shape& input_shape,
                              const Tensor<T>& grad_out) {
  if (grad_out.size() != static_cast<std::int64_t>(fwd.argmax.size()))
    throw ShapeError("max_pool3d_backward: grad_out size mismatch");
  Tensor<T> gi(input_shape);
  T* g = gi.data();
  const T* go = grad_out.data();
  for (std::size_t i = 0; i < fwd.argmax.size(); ++i)
    g[fwd.argmax[i]] += go[i];
  return gi;
}

}  // namespace sev
