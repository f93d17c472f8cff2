#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace petseg::kernels {

// Dense stride-1 3D convolution kernels. Layout everywhere: [C, D, H, W],
// W contiguous. Padding is symmetric zero padding of `pad` voxels per side,
// so output extents are E + 2*pad - k + 1.
//
// Every output element is produced by exactly one thread and its taps are
// summed in a fixed (ci, kd, kh, kw) order, so results do not depend on the
// number of threads.

namespace detail {

// C[m, n] = (acc ? C : init[m]) + sum_k A[m, k] * B[k, n]; row strides lda,
// ldb, ldc. Tiles are owned by one thread each, so results do not depend on
// the thread count.
template <class S>
void gemm_nn(const S* A, int64_t lda, const S* B, int64_t ldb, S* C, int64_t ldc,
             int64_t M, int64_t N, int64_t K, const S* init, bool accumulate) {
  constexpr int64_t MR = 4, NR = 32;
  const int64_t mblk = (M + MR - 1) / MR;
  const int64_t nblk = (N + NR - 1) / NR;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t mb = 0; mb < mblk; ++mb) {
    for (int64_t nb = 0; nb < nblk; ++nb) {
      const int64_t m0 = mb * MR, n0 = nb * NR;
      const int64_t mr = std::min(MR, M - m0), nr = std::min(NR, N - n0);
      S acc[MR][NR];
      for (int64_t m = 0; m < mr; ++m) {
        const S base = accumulate ? S(0) : (init ? init[m0 + m] : S(0));
        for (int64_t j = 0; j < nr; ++j) acc[m][j] = base;
      }
      if (mr == MR && nr == NR) {
        for (int64_t k = 0; k < K; ++k) {
          const S* brow = B + k * ldb + n0;
          for (int64_t m = 0; m < MR; ++m) {
            const S a = A[(m0 + m) * lda + k];
            for (int64_t j = 0; j < NR; ++j) acc[m][j] += a * brow[j];
          }
        }
      } else {
        for (int64_t k = 0; k < K; ++k) {
          const S* brow = B + k * ldb + n0;
          for (int64_t m = 0; m < mr; ++m) {
            const S a = A[(m0 + m) * lda + k];
            for (int64_t j = 0; j < nr; ++j) acc[m][j] += a * brow[j];
          }
        }
      }
      for (int64_t m = 0; m < mr; ++m) {
        S* crow = C + (m0 + m) * ldc + n0;
        if (accumulate)
          for (int64_t j = 0; j < nr; ++j) crow[j] += acc[m][j];
        else
          for (int64_t j = 0; j < nr; ++j) crow[j] = acc[m][j];
      }
    }
  }
}

// C[m, n] += sum_k A[m, k] * B[n, k] (B transposed): blocked row dots.
template <class S>
void gemm_nt_acc(const S* A, int64_t lda, const S* B, int64_t ldb, S* C, int64_t ldc,
                 int64_t M, int64_t N, int64_t K) {
  constexpr int64_t MR = 4;
  const int64_t mblk = (M + MR - 1) / MR;
#pragma omp parallel for schedule(static)
  for (int64_t mb = 0; mb < mblk; ++mb) {
    const int64_t m0 = mb * MR;
    const int64_t mr = std::min(MR, M - m0);
    if (mr == MR) {
      const S* a0 = A + (m0 + 0) * lda;
      const S* a1 = A + (m0 + 1) * lda;
      const S* a2 = A + (m0 + 2) * lda;
      const S* a3 = A + (m0 + 3) * lda;
      for (int64_t n = 0; n < N; ++n) {
        const S* b = B + n * ldb;
        S s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
        for (int64_t k = 0; k < K; ++k) {
          s0 += a0[k] * b[k];
          s1 += a1[k] * b[k];
          s2 += a2[k] * b[k];
          s3 += a3[k] * b[k];
        }
        C[(m0 + 0) * ldc + n] += s0;
        C[(m0 + 1) * ldc + n] += s1;
        C[(m0 + 2) * ldc + n] += s2;
        C[(m0 + 3) * ldc + n] += s3;
      }
    } else {
      for (int64_t m = 0; m < mr; ++m) {
        const S* a = A + (m0 + m) * lda;
        for (int64_t n = 0; n < N; ++n) {
          const S* b = B + n * ldb;
          S s = 0;
#pragma omp simd reduction(+ : s)
          for (int64_t k = 0; k < K; ++k) s += a[k] * b[k];
          C[(m0 + m) * ldc + n] += s;
        }
      }
    }
  }
}

// Unfolds `nzo` output planes starting at zo0 into col[(ci,kd,kh,kw), voxel],
// zero-filling taps that fall outside the input.
template <class S>
void im2col_slab(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W, int64_t k,
                 int64_t pad, int64_t zo0, int64_t nzo, int64_t Ho, int64_t Wo, S* col) {
  const int64_t rowlen = nzo * Ho * Wo;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ci = 0; ci < Cin; ++ci) {
    for (int64_t kd = 0; kd < k; ++kd) {
      for (int64_t kh = 0; kh < k; ++kh) {
        for (int64_t kw = 0; kw < k; ++kw) {
          S* crow = col + (((ci * k + kd) * k + kh) * k + kw) * rowlen;
          const int64_t xlo = std::max<int64_t>(0, pad - kw);
          const int64_t xhi = std::min<int64_t>(Wo, W + pad - kw);
          int64_t idx = 0;
          for (int64_t zo = zo0; zo < zo0 + nzo; ++zo) {
            const int64_t zi = zo + kd - pad;
            if (zi < 0 || zi >= D) {
              std::fill(crow + idx, crow + idx + Ho * Wo, S(0));
              idx += Ho * Wo;
              continue;
            }
            for (int64_t yo = 0; yo < Ho; ++yo, idx += Wo) {
              const int64_t yi = yo + kh - pad;
              if (yi < 0 || yi >= H) {
                std::fill(crow + idx, crow + idx + Wo, S(0));
                continue;
              }
              const S* irow = in + ((ci * D + zi) * H + yi) * W + (kw - pad);
              for (int64_t x = 0; x < xlo; ++x) crow[idx + x] = S(0);
              for (int64_t x = xlo; x < xhi; ++x) crow[idx + x] = irow[x];
              for (int64_t x = xhi; x < Wo; ++x) crow[idx + x] = S(0);
            }
          }
        }
      }
    }
  }
}

inline int64_t slab_planes(int64_t Do, int64_t Ho, int64_t Wo) {
  return std::clamp<int64_t>(4096 / (Ho * Wo), 1, Do);
}

}  // namespace detail

template <class S>
void conv3d_forward_direct(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                           const S* w, int64_t Cout, int64_t k, int64_t pad,
                           const S* bias, S* out, bool accumulate = false) {
  const int64_t Do = D + 2 * pad - k + 1;
  const int64_t Ho = H + 2 * pad - k + 1;
  const int64_t Wo = W + 2 * pad - k + 1;
  constexpr int64_t COB = 4;  // output channels per register block
  const int64_t nblk = (Cout + COB - 1) / COB;

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t cb = 0; cb < nblk; ++cb) {
    for (int64_t zo = 0; zo < Do; ++zo) {
      const int64_t co0 = cb * COB;
      const int64_t nco = std::min(COB, Cout - co0);
      std::vector<S> acc(static_cast<size_t>(nco * Wo));
      for (int64_t yo = 0; yo < Ho; ++yo) {
        for (int64_t c = 0; c < nco; ++c) {
          S* a = acc.data() + c * Wo;
          const S b = bias ? bias[co0 + c] : S(0);
          for (int64_t x = 0; x < Wo; ++x) a[x] = b;
        }
        for (int64_t ci = 0; ci < Cin; ++ci) {
          for (int64_t kd = 0; kd < k; ++kd) {
            const int64_t zi = zo + kd - pad;
            if (zi < 0 || zi >= D) continue;
            for (int64_t kh = 0; kh < k; ++kh) {
              const int64_t yi = yo + kh - pad;
              if (yi < 0 || yi >= H) continue;
              const S* inrow = in + ((ci * D + zi) * H + yi) * W;
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t xlo = std::max<int64_t>(0, pad - kw);
                const int64_t xhi = std::min<int64_t>(Wo, W + pad - kw);
                if (xlo >= xhi) continue;
                const S* src = inrow + (kw - pad);
                for (int64_t c = 0; c < nco; ++c) {
                  const S wv = w[((((co0 + c) * Cin + ci) * k + kd) * k + kh) * k + kw];
                  S* a = acc.data() + c * Wo;
                  for (int64_t x = xlo; x < xhi; ++x) a[x] += wv * src[x];
                }
              }
            }
          }
        }
        for (int64_t c = 0; c < nco; ++c) {
          S* orow = out + (((co0 + c) * Do + zo) * Ho + yo) * Wo;
          const S* a = acc.data() + c * Wo;
          if (accumulate)
            for (int64_t x = 0; x < Wo; ++x) orow[x] += a[x];
          else
            for (int64_t x = 0; x < Wo; ++x) orow[x] = a[x];
        }
      }
    }
  }
}

// Narrow rows starve the direct row kernel, so small volumes go through an
// unfold + matrix-product path instead.
template <class S>
void conv3d_forward_gemm(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                         const S* w, int64_t Cout, int64_t k, int64_t pad,
                         const S* bias, S* out, bool accumulate = false) {
  const int64_t Do = D + 2 * pad - k + 1;
  const int64_t Ho = H + 2 * pad - k + 1;
  const int64_t Wo = W + 2 * pad - k + 1;
  const int64_t CK = Cin * k * k * k;
  const int64_t nzo = detail::slab_planes(Do, Ho, Wo);
  std::vector<S> col(static_cast<size_t>(CK * nzo * Ho * Wo));
  for (int64_t zo0 = 0; zo0 < Do; zo0 += nzo) {
    const int64_t nz = std::min(nzo, Do - zo0);
    detail::im2col_slab(in, Cin, D, H, W, k, pad, zo0, nz, Ho, Wo, col.data());
    detail::gemm_nn(w, CK, col.data(), nz * Ho * Wo, out + zo0 * Ho * Wo, Do * Ho * Wo,
                    Cout, nz * Ho * Wo, CK, bias, accumulate);
  }
}

template <class S>
void conv3d_forward(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                    const S* w, int64_t Cout, int64_t k, int64_t pad,
                    const S* bias, S* out, bool accumulate = false) {
  const int64_t Wo = W + 2 * pad - k + 1;
  if (Wo < 32)
    conv3d_forward_gemm(in, Cin, D, H, W, w, Cout, k, pad, bias, out, accumulate);
  else
    conv3d_forward_direct(in, Cin, D, H, W, w, Cout, k, pad, bias, out, accumulate);
}

/// d(loss)/d(weights) of conv3d_forward, accumulated into gw
/// (shape [Cout, Cin, k, k, k]; caller zeroes or pre-seeds it).
template <class S>
void conv3d_backward_weights(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                             const S* gout, int64_t Cout, int64_t k, int64_t pad, S* gw) {
  const int64_t Do = D + 2 * pad - k + 1;
  const int64_t Ho = H + 2 * pad - k + 1;
  const int64_t Wo = W + 2 * pad - k + 1;
  const int64_t CK = Cin * k * k * k;
  const int64_t nzo = detail::slab_planes(Do, Ho, Wo);
  std::vector<S> col(static_cast<size_t>(CK * nzo * Ho * Wo));
  for (int64_t zo0 = 0; zo0 < Do; zo0 += nzo) {
    const int64_t nz = std::min(nzo, Do - zo0);
    detail::im2col_slab(in, Cin, D, H, W, k, pad, zo0, nz, Ho, Wo, col.data());
    detail::gemm_nt_acc(gout + zo0 * Ho * Wo, Do * Ho * Wo, col.data(), nz * Ho * Wo,
                        gw, CK, Cout, CK, nz * Ho * Wo);
  }
}

/// d(loss)/d(input) of conv3d_forward. Realized as a stride-1 convolution of
/// gout with the channel-swapped, spatially flipped weights and complementary
/// padding k-1-pad; the caller passes that weight buffer in `w_flipped`
/// ([Cin, Cout, k, k, k]).
template <class S>
void conv3d_backward_data(const S* gout, int64_t Cout, int64_t Do, int64_t Ho, int64_t Wo,
                          const S* w_flipped, int64_t Cin, int64_t k, int64_t pad, S* gin,
                          bool accumulate) {
  conv3d_forward<S>(gout, Cout, Do, Ho, Wo, w_flipped, Cin, k, k - 1 - pad, nullptr, gin, accumulate);
}

/// Build the [Cin, Cout, k, k, k] flipped view used by conv3d_backward_data.
template <class S>
std::vector<S> flip_weights(const S* w, int64_t Cout, int64_t Cin, int64_t k) {
  std::vector<S> wf(static_cast<size_t>(Cout * Cin * k * k * k));
  for (int64_t co = 0; co < Cout; ++co)
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t a = 0; a < k; ++a)
        for (int64_t b = 0; b < k; ++b)
          for (int64_t c = 0; c < k; ++c)
            wf[(((ci * Cout + co) * k + (k - 1 - a)) * k + (k - 1 - b)) * k + (k - 1 - c)] =
                w[(((co * Cin + ci) * k + a) * k + b) * k + c];
  return wf;
}

// 2x2x2 transposed convolution with stride 2: every input voxel scatters into
// a disjoint 2x2x2 output block, so output extents are exactly doubled.
// Weights are [Cin, Cout, 2, 2, 2].
template <class S>
void convt2_forward(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                    const S* w, int64_t Cout, S* out) {
  const int64_t Ho = 2 * H, Wo = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t co = 0; co < Cout; ++co) {
    for (int64_t z = 0; z < D; ++z) {
      for (int64_t a = 0; a < 2; ++a) {
        for (int64_t y = 0; y < H; ++y) {
          for (int64_t b = 0; b < 2; ++b) {
            S* orow = out + ((co * 2 * D + 2 * z + a) * Ho + 2 * y + b) * Wo;
            for (int64_t x = 0; x < Wo; ++x) orow[x] = S(0);
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const S* irow = in + ((ci * D + z) * H + y) * W;
              const S w0 = w[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 0];
              const S w1 = w[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 1];
              for (int64_t x = 0; x < W; ++x) {
                orow[2 * x] += w0 * irow[x];
                orow[2 * x + 1] += w1 * irow[x];
              }
            }
          }
        }
      }
    }
  }
}

/// Stride-2 2x2x2 convolution (the adjoint of convt2_forward): maps
/// [Cout, 2D, 2H, 2W] down to [Cin, D, H, W] through the same weights.
/// Also serves as d(loss)/d(input) of convt2_forward.
template <class S>
void conv3d_stride2_k2(const S* x, int64_t Cout, int64_t D2, int64_t H2, int64_t W2,
                       const S* w, int64_t Cin, S* out, bool accumulate = false) {
  const int64_t D = D2 / 2, H = H2 / 2, W = W2 / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ci = 0; ci < Cin; ++ci) {
    for (int64_t z = 0; z < D; ++z) {
      for (int64_t y = 0; y < H; ++y) {
        S* orow = out + ((ci * D + z) * H + y) * W;
        if (!accumulate)
          for (int64_t x = 0; x < W; ++x) orow[x] = S(0);
        for (int64_t co = 0; co < Cout; ++co) {
          for (int64_t a = 0; a < 2; ++a) {
            for (int64_t b = 0; b < 2; ++b) {
              const S* xrow = x + ((co * D2 + 2 * z + a) * H2 + 2 * y + b) * W2;
              const S w0 = w[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 0];
              const S w1 = w[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 1];
              for (int64_t x2 = 0; x2 < W; ++x2)
                orow[x2] += w0 * xrow[2 * x2] + w1 * xrow[2 * x2 + 1];
            }
          }
        }
      }
    }
  }
}

/// d(loss)/d(weights) of convt2_forward, accumulated into gw [Cin, Cout, 2, 2, 2].
template <class S>
void convt2_backward_weights(const S* in, int64_t Cin, int64_t D, int64_t H, int64_t W,
                             const S* gout, int64_t Cout, S* gw) {
  const int64_t H2 = 2 * H, W2 = 2 * W;
#pragma omp parallel for schedule(static)
  for (int64_t ci = 0; ci < Cin; ++ci) {
    for (int64_t co = 0; co < Cout; ++co) {
      for (int64_t a = 0; a < 2; ++a) {
        for (int64_t b = 0; b < 2; ++b) {
          S s0 = 0, s1 = 0;
          for (int64_t z = 0; z < D; ++z) {
            for (int64_t y = 0; y < H; ++y) {
              const S* irow = in + ((ci * D + z) * H + y) * W;
              const S* grow = gout + ((co * 2 * D + 2 * z + a) * H2 + 2 * y + b) * W2;
              S t0 = 0, t1 = 0;
#pragma omp simd reduction(+ : t0, t1)
              for (int64_t x = 0; x < W; ++x) {
                t0 += irow[x] * grow[2 * x];
                t1 += irow[x] * grow[2 * x + 1];
              }
              s0 += t0;
              s1 += t1;
            }
          }
          gw[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 0] += s0;
          gw[(((ci * Cout + co) * 2 + a) * 2 + b) * 2 + 1] += s1;
        }
      }
    }
  }
}

}  // namespace petseg::kernels
