#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ppkit/tape.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

struct SsimParams {
  std::int64_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  // Scale weights for MS-SSIM; the first `scales` entries are renormalized to
  // sum to one when the image only supports fewer scales.
  std::vector<double> scale_weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
};

struct LossWeights {
  double alpha = 0.025;  // l1 term
  double beta = 5e-3;    // adversarial term
};

inline constexpr double kLogClampEps = 1e-12;

namespace detail {

template <typename T>
Tensor4<T> gaussian_window(std::int64_t size, double sigma) {
  if (size < 1 || size % 2 == 0)
    throw ValidationError("ssim: window size must be odd and positive");
  Tensor4<T> w({1, 1, size, size});
  const double c = static_cast<double>(size - 1) / 2.0;
  double sum = 0;
  for (std::int64_t i = 0; i < size; ++i)
    for (std::int64_t j = 0; j < size; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      w.at(0, 0, i, j) = static_cast<T>(v);
      sum += v;
    }
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(w[i] / sum);
  return w;
}

// Per-channel luminance and contrast/structure terms for one scale, averaged
// over batch, window positions and channels. Inputs are in the [0,1] domain.
template <typename T>
struct SsimTerms {
  typename Tape<T>::Ref luminance_cs;  // mean of l*cs map (full SSIM)
  typename Tape<T>::Ref cs;            // mean of cs map only
};

template <typename T>
SsimTerms<T> ssim_scale_terms(Tape<T>& tape, typename Tape<T>::Ref a,
                              typename Tape<T>::Ref b, const SsimParams& p) {
  using Ref = typename Tape<T>::Ref;
  // Copy the dims: pushing nodes below may reallocate the tape's node storage,
  // which would invalidate references returned by value().
  const Dims4 da = tape.value(a).dims();
  const Dims4 db = tape.value(b).dims();
  if (da != db)
    throw ValidationError("ssim: dims mismatch " + da.to_string() + " vs " + db.to_string());
  if (da.h < p.window || da.w < p.window)
    throw ValidationError("ssim: image " + da.to_string() + " smaller than window " +
                          std::to_string(p.window));
  const T c1 = static_cast<T>((p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range));
  const T c2 = static_cast<T>((p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range));
  const Ref win = tape.constant(gaussian_window<T>(p.window, p.sigma));
  const Ref zero_bias = tape.constant(Tensor4<T>({1, 1, 1, 1}));

  Ref sum_lcs = tape.scalar(T(0));
  Ref sum_cs = tape.scalar(T(0));
  for (std::int64_t ch = 0; ch < da.c; ++ch) {
    const Ref ac = tape.slice_channel(a, ch);
    const Ref bc = tape.slice_channel(b, ch);
    const Ref mu_a = tape.conv2d(ac, win, zero_bias, 1, Padding::kValid);
    const Ref mu_b = tape.conv2d(bc, win, zero_bias, 1, Padding::kValid);
    const Ref e_aa = tape.conv2d(tape.mul(ac, ac), win, zero_bias, 1, Padding::kValid);
    const Ref e_bb = tape.conv2d(tape.mul(bc, bc), win, zero_bias, 1, Padding::kValid);
    const Ref e_ab = tape.conv2d(tape.mul(ac, bc), win, zero_bias, 1, Padding::kValid);
    const Ref mu_ab = tape.mul(mu_a, mu_b);
    const Ref var_a = tape.sub(e_aa, tape.mul(mu_a, mu_a));
    const Ref var_b = tape.sub(e_bb, tape.mul(mu_b, mu_b));
    const Ref cov = tape.sub(e_ab, mu_ab);
    // cs = (2 cov + C2) / (var_a + var_b + C2)
    const Ref cs_map = tape.div(tape.affine(cov, T(2), c2),
                                tape.affine(tape.add(var_a, var_b), T(1), c2));
    // l = (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1)
    const Ref l_map = tape.div(
        tape.affine(mu_ab, T(2), c1),
        tape.affine(tape.add(tape.mul(mu_a, mu_a), tape.mul(mu_b, mu_b)), T(1), c1));
    sum_lcs = tape.add(sum_lcs, tape.mean_all(tape.mul(l_map, cs_map)));
    sum_cs = tape.add(sum_cs, tape.mean_all(cs_map));
  }
  const T inv_c = T(1) / static_cast<T>(da.c);
  return {tape.affine(sum_lcs, inv_c, T(0)), tape.affine(sum_cs, inv_c, T(0))};
}

// [-1,1] network domain -> [0,1] pixel domain.
template <typename T>
typename Tape<T>::Ref to_unit_domain(Tape<T>& tape, typename Tape<T>::Ref x) {
  return tape.affine(x, T(0.5), T(0.5));
}

}  // namespace detail

// ---- tape builders; image inputs are in the network's [-1,1] domain ----

template <typename T>
typename Tape<T>::Ref l1_loss_tape(Tape<T>& tape, typename Tape<T>::Ref output,
                                   typename Tape<T>::Ref target) {
  if (tape.value(output).dims() != tape.value(target).dims())
    throw ValidationError("l1_loss: dims mismatch " + tape.value(output).dims().to_string() +
                          " vs " + tape.value(target).dims().to_string());
  return tape.mean_all(tape.abs(tape.sub(output, target)));
}

template <typename T>
typename Tape<T>::Ref ssim_tape(Tape<T>& tape, typename Tape<T>::Ref a,
                                typename Tape<T>::Ref b, const SsimParams& p = {}) {
  const auto terms = detail::ssim_scale_terms(tape, detail::to_unit_domain(tape, a),
                                              detail::to_unit_domain(tape, b), p);
  return terms.luminance_cs;
}

inline std::int64_t ms_ssim_scales(std::int64_t h, std::int64_t w, const SsimParams& p) {
  const std::int64_t m = std::min(h, w);
  if (m < p.window) throw ValidationError("ms_ssim: image smaller than window");
  std::int64_t scales = 1;
  while (scales < static_cast<std::int64_t>(p.scale_weights.size()) &&
         (m >> scales) >= p.window)
    ++scales;
  return scales;
}

// Product over scales of mean contrast/structure terms (luminance only at the
// coarsest scale), composed as exp(sum w_s ln term_s) with renormalized
// weights when fewer than five scales fit.
template <typename T>
typename Tape<T>::Ref ms_ssim_tape(Tape<T>& tape, typename Tape<T>::Ref a,
                                   typename Tape<T>::Ref b, const SsimParams& p = {}) {
  using Ref = typename Tape<T>::Ref;
  const Dims4 d = tape.value(a).dims();
  const std::int64_t scales = ms_ssim_scales(d.h, d.w, p);
  double wsum = 0;
  for (std::int64_t s = 0; s < scales; ++s) wsum += p.scale_weights[s];
  if (wsum <= 0) throw ValidationError("ms_ssim: scale weights must sum positive");

  Ref ua = detail::to_unit_domain(tape, a);
  Ref ub = detail::to_unit_domain(tape, b);
  Ref acc = tape.scalar(T(0));
  for (std::int64_t s = 0; s < scales; ++s) {
    const auto terms = detail::ssim_scale_terms(tape, ua, ub, p);
    const Ref term = (s == scales - 1) ? terms.luminance_cs : terms.cs;
    const T w = static_cast<T>(p.scale_weights[s] / wsum);
    acc = tape.add(acc, tape.affine(tape.log_clamped(term, static_cast<T>(kLogClampEps)),
                                    w, T(0)));
    if (s + 1 < scales) {
      ua = tape.avg_pool2(ua);
      ub = tape.avg_pool2(ub);
    }
  }
  return tape.exp(acc);
}

template <typename T>
typename Tape<T>::Ref ragan_generator_loss_tape(Tape<T>& tape,
                                                typename Tape<T>::Ref scores_real,
                                                typename Tape<T>::Ref scores_fake) {
  using Ref = typename Tape<T>::Ref;
  if (tape.value(scores_real).size() == 0 || tape.value(scores_fake).size() == 0)
    throw ValidationError("ragan loss: empty score batch");
  const T eps = static_cast<T>(kLogClampEps);
  const Ref mean_f = tape.mean_all(scores_fake);
  const Ref mean_r = tape.mean_all(scores_real);
  // -E_r[ln(1 - sig(s_r - E_f))]
  const Ref p_r = tape.sigmoid(tape.sub_scalar_node(scores_real, mean_f));
  const Ref t1 = tape.mean_all(tape.log_clamped(tape.affine(p_r, T(-1), T(1)), eps));
  // -E_f[ln(sig(s_f - E_r))]
  const Ref p_f = tape.sigmoid(tape.sub_scalar_node(scores_fake, mean_r));
  const Ref t2 = tape.mean_all(tape.log_clamped(p_f, eps));
  return tape.affine(tape.add(t1, t2), T(-1), T(0));
}

template <typename T>
typename Tape<T>::Ref ragan_discriminator_loss_tape(Tape<T>& tape,
                                                    typename Tape<T>::Ref scores_real,
                                                    typename Tape<T>::Ref scores_fake) {
  // Eq-for-eq the discriminator loss is the generator loss with roles swapped.
  return ragan_generator_loss_tape(tape, scores_fake, scores_real);
}

// Term handles so callers can log unweighted constituents alongside the total.
template <typename T>
struct CombinedLossParts {
  typename Tape<T>::Ref ssim_loss;  // 1 - ssim
  typename Tape<T>::Ref l1;
  typename Tape<T>::Ref adv;
  typename Tape<T>::Ref total;  // ssim_loss + alpha*l1 + beta*adv
};

template <typename T>
CombinedLossParts<T> combined_generator_loss_parts(Tape<T>& tape, typename Tape<T>::Ref output,
                                                   typename Tape<T>::Ref target,
                                                   typename Tape<T>::Ref scores_real,
                                                   typename Tape<T>::Ref scores_fake,
                                                   const LossWeights& w,
                                                   const SsimParams& sp = {}) {
  if (w.alpha < 0 || w.beta < 0)
    throw ValidationError("loss weights must be non-negative");
  CombinedLossParts<T> parts;
  parts.ssim_loss = tape.affine(ssim_tape(tape, output, target, sp), T(-1), T(1));
  parts.l1 = l1_loss_tape(tape, output, target);
  parts.adv = ragan_generator_loss_tape(tape, scores_real, scores_fake);
  parts.total =
      tape.add(tape.add(parts.ssim_loss, tape.affine(parts.l1, static_cast<T>(w.alpha), T(0))),
               tape.affine(parts.adv, static_cast<T>(w.beta), T(0)));
  return parts;
}

template <typename T>
typename Tape<T>::Ref combined_generator_loss_tape(Tape<T>& tape, typename Tape<T>::Ref output,
                                                   typename Tape<T>::Ref target,
                                                   typename Tape<T>::Ref scores_real,
                                                   typename Tape<T>::Ref scores_fake,
                                                   const LossWeights& w,
                                                   const SsimParams& sp = {}) {
  return combined_generator_loss_parts(tape, output, target, scores_real, scores_fake, w, sp)
      .total;
}

// ---- plain scalar wrappers (throwaway tape) ----

template <typename T>
T l1_loss(const Tensor4<T>& output, const Tensor4<T>& target) {
  Tape<T> tape;
  return tape.value(l1_loss_tape(tape, tape.constant(output), tape.constant(target))).item();
}

template <typename T>
T ssim(const Tensor4<T>& a, const Tensor4<T>& b, const SsimParams& p = {}) {
  Tape<T> tape;
  return tape.value(ssim_tape(tape, tape.constant(a), tape.constant(b), p)).item();
}

template <typename T>
T ssim_loss(const Tensor4<T>& a, const Tensor4<T>& b, const SsimParams& p = {}) {
  return T(1) - ssim(a, b, p);
}

template <typename T>
T ms_ssim(const Tensor4<T>& a, const Tensor4<T>& b, const SsimParams& p = {}) {
  Tape<T> tape;
  return tape.value(ms_ssim_tape(tape, tape.constant(a), tape.constant(b), p)).item();
}

template <typename T>
T ragan_generator_loss(const Tensor4<T>& scores_real, const Tensor4<T>& scores_fake) {
  Tape<T> tape;
  return tape
      .value(ragan_generator_loss_tape(tape, tape.constant(scores_real),
                                       tape.constant(scores_fake)))
      .item();
}

template <typename T>
T ragan_discriminator_loss(const Tensor4<T>& scores_real, const Tensor4<T>& scores_fake) {
  Tape<T> tape;
  return tape
      .value(ragan_discriminator_loss_tape(tape, tape.constant(scores_real),
                                           tape.constant(scores_fake)))
      .item();
}

template <typename T>
T combined_generator_loss(const Tensor4<T>& output, const Tensor4<T>& target,
                          const Tensor4<T>& scores_real, const Tensor4<T>& scores_fake,
                          const LossWeights& w, const SsimParams& sp = {}) {
  Tape<T> tape;
  return tape
      .value(combined_generator_loss_tape(tape, tape.constant(output), tape.constant(target),
                                          tape.constant(scores_real),
                                          tape.constant(scores_fake), w, sp))
      .item();
}

}  // namespace ppkit
