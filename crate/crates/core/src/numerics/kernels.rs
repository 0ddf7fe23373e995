//! Slice-level kernels for the 1D convolution family.
//!
//! Layouts are channels-first: activations are `[batch, channels, time]`,
//! conv kernels are `[c_out, c_in, k]` and transposed-conv kernels are
//! `[c_in, c_out, k]`. Every loop nest keeps the time axis innermost.

/// Geometry of a strided, zero-padded 1D correlation between a long
/// signal of `long` samples and a short one of `short` samples.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub batch: usize,
    /// Channels on the short-signal side (conv output / tconv input).
    pub c_short: usize,
    /// Channels on the long-signal side (conv input / tconv output).
    pub c_long: usize,
    pub long: usize,
    pub short: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Range of short-side positions `t` for which tap `k` lands inside the
    /// long signal, i.e. `0 <= t*stride + k - pad < long`.
    #[inline]
    fn taps(&self, k: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if k >= self.pad {
            0
        } else {
            (self.pad - k).div_ceil(s)
        };
        let top = self.long + self.pad;
        let hi = if top > k {
            ((top - k - 1) / s + 1).min(self.short)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

/// `short[b,o,t] += sum_{c,k} w[o,c,k] * long[b,c,t*s+k-p]`
///
/// `w` is indexed `[c_short, c_long, k]` when `w_short_major`, otherwise
/// `[c_long, c_short, k]`.
pub fn correlate(g: &ConvGeom, long: &[f64], w: &[f64], w_short_major: bool, short: &mut [f64]) {
    let (cs, cl, k_len) = (g.c_short, g.c_long, g.k);
    for b in 0..g.batch {
        let lb = &long[b * cl * g.long..(b + 1) * cl * g.long];
        let sb = &mut short[b * cs * g.short..(b + 1) * cs * g.short];
        for o in 0..cs {
            let row = &mut sb[o * g.short..(o + 1) * g.short];
            for c in 0..cl {
                let lc = &lb[c * g.long..(c + 1) * g.long];
                for k in 0..k_len {
                    let wv = if w_short_major {
                        w[(o * cl + c) * k_len + k]
                    } else {
                        w[(c * cs + o) * k_len + k]
                    };
                    if wv == 0.0 {
                        continue;
                    }
                    let (lo, hi) = g.taps(k);
                    if g.stride == 1 {
                        let off = lo + k - g.pad;
                        for (r, l) in row[lo..hi].iter_mut().zip(&lc[off..off + (hi - lo)]) {
                            *r += wv * l;
                        }
                    } else {
                        for t in lo..hi {
                            row[t] += wv * lc[t * g.stride + k - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`correlate`] with respect to the long signal:
/// `long[b,c,t*s+k-p] += sum_o w[o,c,k] * short[b,o,t]`.
pub fn scatter(g: &ConvGeom, short: &[f64], w: &[f64], w_short_major: bool, long: &mut [f64]) {
    let (cs, cl, k_len) = (g.c_short, g.c_long, g.k);
    for b in 0..g.batch {
        let sb = &short[b * cs * g.short..(b + 1) * cs * g.short];
        let lb = &mut long[b * cl * g.long..(b + 1) * cl * g.long];
        for o in 0..cs {
            let row = &sb[o * g.short..(o + 1) * g.short];
            for c in 0..cl {
                let lc = &mut lb[c * g.long..(c + 1) * g.long];
                for k in 0..k_len {
                    let wv = if w_short_major {
                        w[(o * cl + c) * k_len + k]
                    } else {
                        w[(c * cs + o) * k_len + k]
                    };
                    if wv == 0.0 {
                        continue;
                    }
                    let (lo, hi) = g.taps(k);
                    if g.stride == 1 {
                        let off = lo + k - g.pad;
                        for (l, r) in lc[off..off + (hi - lo)].iter_mut().zip(&row[lo..hi]) {
                            *l += wv * r;
                        }
                    } else {
                        for t in lo..hi {
                            lc[t * g.stride + k - g.pad] += wv * row[t];
                        }
                    }
                }
            }
        }
    }
}

/// Kernel gradient shared by both directions:
/// `gw[o,c,k] += sum_{b,t} short[b,o,t] * long[b,c,t*s+k-p]`.
pub fn kernel_grad(g: &ConvGeom, long: &[f64], short: &[f64], w_short_major: bool, gw: &mut [f64]) {
    let (cs, cl, k_len) = (g.c_short, g.c_long, g.k);
    for b in 0..g.batch {
        let lb = &long[b * cl * g.long..(b + 1) * cl * g.long];
        let sb = &short[b * cs * g.short..(b + 1) * cs * g.short];
        for o in 0..cs {
            let row = &sb[o * g.short..(o + 1) * g.short];
            for c in 0..cl {
                let lc = &lb[c * g.long..(c + 1) * g.long];
                for k in 0..k_len {
                    let (lo, hi) = g.taps(k);
                    let acc: f64 = if g.stride == 1 {
                        let off = lo + k - g.pad;
                        row[lo..hi]
                            .iter()
                            .zip(&lc[off..off + (hi - lo)])
                            .map(|(r, l)| r * l)
                            .sum()
                    } else {
                        (lo..hi)
                            .map(|t| row[t] * lc[t * g.stride + k - g.pad])
                            .sum()
                    };
                    let idx = if w_short_major {
                        (o * cl + c) * k_len + k
                    } else {
                        (c * cs + o) * k_len + k
                    };
                    gw[idx] += acc;
                }
            }
        }
    }
}

/// Adds `bias[o]` across every position of channel `o`.
pub fn add_channel_bias(out: &mut [f64], bias: &[f64], batch: usize, channels: usize, len: usize) {
    for b in 0..batch {
        for (o, &bv) in bias.iter().enumerate().take(channels) {
            let start = (b * channels + o) * len;
            for v in &mut out[start..start + len] {
                *v += bv;
            }
        }
    }
}

/// Sums `g` over batch and time into a per-channel gradient.
pub fn channel_bias_grad(g: &[f64], batch: usize, channels: usize, len: usize, gb: &mut [f64]) {
    for b in 0..batch {
        for (o, acc) in gb.iter_mut().enumerate().take(channels) {
            let start = (b * channels + o) * len;
            *acc += g[start..start + len].iter().sum::<f64>();
        }
    }
}

/// Dense layer forward: `y[b,m] = sum_n w[m,n] x[b,n] + bias[m]`.
pub fn matvec_batch(x: &[f64], w: &[f64], bias: &[f64], batch: usize, n: usize, m: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * m];
    for b in 0..batch {
        let xb = &x[b * n..(b + 1) * n];
        for (j, out) in y[b * m..(b + 1) * m].iter_mut().enumerate() {
            let wr = &w[j * n..(j + 1) * n];
            *out = bias[j] + wr.iter().zip(xb).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    y
}
