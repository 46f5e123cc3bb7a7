//! Forward and backward kernels on flat `f64` buffers.
//!
//! Feature maps are `channels × height × width`, row-major. Sequences are
//! `steps × dim`, row-major.

/// Geometry of one convolution with "same"-style padding `kernel / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        self.kernel / 2
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad() - self.kernel) / self.stride_h + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad() - self.kernel) / self.stride_w + 1
    }

    /// Output columns `ox` whose input column `ox·sw + kx - pad` is inside
    /// the image.
    #[inline]
    fn valid_cols(&self, kx: usize) -> (usize, usize) {
        let (p, sw, ow) = (self.pad() as isize, self.stride_w as isize, self.out_w() as isize);
        let off = kx as isize - p;
        let lo = if off >= 0 { 0 } else { (-off + sw - 1) / sw };
        // ox·sw + off <= in_w - 1
        let hi = ((self.in_w as isize - 1 - off).div_euclid(sw) + 1).clamp(0, ow);
        (lo.min(hi) as usize, hi as usize)
    }
}

/// Dot product with eight independent partial sums so the adds pipeline.
#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha · x`.
#[inline(always)]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, &i) in y.iter_mut().zip(x) {
        *o += alpha * i;
    }
}

/// Unfolds the input into an `(in · k · k) × (out_h · out_w)` matrix whose
/// row `(ic, ky, kx)` holds the input pixel each output position sees
/// through that tap, zero where the tap falls in the padding.
#[inline(always)]
fn im2col(s: &ConvShape, input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let (k, p) = (s.kernel, s.pad() as isize);
    let n = oh * ow;
    let mut col = vec![0.0; s.in_channels * k * k * n];
    for ic in 0..s.in_channels {
        let src = &input[ic * s.in_h * s.in_w..(ic + 1) * s.in_h * s.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let r = (ic * k + ky) * k + kx;
                let dst = &mut col[r * n..(r + 1) * n];
                let (x_lo, x_hi) = s.valid_cols(kx);
                let base = kx as isize - p;
                for oy in 0..oh {
                    let iy = (oy * s.stride_h) as isize + ky as isize - p;
                    if iy < 0 || iy >= s.in_h as isize {
                        continue;
                    }
                    let row = &src[iy as usize * s.in_w..(iy as usize + 1) * s.in_w];
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if s.stride_w == 1 {
                        let start = (x_lo as isize + base) as usize;
                        drow[x_lo..x_hi].copy_from_slice(&row[start..start + x_hi - x_lo]);
                    } else {
                        for ox in x_lo..x_hi {
                            drow[ox] = row[((ox * s.stride_w) as isize + base) as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
#[inline(always)]
fn col2im(s: &ConvShape, col: &[f64]) -> Vec<f64> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let (k, p) = (s.kernel, s.pad() as isize);
    let n = oh * ow;
    let mut din = vec![0.0; s.in_channels * s.in_h * s.in_w];
    for ic in 0..s.in_channels {
        let dst = &mut din[ic * s.in_h * s.in_w..(ic + 1) * s.in_h * s.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let r = (ic * k + ky) * k + kx;
                let src = &col[r * n..(r + 1) * n];
                let (x_lo, x_hi) = s.valid_cols(kx);
                let base = kx as isize - p;
                for oy in 0..oh {
                    let iy = (oy * s.stride_h) as isize + ky as isize - p;
                    if iy < 0 || iy >= s.in_h as isize {
                        continue;
                    }
                    let row = &mut dst[iy as usize * s.in_w..(iy as usize + 1) * s.in_w];
                    let srow = &src[oy * ow..(oy + 1) * ow];
                    if s.stride_w == 1 {
                        let start = (x_lo as isize + base) as usize;
                        for (d, &g) in row[start..start + x_hi - x_lo].iter_mut().zip(&srow[x_lo..x_hi]) {
                            *d += g;
                        }
                    } else {
                        for ox in x_lo..x_hi {
                            row[((ox * s.stride_w) as isize + base) as usize] += srow[ox];
                        }
                    }
                }
            }
        }
    }
    din
}

#[inline(always)]
fn conv_forward_impl(s: &ConvShape, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = s.out_h() * s.out_w();
    let taps = s.in_channels * s.kernel * s.kernel;
    let col = im2col(s, input);
    let mut out = vec![0.0; s.out_channels * n];
    for (oc, plane) in out.chunks_exact_mut(n).enumerate() {
        plane.iter_mut().for_each(|v| *v = bias[oc]);
        let w = &weight[oc * taps..(oc + 1) * taps];
        for (r, &wv) in w.iter().enumerate() {
            axpy(wv, &col[r * n..(r + 1) * n], plane);
        }
    }
    out
}

#[inline(always)]
fn conv_backward_impl(
    s: &ConvShape,
    input: &[f64],
    weight: &[f64],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    need_input: bool,
) -> Option<Vec<f64>> {
    let n = s.out_h() * s.out_w();
    let taps = s.in_channels * s.kernel * s.kernel;
    let col = im2col(s, input);
    let mut dcol = if need_input { vec![0.0; taps * n] } else { Vec::new() };
    for (oc, plane) in dout.chunks_exact(n).enumerate() {
        dbias[oc] += plane.iter().sum::<f64>();
    }
    // Tap-major so one column row stays cached across output channels.
    for r in 0..taps {
        let crow = &col[r * n..(r + 1) * n];
        for (oc, plane) in dout.chunks_exact(n).enumerate() {
            dweight[oc * taps + r] += dot(plane, crow);
        }
        if need_input {
            let drow = &mut dcol[r * n..(r + 1) * n];
            for (oc, plane) in dout.chunks_exact(n).enumerate() {
                axpy(weight[oc * taps + r], plane, drow);
            }
        }
    }
    need_input.then(|| col2im(s, &dcol))
}

#[inline]
pub fn hard_swish(z: f64) -> f64 {
    z * (z + 3.0).clamp(0.0, 6.0) / 6.0
}

#[inline]
pub fn hard_swish_grad(z: f64) -> f64 {
    if z <= -3.0 {
        0.0
    } else if z >= 3.0 {
        1.0
    } else {
        (2.0 * z + 3.0) / 6.0
    }
}

#[inline(always)]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline(always)]
fn linear_seq_impl(xs: &[f64], steps: usize, cols: usize, w: &[f64], b: &[f64], rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; steps * rows];
    for t in 0..steps {
        let x = &xs[t * cols..(t + 1) * cols];
        let o = &mut out[t * rows..(t + 1) * rows];
        for r in 0..rows {
            let wr = &w[r * cols..(r + 1) * cols];
            o[r] = b[r] + dot(wr, x);
        }
    }
    out
}

#[inline(always)]
fn linear_seq_backward_impl(
    xs: &[f64],
    steps: usize,
    cols: usize,
    w: &[f64],
    rows: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; steps * cols];
    for t in 0..steps {
        let x = &xs[t * cols..(t + 1) * cols];
        let d = &dout[t * rows..(t + 1) * rows];
        let dxt = &mut dx[t * cols..(t + 1) * cols];
        for r in 0..rows {
            let g = d[r];
            if g == 0.0 {
                continue;
            }
            db[r] += g;
            let wr = &w[r * cols..(r + 1) * cols];
            let dwr = &mut dw[r * cols..(r + 1) * cols];
            for c in 0..cols {
                dwr[c] += g * x[c];
                dxt[c] += g * wr[c];
            }
        }
    }
    dx
}

/// Activations kept from one LSTM direction, indexed by time step.
#[derive(Clone, Debug, Default)]
pub struct LstmCache {
    /// Post-activation gates `[i, f, g, o]`, `steps × 4h`.
    pub gates: Vec<f64>,
    /// Cell states, `steps × h`.
    pub cells: Vec<f64>,
    /// Hidden states, `steps × h`.
    pub hidden: Vec<f64>,
}

#[inline(always)]
fn lstm_forward_impl(
    xs: &[f64],
    steps: usize,
    dim: usize,
    hidden: usize,
    wx: &[f64],
    wh: &[f64],
    b: &[f64],
    reverse: bool,
) -> LstmCache {
    let g4 = 4 * hidden;
    let pre_x = linear_seq_impl(xs, steps, dim, wx, b, g4);
    let mut cache = LstmCache {
        gates: vec![0.0; steps * g4],
        cells: vec![0.0; steps * hidden],
        hidden: vec![0.0; steps * hidden],
    };
    let zeros = vec![0.0; hidden];
    let mut prev_t: Option<usize> = None;
    for i in 0..steps {
        let t = if reverse { steps - 1 - i } else { i };
        let (h_prev, c_prev): (Vec<f64>, Vec<f64>) = match prev_t {
            Some(p) => (
                cache.hidden[p * hidden..(p + 1) * hidden].to_vec(),
                cache.cells[p * hidden..(p + 1) * hidden].to_vec(),
            ),
            None => (zeros.clone(), zeros.clone()),
        };
        let gates = &mut cache.gates[t * g4..(t + 1) * g4];
        gates.copy_from_slice(&pre_x[t * g4..(t + 1) * g4]);
        for r in 0..g4 {
            let wr = &wh[r * hidden..(r + 1) * hidden];
            gates[r] += dot(wr, &h_prev);
        }
        for j in 0..hidden {
            gates[j] = sigmoid(gates[j]);
            gates[hidden + j] = sigmoid(gates[hidden + j]);
            gates[2 * hidden + j] = gates[2 * hidden + j].tanh();
            gates[3 * hidden + j] = sigmoid(gates[3 * hidden + j]);
        }
        for j in 0..hidden {
            let c = gates[hidden + j] * c_prev[j] + gates[j] * gates[2 * hidden + j];
            cache.cells[t * hidden + j] = c;
            cache.hidden[t * hidden + j] = gates[3 * hidden + j] * c.tanh();
        }
        prev_t = Some(t);
    }
    cache
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn lstm_backward_impl(
    xs: &[f64],
    steps: usize,
    dim: usize,
    hidden: usize,
    wx: &[f64],
    wh: &[f64],
    cache: &LstmCache,
    dh_out: &[f64],
    reverse: bool,
    dwx: &mut [f64],
    dwh: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let g4 = 4 * hidden;
    let mut dpre = vec![0.0; steps * g4];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for i in (0..steps).rev() {
        let t = if reverse { steps - 1 - i } else { i };
        let prev = if i == 0 {
            None
        } else if reverse {
            Some(t + 1)
        } else {
            Some(t - 1)
        };
        let gates = &cache.gates[t * g4..(t + 1) * g4];
        let da = &mut dpre[t * g4..(t + 1) * g4];
        for j in 0..hidden {
            let (ig, fg, gg, og) = (gates[j], gates[hidden + j], gates[2 * hidden + j], gates[3 * hidden + j]);
            let c = cache.cells[t * hidden + j];
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * hidden + j]);
            let tc = c.tanh();
            let dh = dh_out[t * hidden + j] + dh_next[j];
            let dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * gg * ig * (1.0 - ig);
            da[hidden + j] = dc * c_prev * fg * (1.0 - fg);
            da[2 * hidden + j] = dc * ig * (1.0 - gg * gg);
            da[3 * hidden + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
        }
        // Recurrent weights and the gradient flowing to the previous step.
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if let Some(p) = prev {
            let h_prev = &cache.hidden[p * hidden..(p + 1) * hidden];
            for r in 0..g4 {
                let g = da[r];
                let wr = &wh[r * hidden..(r + 1) * hidden];
                let dwr = &mut dwh[r * hidden..(r + 1) * hidden];
                for c in 0..hidden {
                    dwr[c] += g * h_prev[c];
                    dh_next[c] += g * wr[c];
                }
            }
        }
    }
    linear_seq_backward_impl(xs, steps, dim, wx, g4, &dpre, dwx, db)
}

/// Defines `$name` as a call to `$imp`, compiled a second time with AVX and
/// picked at runtime when the CPU has it. Vectorizing across independent
/// lanes does not reorder any sum, so both builds agree bit for bit.
macro_rules! avx_dispatch {
    ($(#[$m:meta])* pub fn $name:ident / $avx:ident ($($arg:ident: $ty:ty),* $(,)?) -> $ret:ty = $imp:ident;) => {
        $(#[$m])*
        pub fn $name($($arg: $ty),*) -> $ret {
            #[cfg(target_arch = "x86_64")]
            {
                if std::is_x86_feature_detected!("avx") {
                    #[target_feature(enable = "avx")]
                    unsafe fn $avx($($arg: $ty),*) -> $ret {
                        $imp($($arg),*)
                    }
                    // SAFETY: the feature was detected above.
                    return unsafe { $avx($($arg),*) };
                }
            }
            $imp($($arg),*)
        }
    };
}

avx_dispatch! {
    /// `out = conv(input, weight) + bias`; weight is `out × in × k × k`.
    pub fn conv_forward / conv_forward_avx(s: &ConvShape, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> = conv_forward_impl;
}

avx_dispatch! {
    /// Accumulates weight and bias gradients; returns the input gradient
    /// when `need_input` is set.
    pub fn conv_backward / conv_backward_avx(
        s: &ConvShape,
        input: &[f64],
        weight: &[f64],
        dout: &[f64],
        dweight: &mut [f64],
        dbias: &mut [f64],
        need_input: bool,
    ) -> Option<Vec<f64>> = conv_backward_impl;
}

avx_dispatch! {
    /// `out[t] = w · x[t] + b` for a `rows × cols` weight.
    pub fn linear_seq / linear_seq_avx(xs: &[f64], steps: usize, cols: usize, w: &[f64], b: &[f64], rows: usize) -> Vec<f64> = linear_seq_impl;
}

avx_dispatch! {
    /// Backward of [`linear_seq`]: accumulates `dw`, `db`, returns `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn linear_seq_backward / linear_seq_backward_avx(
        xs: &[f64],
        steps: usize,
        cols: usize,
        w: &[f64],
        rows: usize,
        dout: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> = linear_seq_backward_impl;
}

avx_dispatch! {
    /// Runs one LSTM direction over `steps × dim` inputs. Gate order in the
    /// weights is input, forget, candidate, output. With `reverse` the
    /// recurrence runs from the last step to the first; outputs stay
    /// indexed by time.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_forward / lstm_forward_avx(
        xs: &[f64],
        steps: usize,
        dim: usize,
        hidden: usize,
        wx: &[f64],
        wh: &[f64],
        b: &[f64],
        reverse: bool,
    ) -> LstmCache = lstm_forward_impl;
}

avx_dispatch! {
    /// Backpropagation through time for one direction. `dh_out` is the
    /// gradient on the hidden outputs (`steps × h`). Accumulates into the
    /// weight gradients and returns the gradient on the inputs.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_backward / lstm_backward_avx(
        xs: &[f64],
        steps: usize,
        dim: usize,
        hidden: usize,
        wx: &[f64],
        wh: &[f64],
        cache: &LstmCache,
        dh_out: &[f64],
        reverse: bool,
        dwx: &mut [f64],
        dwh: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> = lstm_backward_impl;
}
