//! Fixed two-hidden-layer tanh network with hand-written reverse- and forward-mode
//! derivatives.
//!
//! Flat parameter layout (all weight matrices row-major, `[out][in]`):
//!
//! | block | length          |
//! |-------|-----------------|
//! | `w1`  | `h1 * n_in`     |
//! | `b1`  | `h1`            |
//! | `w2`  | `h2 * h1`       |
//! | `b2`  | `h2`            |
//! | `w3`  | `n_out * h2`    |
//! | `b3`  | `n_out`         |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of the network; offsets into the flat parameter vector derive from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpLayout {
    pub n_in: usize,
    pub h1: usize,
    pub h2: usize,
    pub n_out: usize,
}

/// Borrowed views of each parameter block.
#[derive(Debug, Clone, Copy)]
pub struct MlpBlocks<'a> {
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
    pub w3: &'a [f64],
    pub b3: &'a [f64],
}

impl MlpLayout {
    pub fn new(n_in: usize, hidden: [usize; 2], n_out: usize) -> Self {
        MlpLayout {
            n_in,
            h1: hidden[0],
            h2: hidden[1],
            n_out,
        }
    }

    pub fn w1(&self) -> usize {
        0
    }
    pub fn b1(&self) -> usize {
        self.h1 * self.n_in
    }
    pub fn w2(&self) -> usize {
        self.b1() + self.h1
    }
    pub fn b2(&self) -> usize {
        self.w2() + self.h2 * self.h1
    }
    pub fn w3(&self) -> usize {
        self.b2() + self.h2
    }
    pub fn b3(&self) -> usize {
        self.w3() + self.n_out * self.h2
    }

    /// Number of network parameters.
    pub fn len(&self) -> usize {
        self.b3() + self.n_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks<'a>(&self, p: &'a [f64]) -> MlpBlocks<'a> {
        MlpBlocks {
            w1: &p[self.w1()..self.b1()],
            b1: &p[self.b1()..self.w2()],
            w2: &p[self.w2()..self.b2()],
            b2: &p[self.b2()..self.w3()],
            w3: &p[self.w3()..self.b3()],
            b3: &p[self.b3()..self.len()],
        }
    }

    /// Concatenate blocks back into the flat layout.
    pub fn flatten(&self, b: &MlpBlocks<'_>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for block in [b.w1, b.b1, b.w2, b.b2, b.w3, b.b3] {
            out.extend_from_slice(block);
        }
        debug_assert_eq!(out.len(), self.len());
        out
    }

    /// Scaled-uniform init with unit-variance-preserving hidden layers and an output
    /// layer shrunk by `out_scale`; biases start at zero.
    pub fn init(&self, seed: u64, out_scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.len()];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, scale: f64, rng: &mut ChaCha8Rng| {
            let bound = scale * (3.0 / fan_in as f64).sqrt();
            for w in &mut p[range] {
                *w = rng.random_range(-bound..bound);
            }
        };
        fill(self.w1()..self.b1(), self.n_in.max(1), 1.0, &mut rng);
        fill(self.w2()..self.b2(), self.h1, 1.0, &mut rng);
        fill(self.w3()..self.b3(), self.h2, out_scale, &mut rng);
        p
    }
}

/// Hidden activations of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub out: Vec<f64>,
    scratch1: Vec<f64>,
    scratch2: Vec<f64>,
}

impl MlpCache {
    pub fn new(layout: &MlpLayout) -> Self {
        MlpCache {
            h1: vec![0.0; layout.h1],
            h2: vec![0.0; layout.h2],
            out: vec![0.0; layout.n_out],
            scratch1: vec![0.0; layout.h1],
            scratch2: vec![0.0; layout.h2],
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// `out = W x + b` for row-major `W`.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = dot(row, x) + bias;
    }
}

impl MlpLayout {
    /// Forward pass; the output lands in `cache.out`.
    pub fn forward(&self, p: &[f64], x: &[f64], cache: &mut MlpCache) {
        let b = self.blocks(p);
        affine(b.w1, b.b1, x, &mut cache.h1);
        cache.h1.iter_mut().for_each(|v| *v = v.tanh());
        affine(b.w2, b.b2, &cache.h1, &mut cache.h2);
        cache.h2.iter_mut().for_each(|v| *v = v.tanh());
        affine(b.w3, b.b3, &cache.h2, &mut cache.out);
    }

    /// Accumulate `scale * (d out / d params)^T g_out` into `grad[..self.len()]`.
    /// `cache` must hold the forward pass for the same `p` and `x`.
    pub fn backward(&self, p: &[f64], x: &[f64], cache: &mut MlpCache, g_out: &[f64], scale: f64, grad: &mut [f64]) {
        let b = self.blocks(p);
        let (h1, h2) = (self.h1, self.h2);
        let g_z2 = &mut cache.scratch2;
        g_z2.iter_mut().for_each(|v| *v = 0.0);
        {
            let (gw3, gb3) = grad[self.w3()..self.len()].split_at_mut(self.n_out * h2);
            for (o, &g) in g_out.iter().enumerate() {
                let g = g * scale;
                if g == 0.0 {
                    continue;
                }
                gb3[o] += g;
                axpy(g, &cache.h2, &mut gw3[o * h2..(o + 1) * h2]);
                axpy(g, &b.w3[o * h2..(o + 1) * h2], g_z2);
            }
        }
        for (g, h) in g_z2.iter_mut().zip(&cache.h2) {
            *g *= 1.0 - h * h;
        }
        let g_z1 = &mut cache.scratch1;
        g_z1.iter_mut().for_each(|v| *v = 0.0);
        {
            let (gw2, gb2) = grad[self.w2()..self.w3()].split_at_mut(h2 * h1);
            for (o, &g) in g_z2.iter().enumerate() {
                gb2[o] += g;
                axpy(g, &cache.h1, &mut gw2[o * h1..(o + 1) * h1]);
                axpy(g, &b.w2[o * h1..(o + 1) * h1], g_z1);
            }
        }
        for (g, h) in g_z1.iter_mut().zip(&cache.h1) {
            *g *= 1.0 - h * h;
        }
        let n_in = self.n_in;
        let (gw1, gb1) = grad[self.w1()..self.w2()].split_at_mut(h1 * n_in);
        for (o, &g) in g_z1.iter().enumerate() {
            gb1[o] += g;
            axpy(g, x, &mut gw1[o * n_in..(o + 1) * n_in]);
        }
    }

    /// Forward-mode derivative: `out = (d out / d params) v`.
    /// `cache` must hold the forward pass for the same `p` and `x`.
    pub fn jvp(&self, p: &[f64], x: &[f64], cache: &mut MlpCache, v: &[f64], out: &mut [f64]) {
        let b = self.blocks(p);
        let t = self.blocks(v);
        let d1 = &mut cache.scratch1;
        affine(t.w1, t.b1, x, d1);
        for (d, h) in d1.iter_mut().zip(&cache.h1) {
            *d *= 1.0 - h * h;
        }
        let d2 = &mut cache.scratch2;
        for (o, d) in d2.iter_mut().enumerate() {
            let r = o * self.h1..(o + 1) * self.h1;
            *d = dot(&t.w2[r.clone()], &cache.h1) + dot(&b.w2[r], d1) + t.b2[o];
        }
        for (d, h) in d2.iter_mut().zip(&cache.h2) {
            *d *= 1.0 - h * h;
        }
        for (o, y) in out.iter_mut().enumerate() {
            let r = o * self.h2..(o + 1) * self.h2;
            *y = dot(&t.w3[r.clone()], &cache.h2) + dot(&b.w3[r], d2) + t.b3[o];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_diff(layout: &MlpLayout, p: &[f64], x: &[f64], k: usize, o: usize) -> f64 {
        let h = 1e-6;
        let mut c = MlpCache::new(layout);
        let mut q = p.to_vec();
        q[k] += h;
        layout.forward(&q, x, &mut c);
        let up = c.out[o];
        q[k] -= 2.0 * h;
        layout.forward(&q, x, &mut c);
        (up - c.out[o]) / (2.0 * h)
    }

    #[test]
    fn backward_and_jvp_match_finite_differences() {
        let layout = MlpLayout::new(3, [5, 4], 2);
        let p = layout.init(1, 1.0);
        let x = [0.3, -0.7, 1.1];
        let mut c = MlpCache::new(&layout);
        layout.forward(&p, &x, &mut c);
        for o in 0..2 {
            let mut g_out = vec![0.0; 2];
            g_out[o] = 1.0;
            let mut grad = vec![0.0; layout.len()];
            layout.backward(&p, &x, &mut c, &g_out, 1.0, &mut grad);
            for k in 0..layout.len() {
                let fd = finite_diff(&layout, &p, &x, k, o);
                assert!((grad[k] - fd).abs() < 1e-7, "param {k} out {o}: {} vs {fd}", grad[k]);
            }
        }
        let v: Vec<f64> = (0..layout.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let mut jv = vec![0.0; 2];
        layout.jvp(&p, &x, &mut c, &v, &mut jv);
        for (o, &jv_o) in jv.iter().enumerate() {
            let fd: f64 = (0..layout.len()).map(|k| finite_diff(&layout, &p, &x, k, o) * v[k]).sum();
            assert!((jv_o - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn flatten_blocks_round_trip() {
        let layout = MlpLayout::new(4, [6, 3], 2);
        let p = layout.init(9, 0.01);
        assert_eq!(layout.flatten(&layout.blocks(&p)), p);
    }
}
