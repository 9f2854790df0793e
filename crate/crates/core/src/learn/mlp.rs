//! Fully connected network with tanh hidden layers and a linear output,
//! parameters held in one flat vector.

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use rand_distr::StandardNormal;

/// Layer layout. Layer `l` stores its weights as an `in x out` column-major
/// block (so row-major `out x in`), followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Per-layer activations of a batch forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Tape {
    pub acts: Vec<DMatrix<f64>>,
}

impl Tape {
    pub fn output(&self) -> &DMatrix<f64> {
        self.acts.last().expect("non-empty tape")
    }
}

impl Mlp {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Offsets of the weight and bias blocks of layer `l`.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let off = self.params_before(l);
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    fn params_before(&self, l: usize) -> usize {
        (0..l).map(|k| (self.sizes[k] + 1) * self.sizes[k + 1]).sum()
    }

    pub fn n_params(&self) -> usize {
        self.params_before(self.n_layers())
    }

    /// Gaussian weights with variance `1/fan_in`, the output layer scaled by
    /// `out_scale`, zero biases.
    pub fn init(&self, rng: &mut impl Rng, out_scale: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params()];
        for l in 0..self.n_layers() {
            let (w, b) = self.layer_offsets(l);
            let scale = (1.0 / self.sizes[l] as f64).sqrt() * if l + 1 == self.n_layers() { out_scale } else { 1.0 };
            for x in &mut p[w..b] {
                let z: f64 = rng.sample(StandardNormal);
                *x = scale * z;
            }
        }
        p
    }

    /// Single-sample forward pass with a fixed summation order.
    pub fn forward_one(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer_offsets(l);
            let mut z = p[b..b + n_out].to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let col = &p[w + o * n_in..w + (o + 1) * n_in];
                *zo += col.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l + 1 < self.n_layers() {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        a
    }

    /// Batch forward pass; rows of `x` are samples.
    pub fn forward(&self, p: &[f64], x: DMatrix<f64>) -> Tape {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x);
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer_offsets(l);
            let wm = DMatrixView::from_slice(&p[w..b], n_in, n_out);
            let mut z: DMatrix<f64> = &acts[l] * wm;
            for (o, mut col) in z.column_iter_mut().enumerate() {
                col.add_scalar_mut(p[b + o]);
            }
            if l + 1 < self.n_layers() {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        Tape { acts }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, p: &[f64], tape: &Tape, d_out: DMatrix<f64>, grad: &mut [f64]) {
        let mut dz = d_out;
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer_offsets(l);
            let x = &tape.acts[l];
            let dw = x.transpose() * &dz;
            for (g, d) in grad[w..b].iter_mut().zip(dw.as_slice()) {
                *g += d;
            }
            for (o, col) in dz.column_iter().enumerate() {
                grad[b + o] += col.sum();
            }
            if l == 0 {
                break;
            }
            let wm = DMatrixView::from_slice(&p[w..b], n_in, n_out);
            let mut dx = &dz * wm.transpose();
            dx.zip_apply(x, |d, a| *d *= 1.0 - a * a);
            dz = dx;
        }
    }
}
