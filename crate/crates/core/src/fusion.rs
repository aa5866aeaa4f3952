//! Gated cross-attention from semantic features onto speaker features, in
//! double precision, with hand-derived gradients.
//!
//! Matrices are row-major with one row per frame:
//!
//! ```text
//! Q = Hs Wq    K = Hp Wk    V = Hp Wv
//! A = softmax_rows(Q Kᵀ / √d_a)
//! Hca = A V
//! G = sigmoid(Hca Wg + b_g)
//! Ho = G ⊙ Hca + Hs
//! ```
//!
//! The forward pass sums every reduction over keys in sorted order, so
//! permuting the frames of `Hs` and `Hp` together permutes the rows of the
//! output bit for bit.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// d_s × d_a
    pub w_q: Array2<f64>,
    /// d_p × d_a
    pub w_k: Array2<f64>,
    /// d_p × d_s
    pub w_v: Array2<f64>,
    /// d_s × d_s
    pub w_g: Array2<f64>,
    /// d_s
    pub b_g: Array1<f64>,
}

impl FusionParams {
    /// Identity projections and a zero gate: plain attention with
    /// Q = Hs and K = V = Hp.
    pub fn identity(d: usize) -> Self {
        Self {
            w_q: Array2::eye(d),
            w_k: Array2::eye(d),
            w_v: Array2::eye(d),
            w_g: Array2::zeros((d, d)),
            b_g: Array1::zeros(d),
        }
    }

    pub fn zeros(d_s: usize, d_p: usize, d_a: usize) -> Self {
        Self {
            w_q: Array2::zeros((d_s, d_a)),
            w_k: Array2::zeros((d_p, d_a)),
            w_v: Array2::zeros((d_p, d_s)),
            w_g: Array2::zeros((d_s, d_s)),
            b_g: Array1::zeros(d_s),
        }
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random<R: Rng>(d_s: usize, d_p: usize, d_a: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| rng.random_range(-scale..=scale))
        };
        let (w_q, w_k, w_v, w_g) = (m(d_s, d_a), m(d_p, d_a), m(d_p, d_s), m(d_s, d_s));
        let b_g = Array1::from_shape_fn(d_s, |_| rng.random_range(-scale..=scale));
        Self {
            w_q,
            w_k,
            w_v,
            w_g,
            b_g,
        }
    }

    pub fn d_s(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn d_p(&self) -> usize {
        self.w_k.nrows()
    }

    pub fn d_a(&self) -> usize {
        self.w_q.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (d_s, d_p, d_a) = (self.d_s(), self.d_p(), self.d_a());
        let expect = [
            ("w_k", self.w_k.dim(), (d_p, d_a)),
            ("w_v", self.w_v.dim(), (d_p, d_s)),
            ("w_g", self.w_g.dim(), (d_s, d_s)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Shape(format!(
                    "{name} is {got:?}, expected {want:?}"
                )));
            }
        }
        if self.b_g.len() != d_s {
            return Err(Error::Shape(format!(
                "b_g has {} entries, expected {d_s}",
                self.b_g.len()
            )));
        }
        if d_a == 0 {
            return Err(Error::Shape("attention dimension is zero".into()));
        }
        let all = [&self.w_q, &self.w_k, &self.w_v, &self.w_g];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite()))
            || self.b_g.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(())
    }
}

fn check_features(name: &str, m: &Array2<f64>, cols: usize) -> Result<()> {
    if m.ncols() != cols {
        return Err(Error::Shape(format!(
            "{name} has {} columns, expected {cols}",
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape(format!("{name} has a non-finite value")));
    }
    Ok(())
}

fn check_inputs(hs: &Array2<f64>, hp: &Array2<f64>, p: &FusionParams) -> Result<()> {
    p.validate()?;
    check_features("Hs", hs, p.d_s())?;
    check_features("Hp", hp, p.d_p())?;
    if hs.nrows() != hp.nrows() {
        return Err(Error::Shape(format!(
            "Hs has {} frames but Hp has {}",
            hs.nrows(),
            hp.nrows()
        )));
    }
    Ok(())
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| (s - max).exp());
        let z = sorted_sum(row.to_vec());
        row.mapv_inplace(|e| e / z);
    }
    out
}

/// `A V` with each output entry summed in sorted order.
fn weighted_values(a: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), v.ncols()), |(i, k)| {
        sorted_sum(
            a.row(i)
                .iter()
                .zip(v.column(k))
                .map(|(w, x)| w * x)
                .collect(),
        )
    })
}

struct Forward {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array2<f64>,
    hca: Array2<f64>,
    gate: Array2<f64>,
    out: Array2<f64>,
}

fn forward(hs: &Array2<f64>, hp: &Array2<f64>, p: &FusionParams) -> Forward {
    let q = hs.dot(&p.w_q);
    let k = hp.dot(&p.w_k);
    let v = hp.dot(&p.w_v);
    let scale = (p.d_a() as f64).sqrt();
    let a = softmax_rows(&(q.dot(&k.t()) / scale));
    let hca = weighted_values(&a, &v);
    let gate = (hca.dot(&p.w_g) + &p.b_g).mapv(sigmoid);
    let out = &gate * &hca + hs;
    Forward {
        q,
        k,
        v,
        a,
        hca,
        gate,
        out,
    }
}

/// Row-stochastic attention weights, T × T.
pub fn attention_weights(
    hs: &Array2<f64>,
    hp: &Array2<f64>,
    p: &FusionParams,
) -> Result<Array2<f64>> {
    check_inputs(hs, hp, p)?;
    Ok(forward(hs, hp, p).a)
}

/// `Hca`, T × d_s.
pub fn cross_attention(
    hs: &Array2<f64>,
    hp: &Array2<f64>,
    p: &FusionParams,
) -> Result<Array2<f64>> {
    check_inputs(hs, hp, p)?;
    Ok(forward(hs, hp, p).hca)
}

pub fn gate(hca: &Array2<f64>, p: &FusionParams) -> Result<Array2<f64>> {
    p.validate()?;
    check_features("Hca", hca, p.d_s())?;
    Ok((hca.dot(&p.w_g) + &p.b_g).mapv(sigmoid))
}

/// `Ho = G ⊙ Hca + Hs`.
pub fn gated_fuse(hs: &Array2<f64>, hca: &Array2<f64>, p: &FusionParams) -> Result<Array2<f64>> {
    check_features("Hs", hs, p.d_s())?;
    if hs.dim() != hca.dim() {
        return Err(Error::Shape(format!(
            "Hs is {:?} but Hca is {:?}",
            hs.dim(),
            hca.dim()
        )));
    }
    let g = gate(hca, p)?;
    Ok(&g * hca + hs)
}

/// Attention followed by the gated residual.
pub fn fuse(hs: &Array2<f64>, hp: &Array2<f64>, p: &FusionParams) -> Result<Array2<f64>> {
    check_inputs(hs, hp, p)?;
    Ok(forward(hs, hp, p).out)
}

/// Gradients of `L = Σ Ho²` with respect to every parameter and input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_g: Array2<f64>,
    pub b_g: Array1<f64>,
    pub hs: Array2<f64>,
    pub hp: Array2<f64>,
}

pub fn sum_of_squares_loss(hs: &Array2<f64>, hp: &Array2<f64>, p: &FusionParams) -> Result<f64> {
    Ok(fuse(hs, hp, p)?.iter().map(|x| x * x).sum())
}

pub fn loss_and_gradients(
    hs: &Array2<f64>,
    hp: &Array2<f64>,
    p: &FusionParams,
) -> Result<(f64, Gradients)> {
    check_inputs(hs, hp, p)?;
    let f = forward(hs, hp, p);
    let loss = f.out.iter().map(|x| x * x).sum();
    let scale = (p.d_a() as f64).sqrt();

    let d_out = &f.out * 2.0;
    let d_z = &d_out * &f.hca * &f.gate * &f.gate.mapv(|g| 1.0 - g);
    let d_w_g = f.hca.t().dot(&d_z);
    let d_b_g = d_z.sum_axis(Axis(0));
    let d_hca = &d_out * &f.gate + d_z.dot(&p.w_g.t());

    let d_a = d_hca.dot(&f.v.t());
    let d_v = f.a.t().dot(&d_hca);
    let row_dot = (&d_a * &f.a).sum_axis(Axis(1)).insert_axis(Axis(1));
    let d_s = &f.a * &(&d_a - &row_dot);
    let d_q = d_s.dot(&f.k) / scale;
    let d_k = d_s.t().dot(&f.q) / scale;

    let grads = Gradients {
        w_q: hs.t().dot(&d_q),
        w_k: hp.t().dot(&d_k),
        w_v: hp.t().dot(&d_v),
        w_g: d_w_g,
        b_g: d_b_g,
        hs: d_out + d_q.dot(&p.w_q.t()),
        hp: d_k.dot(&p.w_k.t()) + d_v.dot(&p.w_v.t()),
    };
    Ok((loss, grads))
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Largest relative error between the analytic gradient and a central
/// finite difference with step `eps`, over every parameter and input entry.
/// The error of each entry is `|a - n| / max(|a|, |n|, 1)`.
pub fn fusion_grad_check(
    hs: &Array2<f64>,
    hp: &Array2<f64>,
    p: &FusionParams,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::InvalidConfig(format!(
            "eps must lie in (0, 1e-3], got {eps}"
        )));
    }
    let (_, g) = loss_and_gradients(hs, hp, p)?;
    let mut worst: f64 = 0.0;

    let mut probe = |analytic: f64, eval: &mut dyn FnMut(f64) -> Result<f64>| -> Result<()> {
        let numeric = (eval(eps)? - eval(-eps)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic, numeric));
        Ok(())
    };

    macro_rules! check_param {
        ($field:ident) => {
            for (idx, &analytic) in g.$field.indexed_iter() {
                probe(analytic, &mut |h| {
                    let mut q = p.clone();
                    q.$field[idx] += h;
                    sum_of_squares_loss(hs, hp, &q)
                })?;
            }
        };
    }
    check_param!(w_q);
    check_param!(w_k);
    check_param!(w_v);
    check_param!(w_g);
    check_param!(b_g);

    for (idx, &analytic) in g.hs.indexed_iter() {
        probe(analytic, &mut |h| {
            let mut x = hs.clone();
            x[idx] += h;
            sum_of_squares_loss(&x, hp, p)
        })?;
    }
    for (idx, &analytic) in g.hp.indexed_iter() {
        probe(analytic, &mut |h| {
            let mut x = hp.clone();
            x[idx] += h;
            sum_of_squares_loss(hs, &x, p)
        })?;
    }
    Ok(worst)
}
