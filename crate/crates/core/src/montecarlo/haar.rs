//! Haar-distributed unitary transforms.
//!
//! [`sample_haar_unitary`] builds a dense Haar matrix by QR of a complex
//! Ginibre matrix. The Monte-Carlo harness never needs the matrix itself,
//! only its action on a handful of vectors tied to one draw; [`HaarAction`]
//! samples that action exactly in distribution in `O(N)` work.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::rng::{complex_normal, substream};

/// Draws an `n × n` Haar unitary.
pub fn sample_haar_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = substream(seed, "haar-dense", 0);
    haar_unitary_from(n, &mut rng)
}

pub fn haar_unitary_from<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    assert!(n >= 1, "unitary size must be positive");
    let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng, 1.0));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the phases of R's diagonal so Q is Haar rather than merely unitary.
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unitary `B` with `B e₁ = v / ‖v‖`: a Householder reflection times a phase.
#[derive(Debug, Clone)]
struct PhasedReflector {
    phase: Complex64,
    w: Vec<Complex64>,
    w_norm_sqr: f64,
}

impl PhasedReflector {
    fn new(v: &[Complex64]) -> Self {
        let n = norm(v);
        let v0 = v[0];
        let phase = if v0.norm() > 0.0 { v0 / v0.norm() } else { Complex64::new(1.0, 0.0) };
        // w = e1 - conj(phase) v / |v|
        let mut w: Vec<Complex64> = v.iter().map(|x| -(phase.conj() * x) / n).collect();
        w[0] += 1.0;
        let w_norm_sqr = w.iter().map(|c| c.norm_sqr()).sum();
        Self { phase, w, w_norm_sqr }
    }

    fn reflect(&self, y: &mut [Complex64]) {
        if self.w_norm_sqr == 0.0 {
            return;
        }
        let c = dot(&self.w, y) * (2.0 / self.w_norm_sqr);
        for (yi, wi) in y.iter_mut().zip(&self.w) {
            *yi -= wi * c;
        }
    }

    fn apply(&self, y: &mut [Complex64]) {
        self.reflect(y);
        y.iter_mut().for_each(|c| *c *= self.phase);
    }

    fn apply_adjoint(&self, y: &mut [Complex64]) {
        let p = self.phase.conj();
        y.iter_mut().for_each(|c| *c *= p);
        self.reflect(y);
    }
}

/// One Haar draw `V`, conditioned on nothing, represented through
/// `u = Vᴴ z` for a given `z` and able to apply `V` to vectors computed from `u`.
///
/// Conditional on `Vᴴ z = u`, a Haar `V` equals `B_z diag(1, W) B_uᴴ` with `W`
/// Haar on the orthogonal complement; the action of `W` on `k` vectors is
/// sampled through `k` Gaussian vectors.
#[derive(Debug, Clone)]
pub struct HaarAction {
    bz: PhasedReflector,
    bu: PhasedReflector,
    u: Vec<Complex64>,
    zero: bool,
}

impl HaarAction {
    /// Draws `u = Vᴴ z`, which is uniform on the sphere of radius `‖z‖`.
    pub fn draw<R: Rng + ?Sized>(z: &[Complex64], rng: &mut R) -> Self {
        let n = z.len();
        assert!(n >= 1, "transform size must be positive");
        let zn = norm(z);
        let g: Vec<Complex64> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
        let gn = norm(&g);
        let u: Vec<Complex64> = g.iter().map(|x| x * (zn / gn)).collect();
        let zero = zn == 0.0;
        let (bz, bu) = if zero {
            (PhasedReflector::new(&g), PhasedReflector::new(&g))
        } else {
            (PhasedReflector::new(z), PhasedReflector::new(&u))
        };
        Self { bz, bu, u, zero }
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    /// Returns `V y` for each input vector, jointly consistent with one `V`.
    pub fn apply<R: Rng + ?Sized>(&self, ys: &[&[Complex64]], rng: &mut R) -> Vec<Vec<Complex64>> {
        let n = self.u.len();
        let k = ys.len();
        // Fresh Gaussian directions for W, drawn up front so the stream use is fixed.
        let fresh: Vec<Vec<Complex64>> = (0..k)
            .map(|_| (0..n.saturating_sub(1)).map(|_| complex_normal(rng, 1.0)).collect())
            .collect();
        for y in ys {
            assert_eq!(y.len(), n, "vector length must match the transform size");
        }
        if self.zero {
            // z = 0 leaves V unconstrained; draw its whole action from scratch.
            let full: Vec<Vec<Complex64>> = fresh
                .into_iter()
                .map(|mut f| {
                    f.insert(0, complex_normal(rng, 1.0));
                    f
                })
                .collect();
            return apply_random_isometry(ys, &full);
        }
        let mut t: Vec<Vec<Complex64>> = ys
            .iter()
            .map(|y| {
                let mut v = y.to_vec();
                self.bu.apply_adjoint(&mut v);
                v
            })
            .collect();
        if n > 1 {
            let rests: Vec<&[Complex64]> = t.iter().map(|v| &v[1..]).collect();
            let mapped = apply_random_isometry(&rests, &fresh);
            for (v, m) in t.iter_mut().zip(mapped) {
                v[1..].copy_from_slice(&m);
            }
        }
        for v in t.iter_mut() {
            self.bz.apply(v);
        }
        t
    }
}

/// Applies `W` to the columns `ys`, where `W` is a Haar unitary whose action
/// on `span(ys)` is realised by Gram–Schmidt of the `fresh` Gaussian vectors.
fn apply_random_isometry(ys: &[&[Complex64]], fresh: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut qs: Vec<Vec<Complex64>> = Vec::new();
    let mut fs: Vec<Vec<Complex64>> = Vec::new();
    let mut out = Vec::with_capacity(ys.len());
    for (col, g) in ys.iter().zip(fresh) {
        let cn = norm(col);
        let mut res = col.to_vec();
        let mut coeffs = Vec::with_capacity(qs.len());
        for q in &qs {
            let c = dot(q, &res);
            for (r, qi) in res.iter_mut().zip(q) {
                *r -= qi * c;
            }
            coeffs.push(c);
        }
        let rn = norm(&res);
        let mut image = vec![Complex64::new(0.0, 0.0); col.len()];
        for (c, f) in coeffs.iter().zip(&fs) {
            for (o, fi) in image.iter_mut().zip(f) {
                *o += fi * c;
            }
        }
        if rn > 1e-13 * cn && rn > 0.0 {
            let mut f = g.clone();
            for fp in &fs {
                let c = dot(fp, &f);
                for (x, pi) in f.iter_mut().zip(fp) {
                    *x -= pi * c;
                }
            }
            let fnorm = norm(&f);
            f.iter_mut().for_each(|x| *x /= fnorm);
            for (o, fi) in image.iter_mut().zip(&f) {
                *o += fi * rn;
            }
            res.iter_mut().for_each(|x| *x /= rn);
            qs.push(res);
            fs.push(f);
        }
        out.push(image);
    }
    out
}
