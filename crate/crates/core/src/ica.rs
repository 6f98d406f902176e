//! Infomax ICA on the rows of a harmonic basis, without centering or whitening.
//!
//! Centering would subtract a constant cochain, which is generally not
//! harmonic, and whitening is pointless because the basis is already
//! orthonormal. Skipping both keeps every output column an exact linear
//! combination of the input columns.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcaInit {
    Identity,
    /// Haar-random orthogonal start drawn from the seed.
    RandomOrthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaOptions {
    pub lr: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    /// Learning-rate factor applied when consecutive updates point more
    /// than 60 degrees apart.
    pub anneal: f64,
    pub init: IcaInit,
    pub seed: u64,
}

impl Default for IcaOptions {
    fn default() -> Self {
        Self { lr: 0.01, max_iter: 10_000, conv_tol: 1e-7, anneal: 0.9, init: IcaInit::Identity, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct UnmixingResult {
    /// `Y * unmix`, unit-norm columns.
    pub z: DMatrix<f64>,
    pub unmix: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Frobenius norm of the last update.
    pub last_update: f64,
    pub condition: f64,
}

/// Above this condition number the unmixing is reported as degenerate.
pub const CONDITION_WARN: f64 = 1e8;

fn random_orthogonal(b: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(b, b, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // sign fix so the draw is Haar distributed
    let signs = DMatrix::from_diagonal(&r.diagonal().map(|v| if v < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Natural-gradient Infomax with the logistic nonlinearity. Rows of `y`
/// are the samples.
pub fn ica_no_prewhite(y: &DMatrix<f64>, opts: &IcaOptions) -> Result<UnmixingResult> {
    let (n, b) = y.shape();
    if b == 0 {
        return Err(Error::Input("basis has no columns".into()));
    }
    if n == 0 {
        return Err(Error::Input("basis has no rows".into()));
    }
    if !(opts.lr > 0.0 && opts.conv_tol > 0.0 && opts.anneal > 0.0 && opts.anneal < 1.0) {
        return Err(Error::Parameter("lr, conv_tol must be positive and anneal in (0, 1)".into()));
    }
    if let Some(j) = (0..b).find(|&j| y.column(j).norm() == 0.0) {
        return Err(Error::DegenerateColumn(j));
    }

    // Orthonormal columns put each row at ~1/sqrt(n); rescale to unit
    // variance so the nonlinearity sees O(1) inputs. Only the final scale
    // of `unmix` is affected, and that is normalized away below.
    let x = y * (n as f64).sqrt();
    let init = match opts.init {
        IcaInit::Identity => DMatrix::identity(b, b),
        IcaInit::RandomOrthogonal => random_orthogonal(b, opts.seed),
    };
    let eye = DMatrix::<f64>::identity(b, b);

    let mut w = init.clone();
    let mut lr = opts.lr;
    let mut prev: Option<DMatrix<f64>> = None;
    let mut last_update = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    if b > 1 {
        for it in 1..=opts.max_iter {
            iterations = it;
            let u = &x * &w;
            let g = u.map(|v| (v / 2.0).tanh());
            let grad = &eye - u.transpose() * g / n as f64;
            let delta = &w * grad * lr;
            if !delta.iter().all(|v| v.is_finite()) || delta.norm() > 1e6 {
                // diverged: restart from the initial matrix with a smaller step
                w = init.clone();
                lr *= 0.8;
                prev = None;
                log::debug!("ica restart with lr {lr:e} at iteration {it}");
                continue;
            }
            w += &delta;
            last_update = delta.norm();
            if last_update < opts.conv_tol {
                converged = true;
                break;
            }
            if let Some(p) = &prev {
                let cos = p.dot(&delta) / (p.norm() * last_update);
                if cos < 0.5 {
                    lr *= opts.anneal;
                }
            }
            prev = Some(delta);
        }
    } else {
        converged = true;
        last_update = 0.0;
    }

    let mut unmix = w * (n as f64).sqrt();
    let mut z = y * &unmix;
    for j in 0..b {
        let norm = z.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateColumn(j));
        }
        let (imax, _) = z.column(j).iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let s = if z[(imax, j)] < 0.0 { -1.0 / norm } else { 1.0 / norm };
        unmix.column_mut(j).scale_mut(s);
        z.column_mut(j).scale_mut(s);
    }
    let condition = condition_number(&unmix);
    if condition > CONDITION_WARN {
        log::warn!("unmixing matrix is nearly singular (condition {condition:e})");
    }
    if !converged {
        log::warn!("ica stopped after {iterations} iterations, last update {last_update:e}");
    }
    Ok(UnmixingResult { z, unmix, iterations, converged, last_update, condition })
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let k = qa.ncols().min(qb.ncols());
    if k == 0 {
        return 0.0;
    }
    // sin of the largest angle is the norm of the residual of projecting
    // one basis onto the other; this stays accurate for tiny angles
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.singular_values().max().min(1.0);
    s.asin()
}
