//! Single-dipole fitting by multi-start derivative-free search.
//!
//! For a fixed position the best moments follow from linear least squares,
//! so only the three position coordinates are searched. The objective is
//! the residual energy `tr(S) - ||U^T W||^2`, with `S = W W^T` and `U` the
//! left singular vectors of the lead field.

use nalgebra::{DMatrix, SVD};

use super::head::{norm, HeadModel};
use crate::error::{Error, Result};
use crate::signal::SignalMatrix;

/// Search is confined to this fraction of the head radius.
pub const MAX_DEPTH: f64 = 0.95;
pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOL: f64 = 1e-10;
/// Singular-value ratio under which a lead field counts as degenerate.
const RANK_TOL: f64 = 1e-9;

/// Corners of a cube at 0.4 R: the fixed starting points.
pub fn seeds(radius: f64) -> [[f64; 3]; 8] {
    let a = 0.4 * radius;
    std::array::from_fn(|i| {
        [0, 1, 2].map(|k| if i >> (2 - k) & 1 == 0 { a } else { -a })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DipoleState {
    pub position: [f64; 3],
    /// 3 x W moment trajectory.
    pub moments: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub dipole: DipoleState,
    pub residual: SignalMatrix,
    /// Residual energy over window energy.
    pub rho: f64,
    pub objective: f64,
    /// Best objective after each iteration, across all phases.
    pub trace: Vec<f64>,
}

pub(crate) fn to_dmatrix(w: &SignalMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(w.n_channels(), w.n_samples(), w.data())
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> SignalMatrix {
    let mut out = SignalMatrix::zeros(m.nrows(), m.ncols());
    for ch in 0..m.nrows() {
        for (t, v) in out.row_mut(ch).iter_mut().enumerate() {
            *v = m[(ch, t)];
        }
    }
    out
}

/// Orthonormal basis of the lead field's column space, or `None` when the
/// lead field is rank deficient.
fn column_basis(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = SVD::new(l.clone(), true, false);
    let s = &svd.singular_values;
    let max = s.max();
    if !(max > 0.0) || s.min() < RANK_TOL * max || l.nrows() < 3 {
        return None;
    }
    svd.u
}

/// Residual energy of the best fit at `p`; `None` outside the search
/// region or for a degenerate lead field.
pub fn objective(model: &HeadModel, s: &DMatrix<f64>, trace_s: f64, p: [f64; 3]) -> Option<f64> {
    if norm(p) > MAX_DEPTH * model.radius {
        return None;
    }
    let l = model.lead_field(p).ok()?;
    let u = column_basis(&l)?;
    let su = s * &u;
    let captured = u.dot(&su);
    Some((trace_s - captured).max(0.0))
}

/// Least-squares moments for a fixed position.
pub fn solve_moments(l: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = SVD::new(l.clone(), true, true);
    let max = svd.singular_values.max();
    if !(max > 0.0) || svd.singular_values.min() < RANK_TOL * max {
        return Err(Error::Fit("lead field is rank deficient".into()));
    }
    svd.solve(w, 0.0).map_err(|e| Error::Fit(e.to_string()))
}

struct Search<'a> {
    model: &'a HeadModel,
    s: DMatrix<f64>,
    trace_s: f64,
    best: Option<([f64; 3], f64)>,
    trace: Vec<f64>,
}

impl Search<'_> {
    fn eval(&mut self, p: [f64; 3]) -> f64 {
        match objective(self.model, &self.s, self.trace_s, p) {
            Some(f) => {
                if self.best.is_none_or(|(_, b)| f < b) {
                    self.best = Some((p, f));
                }
                f
            }
            None => f64::INFINITY,
        }
    }

    fn record(&mut self) {
        if let Some((_, b)) = self.best {
            self.trace.push(b);
        }
    }

    fn converged(&self, old: f64, new: f64) -> bool {
        old - new <= REL_TOL * new.abs().max(1e-300) || new <= 1e-14 * self.trace_s
    }

    fn nelder_mead(&mut self, start: [f64; 3]) {
        let step = 0.1 * self.model.radius;
        let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
        let f0 = self.eval(start);
        simplex.push((start, f0));
        for k in 0..3 {
            let mut p = start;
            p[k] += if start[k] > 0.0 { -step } else { step };
            let f = self.eval(p);
            simplex.push((p, f));
        }
        for _ in 0..MAX_ITERATIONS {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[3].1);
            if worst.is_finite() && self.converged(worst, best) {
                break;
            }
            let centroid: [f64; 3] = std::array::from_fn(|k| simplex[..3].iter().map(|v| v.0[k]).sum::<f64>() / 3.0);
            let toward = |t: f64, p: [f64; 3]| -> [f64; 3] { std::array::from_fn(|k| centroid[k] + t * (p[k] - centroid[k])) };
            let xr = toward(-1.0, simplex[3].0);
            let fr = self.eval(xr);
            if fr < simplex[0].1 {
                let xe = toward(-2.0, simplex[3].0);
                let fe = self.eval(xe);
                simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[2].1 {
                simplex[3] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[3].1 {
                    let x = toward(-0.5, simplex[3].0);
                    (x, self.eval(x))
                } else {
                    let x = toward(0.5, simplex[3].0);
                    (x, self.eval(x))
                };
                if fc < simplex[3].1.min(fr) {
                    simplex[3] = (xc, fc);
                } else {
                    let b = simplex[0].0;
                    for v in simplex.iter_mut().skip(1) {
                        let x: [f64; 3] = std::array::from_fn(|k| b[k] + 0.5 * (v.0[k] - b[k]));
                        *v = (x, self.eval(x));
                    }
                }
            }
            self.record();
        }
    }

    /// Coordinate search with a shrinking step around the best point.
    fn compass(&mut self) {
        let Some((mut p, mut f)) = self.best else { return };
        let mut h = 0.01 * self.model.radius;
        for _ in 0..MAX_ITERATIONS {
            if h < 1e-9 * self.model.radius {
                break;
            }
            let mut moved = None;
            for k in 0..3 {
                for sgn in [1.0, -1.0] {
                    let mut q = p;
                    q[k] += sgn * h;
                    let fq = self.eval(q);
                    if fq < moved.map_or(f, |(_, g)| g) {
                        moved = Some((q, fq));
                    }
                }
            }
            match moved {
                Some((q, fq)) => {
                    let done = self.converged(f, fq);
                    p = q;
                    f = fq;
                    self.record();
                    if done {
                        h *= 0.5;
                    }
                }
                None => {
                    h *= 0.5;
                    self.record();
                }
            }
        }
    }
}

/// Fits one dipole to a channels x samples window.
pub fn fit_window(w: &SignalMatrix, model: &HeadModel) -> Result<FitResult> {
    if w.n_samples() < 8 {
        return Err(Error::Size(format!("dipole fit needs at least 8 samples, got {}", w.n_samples())));
    }
    if w.n_channels() != model.n_channels() {
        return Err(Error::structure(format!(
            "window has {} channels, head model {}",
            w.n_channels(),
            model.n_channels()
        )));
    }
    let wm = to_dmatrix(w);
    let energy = w.energy();
    let seeds = seeds(model.radius);
    if energy == 0.0 {
        return Ok(FitResult {
            dipole: DipoleState {
                position: seeds[0],
                moments: DMatrix::zeros(3, w.n_samples()),
            },
            residual: w.clone(),
            rho: 0.0,
            objective: 0.0,
            trace: vec![0.0],
        });
    }
    let s = &wm * wm.transpose();
    let mut search = Search {
        model,
        trace_s: s.trace(),
        s,
        best: None,
        trace: Vec::new(),
    };
    for seed in seeds {
        search.nelder_mead(seed);
    }
    search.compass();
    let (position, objective) = search
        .best
        .ok_or_else(|| Error::Fit("every candidate position gave a degenerate lead field".into()))?;
    let l = model.lead_field(position)?;
    let moments = solve_moments(&l, &wm)?;
    let residual = from_dmatrix(&(wm - &l * &moments));
    let rho = (residual.energy() / energy).clamp(0.0, 1.0);
    Ok(FitResult {
        dipole: DipoleState { position, moments },
        residual,
        rho,
        objective,
        trace: search.trace,
    })
}
