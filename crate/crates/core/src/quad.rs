//! Composite Gauss–Legendre quadrature with panel-doubling refinement.

use crate::error::{Error, Result};
use crate::space::SpaceElement;

/// 8-point Gauss–Legendre nodes on [-1, 1] (positive half) and weights.
const GL8_NODES: [f64; 4] = [
    0.18343464249564980,
    0.52553240991632899,
    0.79666647741362674,
    0.96028985649753623,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.36268378337836198,
    0.31370664587788729,
    0.22238103445337447,
    0.10122853629037626,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Relative refinement tolerance.
    pub tol: f64,
    /// Panels for the first pass over one integration interval.
    pub base_panels: usize,
    /// Panel-doubling rounds allowed before giving up.
    pub max_refinements: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { tol: 1e-10, base_panels: 1, max_refinements: 4 }
    }
}

/// One composite pass with `panels` equal panels.
pub fn gauss_legendre_scalar<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for i in 0..4 {
            acc += GL8_WEIGHTS[i] * (f(mid - half * GL8_NODES[i]) + f(mid + half * GL8_NODES[i]));
        }
    }
    acc * 0.5 * width
}

/// Refined scalar integral of f over [a, b].
pub fn integrate_scalar<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = cfg.base_panels.max(1);
    let mut prev = gauss_legendre_scalar(&f, a, b, panels);
    for _ in 0..cfg.max_refinements {
        panels *= 2;
        let next = gauss_legendre_scalar(&f, a, b, panels);
        let err = (next - prev).abs();
        if err <= cfg.tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    let final_panels = panels * 2;
    let next = gauss_legendre_scalar(&f, a, b, final_panels);
    let achieved = (next - prev).abs() / next.abs().max(1.0);
    if achieved <= cfg.tol {
        Ok(next)
    } else {
        Err(Error::QuadratureNonConvergence { achieved, requested: cfg.tol })
    }
}

fn gauss_legendre_vec<F: Fn(f64) -> Result<SpaceElement>>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<SpaceElement> {
    let width = (b - a) / panels as f64;
    let mut acc: Option<SpaceElement> = None;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for i in 0..4 {
            for s in [mid - half * GL8_NODES[i], mid + half * GL8_NODES[i]] {
                let v = f(s)?;
                match &mut acc {
                    None => {
                        let mut first = v;
                        first.scale_in_place(GL8_WEIGHTS[i]);
                        acc = Some(first);
                    }
                    Some(acc) => acc.axpy(GL8_WEIGHTS[i], &v)?,
                }
            }
        }
    }
    let mut acc = acc.expect("panels >= 1");
    acc.scale_in_place(0.5 * width);
    Ok(acc)
}

/// Refined vector-valued integral of f over [a, b].
pub fn integrate_vec<F: Fn(f64) -> Result<SpaceElement>>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<SpaceElement> {
    if a == b {
        let probe = f(a)?;
        return Ok(SpaceElement::zero(probe.dim(), probe.representation()));
    }
    let mut panels = cfg.base_panels.max(1);
    let mut prev = gauss_legendre_vec(&f, a, b, panels)?;
    for _ in 0..cfg.max_refinements {
        panels *= 2;
        let next = gauss_legendre_vec(&f, a, b, panels)?;
        let err = next.sub(&prev)?.norm();
        if err <= cfg.tol * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    let next = gauss_legendre_vec(&f, a, b, panels * 2)?;
    let achieved = next.sub(&prev)?.norm() / next.norm().max(1.0);
    if achieved <= cfg.tol {
        Ok(next)
    } else {
        Err(Error::QuadratureNonConvergence { achieved, requested: cfg.tol })
    }
}
