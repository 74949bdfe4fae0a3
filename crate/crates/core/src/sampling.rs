//! Two-channel measurement generation and predictor differences.
//!
//! Per sampler g the channels are 𝔪_n(g/β) (state) and 𝔪_n(T*(β)g/β)
//! (predictor). The derived arrays are F_n = 𝔪_{n+1}(g/β) − 𝔪_n(T*(β)g/β)
//! and Δ_n = e^{ρβ}F_{n+1} − F_n, which vanishes in the ideal case when no
//! burst occurred in [nβ, (n+2)β).

use crate::error::{Error, Result};
use crate::solver::{self, Scenario};
use crate::space::SpaceElement;
use std::io::Write;

/// The sampler family G̃; the full set G̃ ∪ T*(β)G̃ is realized implicitly by
/// the predictor channel.
#[derive(Debug, Clone)]
pub struct SamplerSet {
    gtilde: Vec<SpaceElement>,
    r_bound: f64,
}

impl SamplerSet {
    pub fn new(gtilde: Vec<SpaceElement>) -> Result<Self> {
        if gtilde.is_empty() {
            return Err(Error::InvalidParameter("sampler set must not be empty".into()));
        }
        let dim = gtilde[0].dim();
        for g in &gtilde {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
            }
        }
        let r_bound = gtilde.iter().map(|g| g.norm()).fold(0.0, f64::max);
        Ok(SamplerSet { gtilde, r_bound })
    }

    pub fn samplers(&self) -> &[SpaceElement] {
        &self.gtilde
    }

    pub fn len(&self) -> usize {
        self.gtilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gtilde.is_empty()
    }

    /// R = max ‖g‖ over G̃.
    pub fn r_bound(&self) -> f64 {
        self.r_bound
    }
}

/// Measurement and derived sequences for one sampler.
#[derive(Debug, Clone)]
pub struct MeasurementSeries {
    pub sampler_id: usize,
    /// 𝔪_n(g/β) for n = 0..=n_max.
    pub m_state: Vec<f64>,
    /// 𝔪_n(T*(β)g/β) for n = 0..=n_max.
    pub m_pred: Vec<f64>,
    /// F_n for n = 0..n_max.
    pub f: Vec<f64>,
    /// Δ_n for n = 0..n_max−1.
    pub delta: Vec<f64>,
}

impl MeasurementSeries {
    /// F_n = 𝔪_{n+1}(g/β) − 𝔪_n(T*(β)g/β).
    pub fn compute_f(&self, n: usize) -> Result<f64> {
        if n + 1 >= self.m_state.len() {
            return Err(Error::IndexOutOfRange { index: n, len: self.m_state.len() });
        }
        Ok(self.m_state[n + 1] - self.m_pred[n])
    }

    /// Δ_n = e^{ρβ}F_{n+1} − F_n.
    pub fn compute_delta(&self, n: usize, rho: f64, beta: f64) -> Result<f64> {
        if n + 1 >= self.f.len() {
            return Err(Error::IndexOutOfRange { index: n, len: self.f.len() });
        }
        Ok((rho * beta).exp() * self.f[n + 1] - self.f[n])
    }

    /// max(1, max_n |m_state[n]|), the scale used by relative floors.
    pub fn scale(&self) -> f64 {
        self.m_state.iter().fold(1.0, |acc, v| acc.max(v.abs()))
    }
}

fn noise_channel(sampler_id: usize, predictor: bool) -> u64 {
    (sampler_id as u64) * 2 + predictor as u64
}

/// The measurement pair (𝔪_n(g/β), 𝔪_n(T*(β)g/β)) at one grid instant,
/// evaluated from the mild solution directly.
pub fn measure(sc: &Scenario, n: usize, sampler_id: usize, g: &SpaceElement) -> Result<(f64, f64)> {
    let beta = sc.params.beta;
    let t = n as f64 * beta;
    let u = solver::mild_solution(sc, t)?;
    let g_pred = sc.semigroup.apply_adjoint(beta, g)?;
    let m_state = u.inner(g)? / beta + sc.noise.draw(t, noise_channel(sampler_id, false));
    let m_pred = u.inner(&g_pred)? / beta + sc.noise.draw(t, noise_channel(sampler_id, true));
    Ok((m_state, m_pred))
}

/// Generate all series for n = 0..=sc.n_max() by walking the grid once.
pub fn generate_series(sc: &Scenario, samplers: &SamplerSet) -> Result<Vec<MeasurementSeries>> {
    let beta = sc.params.beta;
    let rho = sc.params.rho;
    let n_max = sc.n_max();
    let g_pred: Vec<SpaceElement> = samplers
        .samplers()
        .iter()
        .map(|g| sc.semigroup.apply_adjoint(beta, g))
        .collect::<Result<_>>()?;
    let mut series: Vec<MeasurementSeries> = (0..samplers.len())
        .map(|j| MeasurementSeries {
            sampler_id: j,
            m_state: Vec::with_capacity(n_max + 1),
            m_pred: Vec::with_capacity(n_max + 1),
            f: Vec::new(),
            delta: Vec::new(),
        })
        .collect();
    solver::walk_grid(sc, n_max, |n, u| {
        let t = n as f64 * beta;
        for (j, (g, gp)) in samplers.samplers().iter().zip(&g_pred).enumerate() {
            series[j]
                .m_state
                .push(u.inner(g)? / beta + sc.noise.draw(t, noise_channel(j, false)));
            series[j]
                .m_pred
                .push(u.inner(gp)? / beta + sc.noise.draw(t, noise_channel(j, true)));
        }
        Ok(())
    })?;
    let w = (rho * beta).exp();
    for s in &mut series {
        s.f = (0..n_max).map(|n| s.m_state[n + 1] - s.m_pred[n]).collect();
        s.delta = (0..n_max - 1).map(|n| w * s.f[n + 1] - s.f[n]).collect();
    }
    Ok(series)
}

/// CSV dump: one row per (n, sampler) with derived columns where defined.
pub fn write_measurements_csv<W: Write>(
    out: &mut W,
    series: &[MeasurementSeries],
    beta: f64,
) -> Result<()> {
    writeln!(out, "n,t,sampler_id,m_state,m_pred,F,Delta")?;
    let n_rows = series.first().map(|s| s.m_state.len()).unwrap_or(0);
    for n in 0..n_rows {
        for s in series {
            let f = if n < s.f.len() { s.f[n].to_string() } else { String::new() };
            let d = if n < s.delta.len() { s.delta[n].to_string() } else { String::new() };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                n,
                n as f64 * beta,
                s.sampler_id,
                s.m_state[n],
                s.m_pred[n],
                f,
                d
            )?;
        }
    }
    Ok(())
}
