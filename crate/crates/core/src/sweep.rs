//! Independent Newton solves over a grid of frequencies (and optionally ε), run on a worker pool.
//!
//! Records come back in grid order regardless of scheduling, so the serialized output does not
//! depend on the number of workers.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::frequency::{FamilySample, Frequency, SampledFamily};
use crate::kam::{dynamical_residual_capped, solve_curve, SolverConfig};

pub const DEFAULT_GRID_N: usize = 1024;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `n` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v, n: 1 }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub omega_re: Axis,
    pub omega_im: Axis,
    pub eps: Vec<Complex64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.omega_re.n * self.omega_im.n * self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order: ε slowest, then Im ω, then Re ω.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for (e, &eps) in self.eps.iter().enumerate() {
            for j in 0..self.omega_im.n {
                for i in 0..self.omega_re.n {
                    out.push(GridPoint {
                        index: out.len(),
                        i,
                        j,
                        e,
                        omega: Complex64::new(self.omega_re.value(i), self.omega_im.value(j)),
                        eps,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub i: usize,
    pub j: usize,
    pub e: usize,
    pub omega: Complex64,
    pub eps: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub solver: SolverConfig,
    /// 0 means the rayon default.
    pub workers: usize,
    pub grid_n: usize,
    pub store_curves: bool,
    /// Step in ω for the central differences of the sampled family; 0 disables the family.
    pub fd_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            workers: 0,
            grid_n: DEFAULT_GRID_N,
            store_curves: false,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Converged {
        iterations: usize,
        residual: f64,
        dynamical_residual: Option<f64>,
        effective_cutoff: usize,
        beta: Complex64,
    },
    Failed {
        kind: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(flatten)]
    pub point: GridPoint,
    #[serde(flatten)]
    pub outcome: PointOutcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u: Option<FourierSeries>,
    /// Central-difference estimate of `du/dq`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub du_dq: Option<FourierSeries>,
}

impl SweepRecord {
    pub fn converged(&self) -> bool {
        matches!(self.outcome, PointOutcome::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub family: SampledFamily,
}

impl SweepOutput {
    pub fn converged_count(&self) -> usize {
        self.records.iter().filter(|r| r.converged()).count()
    }

    pub fn all_failed(&self) -> bool {
        !self.records.is_empty() && self.converged_count() == 0
    }

    /// One JSON object per line, in grid order.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        Ok(())
    }
}

fn solve_u(f: &FourierSeries, omega: Complex64, eps: Complex64, cfg: &SolverConfig) -> Option<FourierSeries> {
    solve_curve(f, &Frequency::from_omega(omega), eps, cfg).ok().map(|c| c.u)
}

fn run_point(f: &FourierSeries, p: &GridPoint, cfg: &SweepConfig) -> (SweepRecord, Option<FamilySample>) {
    let freq = Frequency::from_omega(p.omega);
    match solve_curve(f, &freq, p.eps, &cfg.solver) {
        Ok(curve) => {
            let dyn_res = dynamical_residual_capped(&curve, cfg.grid_n, cfg.solver.exp_cap).ok();
            let rep = &curve.report;
            let outcome = PointOutcome::Converged {
                iterations: rep.iterations,
                residual: rep.residual_history.last().copied().unwrap_or(0.0),
                dynamical_residual: dyn_res,
                effective_cutoff: rep.effective_cutoff,
                beta: rep.beta,
            };
            let mut du_dq = None;
            let mut sample = None;
            if cfg.fd_step > 0.0 {
                let h = cfg.fd_step;
                let plus = solve_u(f, p.omega + h, p.eps, &cfg.solver);
                let minus = solve_u(f, p.omega - h, p.eps, &cfg.solver);
                if let (Some(up), Some(um), Some(q)) = (plus, minus, freq.q()) {
                    let n = curve.u.cutoff();
                    let du_domega = (&up.resized(n) - &um.resized(n)).scale(Complex64::new(0.5 / h, 0.0));
                    // dq/dω = 2πi q
                    let dq = Complex64::new(0.0, 2.0 * PI) * q;
                    let d = du_domega.scale(dq.inv());
                    sample = Some(FamilySample {
                        freq,
                        value: curve.u.coeffs().to_vec(),
                        deriv: d.coeffs().to_vec(),
                    });
                    du_dq = Some(d);
                }
            }
            let rec = SweepRecord {
                point: *p,
                outcome,
                u: cfg.store_curves.then(|| curve.u.clone()),
                du_dq: if cfg.store_curves { du_dq } else { None },
            };
            (rec, sample)
        }
        Err(e) => (
            SweepRecord {
                point: *p,
                outcome: PointOutcome::Failed {
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                },
                u: None,
                du_dq: None,
            },
            None,
        ),
    }
}

pub fn run_sweep(f: &FourierSeries, grid: &SweepGrid, cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.solver.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let points = grid.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results: Vec<(SweepRecord, Option<FamilySample>)> =
        pool.install(|| points.par_iter().map(|p| run_point(f, p, cfg)).collect());
    let mut records = Vec::with_capacity(results.len());
    let mut family = SampledFamily::default();
    for (r, s) in results {
        records.push(r);
        family.points.extend(s);
    }
    records.sort_by_key(|r| r.point.index);
    Ok(SweepOutput { records, family })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_and_grid_order() {
        let a = Axis::new(0.0, 1.0, 5);
        assert_eq!(a.value(0), 0.0);
        assert_eq!(a.value(4), 1.0);
        assert_eq!(Axis::point(0.3).value(0), 0.3);
        let g = SweepGrid {
            omega_re: Axis::new(0.5, 0.6, 3),
            omega_im: Axis::new(0.1, 0.2, 2),
            eps: vec![Complex64::new(0.01, 0.0), Complex64::new(0.02, 0.0)],
        };
        let pts = g.points();
        assert_eq!(pts.len(), 12);
        assert!(pts.iter().enumerate().all(|(k, p)| p.index == k));
        assert_eq!((pts[4].i, pts[4].j, pts[4].e), (1, 1, 0));
        assert_eq!(pts[7].e, 1);
    }

    #[test]
    fn resonant_point_is_recorded_inline() {
        let g = SweepGrid {
            omega_re: Axis::new(0.5, 0.618_033_988_7, 2),
            omega_im: Axis::point(0.0),
            eps: vec![Complex64::new(0.05, 0.0)],
        };
        let cfg = SweepConfig {
            solver: SolverConfig::with_cutoff(64),
            fd_step: 0.0,
            ..Default::default()
        };
        let out = run_sweep(&FourierSeries::cosine(1, 0), &g, &cfg).unwrap();
        assert!(!out.records[0].converged());
        assert!(out.records[1].converged(), "{:?}", out.records[1]);
        assert!(!out.all_failed());
        let mut buf = Vec::new();
        out.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"status\":\"failed\""));
    }
}
