//! End-to-end driver: ordering, symbolic analysis, numeric factorization and
//! selected inversion, with per-stage timings and a machine-readable report.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{factorize, normalize, FactorParams, FactorStats};
use crate::inverse::{selected_inversion, SelectedInverse};
use crate::ordering::{apply_symmetric_permutation, order_minimum_degree, Permutation};
use crate::parallel::{
    build_schedule, distribute_factor, parallel_selected_inversion, EngineMode, EngineParams,
    ProcessorGrid, RunTrace,
};
use crate::scalar::Scalar;
use crate::sparse::{symmetrize_pattern, to_symmetric_lower, CscMatrix};
use crate::symbolic::{analyze, postorder, column_etree, AnalyzeParams, Symbolic};

/// Fill-reducing ordering choice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum OrderingChoice {
    #[default]
    MinimumDegree,
    Natural,
    /// Externally supplied permutation (postordering is still applied).
    Given(Permutation),
}

#[derive(Debug, Clone)]
pub struct RunParams {
    pub ordering: OrderingChoice,
    pub analyze: AnalyzeParams,
    pub factor: FactorParams,
    pub grid: (usize, usize),
    pub mode: EngineMode,
    pub timeout: Duration,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            ordering: OrderingChoice::default(),
            analyze: AnalyzeParams::default(),
            factor: FactorParams::default(),
            grid: (1, 1),
            mode: EngineMode::Deterministic,
            timeout: Duration::from_secs(30),
        }
    }
}

/// Wall-clock seconds of the three computational components.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Timings {
    pub symbolic: f64,
    pub factor: f64,
    pub selinv: f64,
}

/// Outcome of one selected-inversion run.
pub struct RunOutput<T> {
    pub inverse: SelectedInverse<T>,
    pub symbolic: Arc<Symbolic>,
    pub stats: FactorStats,
    pub timings: Timings,
    pub trace: Option<RunTrace>,
}

/// Symbolic preparation shared by every pole of an expansion: permutation
/// composed with the postorder, the permuted pattern's analysis.
pub struct Prepared {
    pub permutation: Permutation,
    pub symbolic: Arc<Symbolic>,
    pub seconds: f64,
}

/// Order, postorder and analyze the pattern of `a`.
pub fn prepare<T: Scalar>(a: &CscMatrix<T>, params: &RunParams) -> Result<Prepared> {
    let t0 = Instant::now();
    let pattern = symmetrize_pattern(a);
    let fill_perm = match &params.ordering {
        OrderingChoice::MinimumDegree => order_minimum_degree(&pattern),
        OrderingChoice::Natural => Permutation::identity(a.n),
        OrderingChoice::Given(p) => {
            if p.len() != a.n {
                return Err(Error::DimensionMismatch {
                    expected: a.n,
                    got: p.len(),
                });
            }
            p.clone()
        }
    };
    // postorder the elimination tree of the permuted pattern, then compose
    let permuted = permute_pattern(&pattern, &fill_perm);
    let parent = column_etree(&permuted);
    let post = Permutation::from_new_to_old(postorder(&parent))
        .expect("postorder is a bijection");
    let permutation = fill_perm.compose(&post);
    let final_pattern = permute_pattern(&pattern, &permutation);
    let symbolic = Arc::new(analyze(&final_pattern, params.analyze)?);
    Ok(Prepared {
        permutation,
        symbolic,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

fn permute_pattern(
    pattern: &crate::sparse::SparsityPattern,
    p: &Permutation,
) -> crate::sparse::SparsityPattern {
    let n = pattern.n;
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let nj = p.old_to_new[j];
        for &i in pattern.col(j) {
            cols[nj].push(p.old_to_new[i]);
        }
    }
    let mut colptr = vec![0usize];
    let mut rowind = Vec::new();
    for col in &mut cols {
        col.sort_unstable();
        rowind.extend_from_slice(col);
        colptr.push(rowind.len());
    }
    crate::sparse::SparsityPattern { n, colptr, rowind }
}

/// Factor and invert `a` under an existing preparation.
pub fn run_prepared<T: Scalar>(
    a: &CscMatrix<T>,
    prep: &Prepared,
    params: &RunParams,
) -> Result<RunOutput<T>> {
    let lower = to_symmetric_lower(a);
    let permuted = apply_symmetric_permutation(&lower, &prep.permutation)?;

    let t1 = Instant::now();
    let factor = factorize(&permuted, &prep.symbolic, params.factor)?;
    let stats = factor.stats;
    let factor_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let (inverse, trace) = if params.grid == (1, 1) {
        let mut f = factor;
        normalize(&mut f)?;
        (selected_inversion(f)?, None)
    } else {
        let grid = ProcessorGrid::new(params.grid.0, params.grid.1)?;
        let schedule = Arc::new(build_schedule(
            &prep.symbolic.etree,
            &grid,
            &prep.symbolic.blocks,
        ));
        let stores = distribute_factor(&factor, &grid)?;
        let (inv, trace) = parallel_selected_inversion(
            stores,
            &prep.symbolic,
            &schedule,
            &grid,
            EngineParams {
                mode: params.mode,
                timeout: params.timeout,
                // plain runs keep task spans only; per-message events are for
                // the dedicated trace path
                collect_events: false,
            },
        )?;
        (inv, Some(trace))
    };
    let selinv_seconds = t2.elapsed().as_secs_f64();

    let inverse = inverse
        .with_permutation(prep.permutation.clone())
        .with_grid(params.grid);
    Ok(RunOutput {
        inverse,
        symbolic: Arc::clone(&prep.symbolic),
        stats,
        timings: Timings {
            symbolic: prep.seconds,
            factor: factor_seconds,
            selinv: selinv_seconds,
        },
        trace,
    })
}

/// Full pipeline on one matrix.
pub fn run<T: Scalar>(a: &CscMatrix<T>, params: &RunParams) -> Result<RunOutput<T>> {
    let prep = prepare(a, params)?;
    run_prepared(a, &prep, params)
}

/// One term of a pole expansion: shift `z` and weight `ω`.
pub type Pole = (Complex64, Complex64);

/// Accumulate `Γ = Σ_l ω_l (H - z_l S)⁻¹` on the common block skeleton of the
/// pattern of `H`. The symbolic phase runs once; each pole is factored and
/// inverted through the configured engine. A pole whose shifted matrix breaks
/// down is reported with its index.
pub fn pole_density_matrix(
    h: &CscMatrix<f64>,
    s: Option<&CscMatrix<f64>>,
    poles: &[Pole],
    params: &RunParams,
) -> Result<SelectedInverse<Complex64>> {
    if poles.is_empty() {
        return Err(Error::Invalid("pole expansion needs at least one pole".into()));
    }
    let hc = h.to_complex();
    let sc = s.map(|m| m.to_complex());
    let prep = prepare(&hc, params)?;
    let mut gamma: Option<SelectedInverse<Complex64>> = None;
    for (idx, &(z, weight)) in poles.iter().enumerate() {
        let shifted = crate::sparse::build_shifted(&hc, sc.as_ref(), z)
            .map_err(|e| Error::Pole {
                pole: idx,
                source: Box::new(e),
            })?;
        let out = run_prepared(&shifted, &prep, params).map_err(|e| Error::Pole {
            pole: idx,
            source: Box::new(e),
        })?;
        match &mut gamma {
            None => {
                let mut g = out.inverse;
                scale_blocks(&mut g, weight);
                gamma = Some(g);
            }
            Some(g) => accumulate_blocks(g, &out.inverse, weight),
        }
    }
    Ok(gamma.expect("at least one pole"))
}

fn scale_blocks(g: &mut SelectedInverse<Complex64>, w: Complex64) {
    for sn in &mut g.supernodes {
        for v in &mut sn.diag {
            *v *= w;
        }
        for b in &mut sn.off {
            for v in &mut b.values {
                *v *= w;
            }
        }
        for b in &mut sn.mirror {
            for v in &mut b.values {
                *v *= w;
            }
        }
    }
}

fn accumulate_blocks(g: &mut SelectedInverse<Complex64>, term: &SelectedInverse<Complex64>, w: Complex64) {
    for (gs, ts) in g.supernodes.iter_mut().zip(&term.supernodes) {
        for (a, &b) in gs.diag.iter_mut().zip(&ts.diag) {
            *a += w * b;
        }
        for (ab, bb) in gs.off.iter_mut().zip(&ts.off) {
            for (a, &b) in ab.values.iter_mut().zip(&bb.values) {
                *a += w * b;
            }
        }
        for (ab, bb) in gs.mirror.iter_mut().zip(&ts.mirror) {
            for (a, &b) in ab.values.iter_mut().zip(&bb.values) {
                *a += w * b;
            }
        }
    }
}

/// Versioned machine-readable run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub n: usize,
    pub nnz_a: usize,
    pub nnz_l: usize,
    pub supernodes: usize,
    pub grid: String,
    pub timings: Timings,
    /// Trace-based accuracy metric `|n - Tr[A⁻¹A]| / n`.
    pub e_metric: f64,
}

impl RunReport {
    pub fn new<T: Scalar>(out: &RunOutput<T>, a: &CscMatrix<T>) -> Result<Self> {
        let e = out.inverse.accuracy_metric(&to_symmetric_lower(a))?;
        Ok(RunReport {
            schema_version: 1,
            n: a.n,
            nnz_a: out.stats.nnz_a,
            nnz_l: out.stats.nnz_l,
            supernodes: out.stats.supernodes,
            grid: format!("{}x{}", out.inverse.meta.grid.unwrap_or((1, 1)).0,
                          out.inverse.meta.grid.unwrap_or((1, 1)).1),
            timings: out.timings,
            e_metric: e,
        })
    }
}
