use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use levy_sigkernel::development::{
    bound_gronwall, bound_inner_truncation, bound_level, bound_lipschitz, bound_outer_truncation, develop,
    gaussian_jump_tail_bound, oracle_depth, remainder_diagnostics, RemainderMode,
};
use levy_sigkernel::mc::estimate_kernel;
use levy_sigkernel::mmd::mmd_to_wiener;
use levy_sigkernel::tensor::checked_tensor_len;
use levy_sigkernel::{
    characteristic_velocity, solve_truncated_system, truncation_certificate, JumpSpec, KernelSurface,
    LevyTriplet, PiecewiseVelocity,
};

use crate::config::Config;

/// Outer truncation tolerance of every development oracle.
const ORACLE_TOL: f64 = 1e-10;
/// Relative grid tolerance allowed on top of analytic bounds.
const GRID_RTOL: f64 = 1e-3;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Depth of the reference velocities: exact for continuous triplets, a few levels past the truncation otherwise.
fn reference_depth(cfg: &Config, a: &LevyTriplet, b: &LevyTriplet) -> Result<usize> {
    let lv = cfg.levels()?;
    let base = lv.m.max(lv.n).max(2);
    let r = match lv.reference_depth {
        Some(r) => r,
        None if a.is_continuous() && b.is_continuous() => base,
        None => base + 4,
    };
    if r < lv.m.max(lv.n) {
        bail!("config error at `levels.reference_depth`: {r} is below the truncation levels");
    }
    Ok(r)
}

/// Largest number of tensor coefficients an oracle development may use.
const ORACLE_MAX_LEN: usize = 1 << 21;

/// Development depth whose outer truncation bound is below `tol`, if it fits in memory.
fn feasible_depth(v: &PiecewiseVelocity, horizon: f64, tol: f64) -> Result<usize> {
    // highest level carrying a nonzero coefficient
    let n = (1..=v.depth())
        .rev()
        .find(|&k| v.pieces().iter().any(|p| p.level(k).iter().any(|&c| c != 0.0)))
        .unwrap_or(1);
    let l = v.mass(0.0, horizon)?;
    let d = oracle_depth(l, n, tol)
        .with_context(|| format!("velocity mass {l} too large for the development oracle"))?;
    if checked_tensor_len(v.dim(), d).is_none_or(|n| n > ORACLE_MAX_LEN) {
        bail!("the development oracle needs depth {d} in dimension {}, which is too large; reduce T or the velocities", v.dim());
    }
    Ok(d)
}

/// `<S(v)_T, S(w)_T>` from developments deep enough that the outer truncation is below `ORACLE_TOL`.
fn development_inner(v: &PiecewiseVelocity, w: &PiecewiseVelocity, horizon: f64) -> Result<f64> {
    let d = feasible_depth(v, horizon, ORACLE_TOL)?.max(feasible_depth(w, horizon, ORACLE_TOL)?);
    Ok(develop(v, 0.0, horizon, d)?.inner(&develop(w, 0.0, horizon, d)?)?)
}

struct KernelRun {
    surface: KernelSurface,
    va: PiecewiseVelocity,
    vb: PiecewiseVelocity,
    certificate: f64,
}

fn kernel_run(cfg: &Config) -> Result<KernelRun> {
    let lv = cfg.levels()?;
    let a = cfg.triplet(0)?;
    let b = cfg.triplet(1)?;
    let r = reference_depth(cfg, &a, &b)?;
    let va = characteristic_velocity(&a, r)?;
    let vb = characteristic_velocity(&b, r)?;
    let s_grid = cfg.s_grid()?.merge(a.grid());
    let t_grid = cfg.t_grid()?.merge(b.grid());
    let horizon = cfg.grid.horizon;
    let certificate = truncation_certificate(&va, &vb, lv.m, lv.n, horizon, horizon)?;
    let surface = solve_truncated_system(&va, &vb, lv.m, lv.n, &s_grid, &t_grid)?.with_certificate(certificate);
    Ok(KernelRun {
        surface,
        va,
        vb,
        certificate,
    })
}

pub fn cmd_kernel(cfg: &Config, out: &Path) -> Result<()> {
    let run = kernel_run(cfg)?;
    let lv = cfg.levels()?;
    let mut f = create(out, "kernel.csv")?;
    run.surface.write_csv(&mut f, true)?;
    f.flush()?;
    let mut c = create(out, "certificate.txt")?;
    writeln!(c, "M={}", lv.m)?;
    writeln!(c, "N={}", lv.n)?;
    writeln!(c, "reference_depth={}", run.va.depth())?;
    writeln!(c, "w_end={}", run.surface.w_end())?;
    writeln!(c, "certificate={}", run.certificate)?;
    c.flush()?;
    println!("w(T,T) = {}  certificate = {}", run.surface.w_end(), run.certificate);
    Ok(())
}

pub fn cmd_mmd(cfg: &Config, out: &Path) -> Result<()> {
    let ensemble = cfg.ensemble()?;
    let wiener = cfg.wiener()?;
    let grid = cfg
        .s_grid()?
        .merge(ensemble.grid())
        .merge(wiener.triplet().grid());
    let (mmd, report) = mmd_to_wiener(&ensemble, &wiener, &grid)?;
    let mut f = create(out, "mmd.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    println!("mmd = {mmd}  mmd2 = {}", report.mmd2);
    if report.clipped {
        println!("note: a slightly negative radicand was clipped to zero");
    }
    Ok(())
}

struct Check {
    name: &'static str,
    error: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.error <= self.tolerance
    }
}

/// Runs the oracle comparisons and returns whether all passed.
pub fn cmd_validate(cfg: &Config, out: &Path, seed: u64) -> Result<bool> {
    let lv = cfg.levels()?;
    let horizon = cfg.grid.horizon;
    let run = kernel_run(cfg)?;
    let w = run.surface.w_end();
    let grid_tol = GRID_RTOL * w.abs();
    let mut checks = Vec::new();

    // the truncated velocities are solved exactly up to the grid
    let oracle = development_inner(&run.va.truncate(lv.m), &run.vb.truncate(lv.n), horizon)?;
    checks.push(Check {
        name: "develop_vs_solver",
        error: (w - oracle).abs(),
        tolerance: grid_tol,
    });

    let reference = development_inner(&run.va, &run.vb, horizon)?;
    checks.push(Check {
        name: "truncation_certificate",
        error: (w - reference).abs(),
        tolerance: run.certificate + grid_tol,
    });

    checks.push(Check {
        name: "apriori_bound",
        error: run.surface.max_apriori_ratio(),
        tolerance: 1.0 + 1e-12,
    });

    if let Some(mc) = &cfg.mc {
        let a = cfg.triplet(0)?;
        let b = cfg.triplet(1)?;
        let depth = run.va.depth();
        let est = estimate_kernel(&a, &b, horizon, depth, mc.n_paths, mc.steps, seed)?;
        // levels above the simulated depth
        let tail = |v: &PiecewiseVelocity| bound_outer_truncation(v, 0.0, horizon, depth, depth + 1);
        let tail = tail(&run.va)? * tail(&run.vb)?;
        checks.push(Check {
            name: "monte_carlo_vs_solver",
            error: (est.value - w).abs(),
            tolerance: 3.0 * est.se + run.certificate + tail + grid_tol,
        });
    }

    let mut f = create(out, "validate.txt")?;
    let mut all = true;
    for c in &checks {
        let line = format!(
            "{} {} error={} tolerance={}",
            if c.pass() { "PASS" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
        println!("{line}");
        writeln!(f, "{line}")?;
        all &= c.pass();
    }
    f.flush()?;
    Ok(all)
}

/// Bound tables for the first triplet: `kind,n,exact,bound`.
pub fn cmd_bounds(cfg: &Config, out: &Path) -> Result<()> {
    let a = cfg.triplet(0)?;
    let horizon = cfg.grid.horizon;
    let (n, r) = match &cfg.levels {
        Some(lv) => (lv.n, lv.reference_depth.unwrap_or(lv.m.max(lv.n) + 4)),
        None => (2, 8),
    };
    let v = characteristic_velocity(&a, r.max(a.state_depth()))?;
    let mut rows: Vec<(&str, usize, f64, f64)> = Vec::new();

    let deep = feasible_depth(&v, horizon, 1e-12)?;
    let s = develop(&v, 0.0, horizon, deep)?;
    rows.push(("gronwall", 0, s.norm1(), bound_gronwall(&v, 0.0, horizon)?));
    for k in 1..=v.depth() {
        rows.push(("level", k, s.level_norms().get(k), bound_level(&v, 0.0, horizon, k)?));
    }
    for k in 1..v.depth() {
        let sk = develop(&v.truncate(k), 0.0, horizon, deep)?;
        rows.push(("inner_truncation", k, s.sub(&sk)?.norm1(), bound_inner_truncation(&v, 0.0, horizon, k)?));
    }
    let vn = v.truncate(n);
    let deep_n = feasible_depth(&vn, horizon, 1e-12)?;
    let sn = develop(&vn, 0.0, horizon, deep_n)?;
    for mm in n..=n + 8 {
        let exact = sn.sub(&sn.truncate(mm - 1))?.norm1();
        rows.push(("outer_truncation", mm, exact, bound_outer_truncation(&vn, 0.0, horizon, n, mm)?));
    }
    if cfg.triplets.len() > 1 {
        let b = cfg.triplet(1)?;
        if b.dim() == a.dim() && b.horizon() >= horizon {
            let w = characteristic_velocity(&b, r.max(b.state_depth()))?;
            let sw = develop(&w, 0.0, horizon, deep.max(feasible_depth(&w, horizon, 1e-12)?))?;
            let sv = s.with_depth(sw.depth());
            rows.push(("lipschitz", 0, sv.sub(&sw)?.norm1(), bound_lipschitz(&v, &w, 0.0, horizon)?));
        }
    }
    // Gaussian jumps: velocity tails past level 2M against their closed-form bound
    let gaussian: Vec<(usize, f64, &nalgebra::DMatrix<f64>)> = a
        .pieces()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match &p.jumps {
            JumpSpec::GaussianCP {
                intensity,
                covariance,
            } => Some((i, *intensity, covariance)),
            _ => None,
        })
        .collect();
    if !gaussian.is_empty() {
        for mm in 1..=6 {
            let wide = characteristic_velocity(&a, 2 * mm + 16)?;
            let exact = wide.integrate(0.0, horizon, |p| p.sub(&p.truncate(2 * mm)).expect("same dim").norm1())?;
            let pts = a.grid().points();
            let bound: f64 = gaussian
                .iter()
                .map(|&(i, lam, cov)| {
                    let dt = (pts[i + 1].min(horizon) - pts[i]).max(0.0);
                    gaussian_jump_tail_bound(cov, lam, dt, mm)
                })
                .sum();
            rows.push(("gaussian_tail", mm, exact, bound));
        }
    }
    for mm in 1..=20 {
        let f = remainder_diagnostics(1.0, mm, RemainderMode::Factorial)?;
        rows.push(("remainder_factorial", mm, f.exact, f.asymptotic));
        let g = remainder_diagnostics(0.5, mm, RemainderMode::Geometric)?;
        rows.push(("remainder_geometric", mm, g.exact, g.asymptotic));
    }

    let mut f = create(out, "bounds.csv")?;
    writeln!(f, "kind,n,exact,bound")?;
    for (kind, k, exact, bound) in &rows {
        writeln!(f, "{kind},{k},{exact},{bound}")?;
    }
    f.flush()?;
    println!("wrote {} bound rows", rows.len());
    Ok(())
}
