//! One function per experiment kind; each returns tables and checks and
//! leaves writing to the caller.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context as _, Result};

use dyadlab::berezin::{modified_berezin, DyadicBerezinField};
use dyadlab::dyadic::{build_adjacent_grids, read_grid, write_grid, GridCalibration};
use dyadlab::metrics::{ballbox_path_audit, bb_sandwich_sweep, local_constancy_audit};
use dyadlab::operator_lab::{
    commutator_norm_l2, compactness_diagnostic, dictionary_lower_bound, discretize_projection, nystrom_cloud,
    peaking_commutator_curve, test_dictionary, CfKernel, PowerOptions, ProjectionDiscretization, ProjectorMode,
};
use dyadlab::oscillation::{bmo_berezin, bmo_dyadic, bmo_kobayashi, stratified_centers, Functional, OscCurve, Symbol};
use dyadlab::qmc::derive_seed;
use dyadlab::sampling::{rudin_forelli_audit, sample_local, sample_plain};
use dyadlab::{CPoint, Domain, DyadicSystem, GridConfig, SampleSpec, C64};

use crate::config::{BerezinMode, Experiment, ExperimentConfig, GeometryAudit, GridSpec};
use crate::report::{cell, Check, Outcome, Table};

/// Depth floor of the truncated Nyström cloud.
pub const NYSTROM_DELTA_MIN: f64 = 0.01;
/// Tent quadrature cap for the dyadic functional.
pub const TENT_MEMBER_CAP: usize = 256;
/// Peaking-family depths for the compactness experiment.
pub const PEAKING_DELTAS: [f64; 7] = [0.5, 0.2, 0.1, 0.03, 0.01, 3e-3, 1e-3];

/// Resolved config plus lazily built grids.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub domain: Domain,
    systems: Option<Vec<DyadicSystem>>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Result<Context<'a>> {
        let domain = Domain::new(config.domain.clone()).context("invalid domain")?;
        Ok(Context { config, domain, systems: None })
    }

    /// Adjacent systems, read from `grid.file` or built once.
    pub fn systems(&mut self) -> Result<&[DyadicSystem]> {
        if self.systems.is_none() {
            let systems = match &self.config.grid.file {
                Some(path) => read_grid_file(path)?,
                None => build_systems(&self.domain, &self.config.grid, self.config.seed)?,
            };
            if systems.iter().any(|s| s.grid.domain.spec() != self.domain.spec()) {
                bail!("grid file was built on a different domain");
            }
            self.systems = Some(systems);
        }
        Ok(self.systems.as_deref().expect("just filled"))
    }

    fn centers(&self) -> Vec<CPoint> {
        let c = &self.config.cloud;
        stratified_centers(&self.domain, c.delta_min, c.delta_max, c.centers_per_decade, derive_seed(self.config.seed, 0xc0))
    }

    fn nystrom(&self) -> Result<ProjectionDiscretization> {
        let cloud = nystrom_cloud(&self.domain, self.config.cloud.points, NYSTROM_DELTA_MIN, derive_seed(self.config.seed, 0x4e));
        Ok(discretize_projection(&self.domain, &cloud, ProjectorMode::Nystrom, None)?)
    }
}

/// Builds `spec.adjacent` grids over one uniform sample; `beta` is calibrated
/// on the ball.
pub fn build_systems(domain: &Domain, spec: &GridSpec, seed: u64) -> Result<Vec<DyadicSystem>> {
    let base = GridConfig::new(spec.s, spec.delta_cal, spec.levels, seed);
    let sample = SampleSpec::Uniform { count: spec.sample_count, seed: derive_seed(seed, 0x5a) };
    let seeds: Vec<u64> = (0..spec.adjacent as u64).map(|i| derive_seed(seed, 0x6100 + i)).collect();
    let grids = build_adjacent_grids(domain, base, sample, &seeds)?;
    Ok(grids
        .into_iter()
        .map(|g| {
            let mut sys = DyadicSystem::new(g);
            if domain.is_ball() {
                sys.calibrate_beta();
            }
            sys
        })
        .collect())
}

/// Grid records back to back, each with its calibration block.
pub fn write_grid_file(path: &Path, systems: &[DyadicSystem]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for sys in systems {
        write_grid(&sys.grid, Some(&GridCalibration::measure(sys)), &mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_file(path: &Path) -> Result<Vec<DyadicSystem>> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    while !r.fill_buf()?.is_empty() {
        let (grid, cal) = read_grid(&mut r).with_context(|| format!("reading grid {} of {}", out.len(), path.display()))?;
        let mut sys = DyadicSystem::new(grid);
        sys.beta = cal.and_then(|c| c.beta);
        out.push(sys);
    }
    if out.is_empty() {
        bail!("{} holds no grids", path.display());
    }
    Ok(out)
}

pub fn execute(exp: &Experiment, ctx: &mut Context) -> Result<Outcome> {
    match exp {
        Experiment::GridAudit => grid_audit(ctx),
        Experiment::Geometry { audit, samples } => geometry(ctx, *audit, *samples),
        Experiment::RfAudit { a, b, zdecades, per_scale } => rf_audit(ctx, *a, *b, *zdecades, *per_scale),
        Experiment::Berezin { mode } => berezin(ctx, *mode),
        Experiment::Bmo { r, p } => bmo(ctx, *r, *p),
        Experiment::VmoProfile { r, p, thresholds } => vmo_profile(ctx, *r, *p, thresholds),
        Experiment::Commutator { p } => commutator(ctx, *p),
        Experiment::Compactness { cuts } => compactness(ctx, cuts),
        Experiment::CfVerify { eps } => cf_verify(ctx, *eps),
    }
}

fn constant_value(sym: &Symbol) -> Option<f64> {
    match sym {
        Symbol::Constant { value } => Some(*value),
        _ => None,
    }
}

/// Constants must give zero oscillation up to round-off.
fn zero_for_constants(checks: &mut Vec<Check>, what: &str, sym: &Symbol, value: f64) {
    if let Some(c) = constant_value(sym) {
        let ok = value <= 1e-12 * c.abs().max(1.0);
        checks.push(Check::hard(format!("{what}_constant_is_zero"), ok, format!("{} -> {value:e}", sym.id())));
    }
}

fn relative_gap(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn grid_audit(ctx: &mut Context) -> Result<Outcome> {
    let systems = ctx.systems()?;
    let mut levels = Table::new(&["grid", "level", "radius", "cubes", "min_points", "max_points", "max_children"]);
    let mut cal = Table::new(&[
        "grid", "beta", "sandwich_c", "sandwich_big_c", "slope", "slope_se", "expected_slope", "separation_violations",
        "covering_violations", "nesting_violations",
    ]);
    let mut checks = Vec::new();
    for (i, sys) in systems.iter().enumerate() {
        let g = &sys.grid;
        let max_children = g.max_children();
        for k in 0..=g.depth() {
            let counts = g.cube_counts(k);
            levels.push(vec![
                cell(i),
                cell(k),
                cell(g.levels[k].radius),
                cell(counts.len()),
                cell(counts.iter().min().copied().unwrap_or(0)),
                cell(counts.iter().max().copied().unwrap_or(0)),
                cell(max_children),
            ]);
        }
        let c = GridCalibration::measure(sys);
        let (sep, cov, nest) = g.exact_audit();
        cal.push(vec![
            cell(i),
            c.beta.map(cell).unwrap_or_default(),
            cell(c.sandwich.0),
            cell(c.sandwich.1),
            cell(c.slope),
            cell(c.slope_se),
            cell(c.expected_slope),
            cell(sep),
            cell(cov),
            cell(nest),
        ]);
        checks.push(Check::hard(format!("grid{i}_exact_audit"), sep + cov + nest == 0, format!("{sep}/{cov}/{nest}")));
        if c.slope.is_finite() {
            let gap = relative_gap(c.slope, c.expected_slope);
            checks.push(Check::soft(format!("grid{i}_measure_slope"), gap <= 0.1, format!("{:.4} vs {:.4}", c.slope, c.expected_slope)));
        }
    }
    Ok(Outcome { tables: vec![("levels".into(), levels), ("calibration".into(), cal)], checks })
}

fn geometry(ctx: &mut Context, audit: GeometryAudit, samples: usize) -> Result<Outcome> {
    let n = ctx.domain.dim();
    let seed = derive_seed(ctx.config.seed, 0x6e0);
    let mut t = Table::new(&["audit", "param", "value", "ci_low", "ci_high"]);
    let mut checks = Vec::new();
    let row = |t: &mut Table, audit: &str, param: String, v: f64, ci: Option<(f64, f64)>| {
        let (lo, hi) = ci.map(|(a, b)| (cell(a), cell(b))).unwrap_or_default();
        t.push(vec![audit.into(), param, cell(v), lo, hi]);
    };
    match audit {
        GeometryAudit::Ballbox => {
            let fit = ballbox_path_audit(samples, 200, seed);
            row(&mut t, "ballbox", "min_ratio".into(), fit.min_ratio, None);
            row(&mut t, "ballbox", "max_ratio".into(), fit.max_ratio, None);
            row(&mut t, "ballbox", "constant".into(), fit.constant(), None);
            row(&mut t, "ballbox", "pairs".into(), fit.pairs as f64, None);
        }
        GeometryAudit::BbDistance => {
            let sweep = bb_sandwich_sweep(n, samples, 1e-4, 1e-1, seed);
            row(&mut t, "bb_distance", "sup".into(), sweep.sup, None);
            for (lo, mean, count) in &sweep.decades {
                row(&mut t, "bb_distance", format!("decade_mean@{lo:e}"), *mean, None);
                row(&mut t, "bb_distance", format!("decade_count@{lo:e}"), *count as f64, None);
            }
            let spread = sweep.decade_spread();
            row(&mut t, "bb_distance", "decade_spread".into(), spread, None);
            checks.push(Check::soft("bb_decade_spread", sweep.sup.is_finite() && spread <= 2.0, format!("{spread:.3}")));
        }
        GeometryAudit::LocalConstancy => {
            for (delta, ratio) in local_constancy_audit(n, 1.0, &[1e-1, 1e-2, 1e-3, 1e-4], samples, seed) {
                row(&mut t, "local_constancy", format!("delta={delta:e}"), ratio, None);
            }
        }
        GeometryAudit::Rf => {
            let deltas = rf_deltas(4);
            let per_scale = (samples / deltas.len()).max(200);
            for (a, b) in [(0.0, 0.5), (1.0, 1.0)] {
                let fit = rudin_forelli_audit(&ctx.domain, a, b, &deltas, per_scale, seed)?;
                let exponent = fit.offset_fit.exponent;
                row(&mut t, "rf", format!("a={a},b={b}:exponent"), exponent, None);
                row(&mut t, "rf", format!("a={a},b={b}:loglog_slope"), fit.slope, None);
                checks.push(Check::soft(format!("rf_exponent_a{a}_b{b}"), relative_gap(exponent, b) <= 0.1, format!("{exponent:.4}")));
            }
        }
    }
    Ok(Outcome { tables: vec![("report".into(), t)], checks })
}

/// Base-point depths `3e-2 * 10^{-i/2}` over `decades` decades.
pub fn rf_deltas(decades: usize) -> Vec<f64> {
    (0..=2 * decades.max(1)).map(|i| 3e-2 * 10f64.powf(-(i as f64) / 2.0)).collect()
}

fn rf_audit(ctx: &mut Context, a: f64, b: f64, zdecades: usize, per_scale: usize) -> Result<Outcome> {
    let fit = rudin_forelli_audit(&ctx.domain, a, b, &rf_deltas(zdecades), per_scale, derive_seed(ctx.config.seed, 0x7f))?;
    let mut t = Table::new(&["rho", "value", "se"]);
    for (rho, e) in &fit.samples {
        t.push(vec![cell(rho), cell(e.value), cell(e.se)]);
    }
    let mut f = Table::new(&["a", "b", "exponent", "scale", "offset", "rel_rms", "loglog_slope", "constant"]);
    let o = fit.offset_fit;
    f.push(vec![cell(a), cell(b), cell(o.exponent), cell(o.scale), cell(o.offset), cell(o.rel_rms), cell(fit.slope), cell(fit.constant)]);
    let check = Check::soft("rf_exponent", relative_gap(o.exponent, b) <= 0.1, format!("{:.4} vs {b}", o.exponent));
    Ok(Outcome { tables: vec![("samples".into(), t), ("fit".into(), f)], checks: vec![check] })
}

fn berezin(ctx: &mut Context, mode: BerezinMode) -> Result<Outcome> {
    let symbols = ctx.config.symbols_or_default();
    let seed = derive_seed(ctx.config.seed, 0xbe);
    let mut checks = Vec::new();
    let table = match mode {
        BerezinMode::Modified => {
            let centers = ctx.centers();
            let mut t = Table::new(&["symbol", "center", "delta", "re", "im", "se"]);
            for sym in &symbols {
                let mut worst: f64 = 0.0;
                for (i, z) in centers.iter().enumerate() {
                    let cloud = sample_local(&ctx.domain, z, ctx.config.cloud.per_scale, derive_seed(seed, i as u64));
                    let e = modified_berezin(&ctx.domain, sym, z, &cloud)?;
                    if let Some(c) = constant_value(sym) {
                        worst = worst.max((e.value - c).norm());
                    }
                    t.push(vec![sym.id(), cell(i), cell(ctx.domain.delta(z)), cell(e.value.re), cell(e.value.im), cell(e.se)]);
                }
                if let Some(c) = constant_value(sym) {
                    checks.push(Check::hard("modified_berezin_reproduces_constants", worst <= 1e-12 * c.abs().max(1.0), format!("{worst:e}")));
                }
            }
            t
        }
        BerezinMode::Dyadic => {
            let count = ctx.config.cloud.ball_points;
            let systems = ctx.systems()?;
            let mut t = Table::new(&["symbol", "grid", "level", "index", "re", "im"]);
            for sym in &symbols {
                for (g, sys) in systems.iter().enumerate() {
                    let field = DyadicBerezinField::build(sys, sym, sys.beta.unwrap_or(1.0), count, seed)?;
                    let mut worst: f64 = 0.0;
                    t.push(vec![sym.id(), cell(g), "root".into(), String::new(), cell(field.root.re), cell(field.root.im)]);
                    for (k, level) in field.values.iter().enumerate() {
                        for (j, v) in level.iter().enumerate() {
                            if let Some(v) = v {
                                if let Some(c) = constant_value(sym) {
                                    worst = worst.max((v - c).norm());
                                }
                                t.push(vec![sym.id(), cell(g), cell(k), cell(j), cell(v.re), cell(v.im)]);
                            }
                        }
                    }
                    if let Some(c) = constant_value(sym) {
                        worst = worst.max((field.root - c).norm());
                        checks.push(Check::hard("dyadic_berezin_reproduces_constants", worst <= 1e-12 * c.abs().max(1.0), format!("{worst:e}")));
                    }
                }
            }
            t
        }
    };
    Ok(Outcome { tables: vec![("field".into(), table)], checks })
}

/// One functional's curve for one symbol.
pub fn oscillation_curve(ctx: &mut Context, functional: Functional, sym: &Symbol, r: f64, p: f64) -> Result<OscCurve> {
    let seed = derive_seed(ctx.config.seed, 0x05c);
    let cloud = ctx.config.cloud.clone();
    Ok(match functional {
        Functional::Kobayashi => bmo_kobayashi(&ctx.domain, sym, r, p, &ctx.centers(), cloud.ball_points, seed)?,
        Functional::Berezin => bmo_berezin(&ctx.domain, sym, p, &ctx.centers(), cloud.per_scale, seed)?,
        Functional::Dyadic => bmo_dyadic(ctx.systems()?, sym, p, TENT_MEMBER_CAP)?,
    })
}

fn functional_name(f: Functional) -> &'static str {
    match f {
        Functional::Kobayashi => "kobayashi",
        Functional::Dyadic => "dyadic",
        Functional::Berezin => "berezin",
    }
}

fn bmo(ctx: &mut Context, r: f64, p: f64) -> Result<Outcome> {
    let mut t = Table::new(&["functional", "symbol", "center", "delta", "value", "se"]);
    let mut sup = Table::new(&["functional", "symbol", "sup", "starved"]);
    let mut checks = Vec::new();
    for f in ctx.config.functionals_or_default() {
        for sym in ctx.config.symbols_or_default() {
            let curve = oscillation_curve(ctx, f, &sym, r, p)?;
            for (i, pt) in curve.points.iter().enumerate() {
                t.push(vec![functional_name(f).into(), sym.id(), cell(i), cell(pt.delta), cell(pt.value), cell(pt.se)]);
            }
            sup.push(vec![functional_name(f).into(), sym.id(), cell(curve.sup()), cell(curve.starved)]);
            zero_for_constants(&mut checks, functional_name(f), &sym, curve.sup());
        }
    }
    Ok(Outcome { tables: vec![("curves".into(), t), ("sup".into(), sup)], checks })
}

fn vmo_profile(ctx: &mut Context, r: f64, p: f64, thresholds: &[f64]) -> Result<Outcome> {
    let mut t = Table::new(&["functional", "symbol", "threshold", "value", "bulk", "vmo"]);
    let mut checks = Vec::new();
    for f in ctx.config.functionals_or_default() {
        for sym in ctx.config.symbols_or_default() {
            let prof = oscillation_curve(ctx, f, &sym, r, p)?.profile(thresholds);
            for &(th, v) in &prof.curve {
                t.push(vec![functional_name(f).into(), sym.id(), cell(th), cell(v), cell(prof.bulk), cell(prof.is_vmo(th))]);
            }
            zero_for_constants(&mut checks, functional_name(f), &sym, prof.bulk);
            if let (Some(expect), Some(last)) = (sym.expected().vmo, prof.deepest_resolved()) {
                let got = prof.is_vmo(last);
                checks.push(Check::soft(format!("{}_{}_vmo", functional_name(f), sym.id()), got == expect, format!("vmo={got} at delta < {last}")));
            }
        }
    }
    Ok(Outcome { tables: vec![("profile".into(), t)], checks })
}

fn commutator(ctx: &mut Context, p: f64) -> Result<Outcome> {
    let disc = ctx.nystrom()?;
    let opts = PowerOptions { seed: derive_seed(ctx.config.seed, 0x90), ..PowerOptions::default() };
    let mut t = Table::new(&["symbol", "p", "value", "kind", "iterations", "converged"]);
    let mut checks = Vec::new();
    let dict = if p == 2.0 { Vec::new() } else { test_dictionary(&ctx.domain, &disc, p, 12, 4, derive_seed(ctx.config.seed, 0xd1))? };
    for sym in ctx.config.symbols_or_default() {
        let b = disc.values(&sym);
        if p == 2.0 {
            let e = commutator_norm_l2(&disc, &b, &opts)?;
            t.push(vec![sym.id(), cell(p), cell(e.value), "operator_norm".into(), cell(e.iterations), cell(e.converged)]);
            zero_for_constants(&mut checks, "commutator", &sym, e.value);
        } else {
            let v = dictionary_lower_bound(&disc, &b, p, &dict)?;
            t.push(vec![sym.id(), cell(p), cell(v), "dictionary_lower_bound".into(), String::new(), String::new()]);
            zero_for_constants(&mut checks, "commutator", &sym, v);
        }
    }
    Ok(Outcome { tables: vec![("norms".into(), t)], checks })
}

fn compactness(ctx: &mut Context, cuts: &[f64]) -> Result<Outcome> {
    let disc = ctx.nystrom()?;
    let opts = PowerOptions { seed: derive_seed(ctx.config.seed, 0x91), ..PowerOptions::default() };
    let mut t = Table::new(&["symbol", "curve", "depth", "value", "bulk"]);
    let mut checks = Vec::new();
    for sym in ctx.config.symbols_or_default() {
        let b = disc.values(&sym);
        let rep = compactness_diagnostic(&disc, &b, cuts, &opts)?;
        for &(cut, v) in &rep.tail {
            t.push(vec![sym.id(), "tail".into(), cell(cut), cell(v), cell(rep.bulk)]);
        }
        let peaks = peaking_commutator_curve(&ctx.domain, &sym, &PEAKING_DELTAS, ctx.config.cloud.per_scale, derive_seed(ctx.config.seed, 0x92))?;
        let bulk = peaks.first().map_or(0.0, |x| x.1);
        for &(delta, v) in &peaks {
            t.push(vec![sym.id(), "peaking".into(), cell(delta), cell(v), cell(bulk)]);
        }
        if constant_value(&sym) == Some(0.0) {
            let all_zero = rep.bulk == 0.0 && rep.tail.iter().all(|x| x.1 == 0.0) && peaks.iter().all(|x| x.1 == 0.0);
            checks.push(Check::hard("zero_symbol_gives_zero_curves", all_zero, String::new()));
        }
    }
    Ok(Outcome { tables: vec![("curves".into(), t)], checks })
}

/// Test points of the reproduction check, inside the unit ball of `C^n`.
fn cf_points(n: usize) -> Vec<CPoint> {
    let base: [[f64; 6]; 3] = [[0.0; 6], [0.3, 0.1, -0.2, 0.0, 0.1, 0.0], [0.0, -0.4, 0.2, 0.2, 0.0, -0.1]];
    base.iter().map(|b| CPoint::from_real_pairs(n, &b[..2 * n])).collect()
}

/// Holomorphic monomials `1`, `w_1` and (for `n >= 2`) `w_1 w_2`.
pub fn cf_monomials(n: usize) -> Vec<(&'static str, fn(&CPoint) -> C64)> {
    let mut out: Vec<(&'static str, fn(&CPoint) -> C64)> = vec![("1", |_| C64::new(1.0, 0.0)), ("w1", |w| w[0])];
    if n >= 2 {
        out.push(("w1w2", |w| w[0] * w[1]));
    }
    out
}

fn cf_verify(ctx: &mut Context, eps: f64) -> Result<Outcome> {
    let n = ctx.domain.dim();
    let seed = ctx.config.seed;
    let mut cf = CfKernel::new(&ctx.domain, eps);
    let cal_cloud = sample_plain(&ctx.domain, 20_000, derive_seed(seed, 0xcf1));
    let per_center = cf.calibrate(&cal_cloud, &cf_points(n))?;
    let val = sample_plain(&ctx.domain, 20_000, derive_seed(seed, 0xcf2));
    let z = CPoint::from_real_pairs(n, &[0.25, -0.1, 0.15, 0.3, 0.0, 0.1][..2 * n]);
    let mut t = Table::new(&["target", "re", "im", "expect_re", "expect_im", "se", "within_3se"]);
    let mut checks = Vec::new();
    for (name, f) in cf_monomials(n) {
        let vals: Vec<C64> = val.points.iter().map(f).collect();
        let e = cf.apply_at(&val, &vals, &z)?;
        let expect = f(&z);
        let ok = (e.value - expect).norm() < 3.0 * e.se;
        t.push(vec![name.into(), cell(e.value.re), cell(e.value.im), cell(expect.re), cell(expect.im), cell(e.se), cell(ok)]);
        checks.push(Check::soft(format!("cf_reproduces_{name}"), ok, format!("{:.3e}", (e.value - expect).norm() / e.se)));
    }
    let mut k = Table::new(&["eps", "kappa", "center", "center_kappa"]);
    for (i, c) in per_center.iter().enumerate() {
        k.push(vec![cell(eps), cell(cf.kappa), cell(i), cell(c)]);
    }
    Ok(Outcome { tables: vec![("reproduction".into(), t), ("kappa".into(), k)], checks })
}
