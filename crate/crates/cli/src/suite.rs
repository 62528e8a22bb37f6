//! The ten acceptance criteria. Each runs at desk scale on one core and
//! reports pass/fail with the measured numbers.

use std::time::Instant;

use anyhow::Result;

use dyadlab::berezin::{modified_berezin, PeakingKernel};
use dyadlab::dyadic::{build_grid, read_grid, write_grid, GridCalibration};
use dyadlab::metrics::{bb_sandwich_sweep, big_f, boundary_quasidist, kobayashi_exact_ball, kobayashi_proxy, levi_g, GVariant};
use dyadlab::operator_lab::{
    bergman_kernel_ball, commutator_apply, commutator_norm_l2, compactness_diagnostic, discretize_projection, nystrom_cloud,
    peaking_commutator_curve, CfKernel, PowerOptions, ProjectorMode,
};
use dyadlab::oscillation::{bmo_berezin, bmo_dyadic, bmo_kobayashi, equivalence_constant, stratified_centers, OscCurve, Symbol};
use dyadlab::numeric::fit_line;
use dyadlab::qmc::derive_seed;
use dyadlab::sampling::{rudin_forelli_audit, rudin_forelli_tail, sample_local, sample_plain};
use dyadlab::{c64, CPoint, Domain, DomainSpec, DyadicSystem, GridConfig, SampleSpec, C64};

use crate::config::{Experiment, ExperimentConfig, GridSpec};
use crate::experiments::{build_systems, cf_monomials, rf_deltas, NYSTROM_DELTA_MIN, PEAKING_DELTAS, TENT_MEMBER_CAP};
use crate::report::{cell, Table};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("[{mark}] {:>2} {:<34} {} ({:.1}s)", self.id, self.name, self.detail, self.seconds)
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "dyadic measure law"),
    (2, "Balogh-Bonk sandwich"),
    (3, "Rudin-Forelli exponents"),
    (4, "peaking normalization"),
    (5, "BMO three-way equivalence"),
    (6, "VMO classification agreement"),
    (7, "commutator norm vs BMO"),
    (8, "compactness dichotomy"),
    (9, "Cauchy-Fantappie reproduction"),
    (10, "exactness floor and determinism"),
];

/// Grids shared by criteria 5 and 6.
#[derive(Default)]
pub struct Shared {
    disk_systems: Option<Vec<DyadicSystem>>,
}

impl Shared {
    fn disk_systems(&mut self, seed: u64) -> Result<&[DyadicSystem]> {
        if self.disk_systems.is_none() {
            let spec = GridSpec { s: 2.0, delta_cal: 0.7, levels: 5, adjacent: 3, sample_count: 300_000, file: None };
            self.disk_systems = Some(build_systems(&Domain::ball(1), &spec, derive_seed(seed, 0x5e))?);
        }
        Ok(self.disk_systems.as_deref().expect("just filled"))
    }
}

pub fn run_criterion(id: u8, seed: u64, shared: &mut Shared) -> CriterionResult {
    let start = Instant::now();
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let outcome = match id {
        1 => measure_law(seed),
        2 => sandwich(seed),
        3 => rudin_forelli(seed),
        4 => peaking_normalization(seed),
        5 => bmo_equivalence(seed, shared),
        6 => vmo_agreement(seed, shared),
        7 => commutator_vs_bmo(seed),
        8 => compactness_dichotomy(seed),
        9 => cf_reproduction(seed),
        10 => exactness_floor(seed),
        _ => Err(anyhow::anyhow!("no criterion {id}")),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    CriterionResult { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs the criteria in order, calling `report` after each.
pub fn run_all(seed: u64, report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let ids: Vec<u8> = CRITERIA.iter().map(|&(id, _)| id).collect();
    run_selected(seed, &ids, report)
}

/// Runs the listed criteria in the order given.
pub fn run_selected(seed: u64, ids: &[u8], mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut shared = Shared::default();
    ids.iter()
        .map(|&id| {
            let r = run_criterion(id, seed, &mut shared);
            report(&r);
            r
        })
        .collect()
}

pub fn results_table(results: &[CriterionResult]) -> Table {
    let mut t = Table::new(&["criterion", "name", "passed", "detail"]);
    for r in results {
        t.push(vec![cell(r.id), r.name.into(), cell(r.passed), r.detail.clone()]);
    }
    t
}

type Verdict = Result<(bool, String)>;

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn measure_law(seed: u64) -> Verdict {
    let d = Domain::ball(2);
    let cfg = GridConfig::new(2.0, 1.0, 7, derive_seed(seed, 0x101));
    let spec = SampleSpec::graded_for_levels(&cfg, 20_000, 2, 7, 6.0, 40_000, derive_seed(seed, 0x102));
    let sys = DyadicSystem::new(build_grid(&d, cfg, spec)?);
    let fit = sys.measure_regression(2..=7);
    let gap = rel(fit.slope, fit.expected);
    Ok((gap <= 0.1, format!("slope {:.4} vs {:.4} ({:.1}% off, {} kubes)", fit.slope, fit.expected, 100.0 * gap, fit.kubes)))
}

fn sandwich(seed: u64) -> Verdict {
    let sweep = bb_sandwich_sweep(2, 10_000, 1e-4, 1e-1, derive_seed(seed, 0x201));
    let spread = sweep.decade_spread();
    let means: Vec<String> = sweep.decades.iter().map(|d| format!("{:.3}", d.1)).collect();
    Ok((sweep.sup.is_finite() && spread <= 2.0, format!("sup {:.3}, decade means [{}], spread {spread:.3}", sweep.sup, means.join(", "))))
}

fn rudin_forelli(seed: u64) -> Verdict {
    let d = Domain::ball(2);
    let deltas = rf_deltas(3);
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(0.0, 0.5), (1.0, 1.0)] {
        let fit = rudin_forelli_audit(&d, a, b, &deltas, 8000, derive_seed(seed, 0x301))?;
        let e = fit.offset_fit.exponent;
        ok &= rel(e, b) <= 0.1;
        parts.push(format!("(a,b)=({a},{b}) exponent {e:.4}"));
    }
    let tail = rudin_forelli_tail(2, 0.0, 0.5, &[1.0, 2.0, 3.0], &[1e-1, 1e-2, 1e-3], 2000, derive_seed(seed, 0x302));
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    let tail: Vec<String> = tail.iter().map(|t| format!("{t:.3}")).collect();
    parts.push(format!("tail r=1,2,3 [{}]", tail.join(", ")));
    Ok((ok, parts.join("; ")))
}

fn peaking_normalization(seed: u64) -> Verdict {
    let d = Domain::ball(2);
    let mut norms = Vec::new();
    for (i, delta) in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4].into_iter().enumerate() {
        let z = CPoint::basis(2, 0) * (1.0 - delta);
        let s = PeakingKernel::new(&d, &z, 2.0)?;
        let cloud = sample_local(&d, &z, 4000, derive_seed(seed, 0x400 + i as u64));
        norms.push(s.lp_norm(&d, &cloud)?.value);
    }
    let hi = norms.iter().copied().fold(0.0, f64::max);
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((hi / lo <= 20.0, format!("||S_z||_2 in [{lo:.4}, {hi:.4}] over 1e-4..1e-1, ratio {:.3}", hi / lo)))
}

/// Largest calibrated `beta` over the systems.
fn system_beta(systems: &[DyadicSystem]) -> f64 {
    systems.iter().filter_map(|s| s.beta).fold(0.0, f64::max)
}

fn bmo_equivalence(seed: u64, shared: &mut Shared) -> Verdict {
    let d = Domain::ball(1);
    let systems = shared.disk_systems(seed)?;
    let beta = system_beta(systems);
    let centers = stratified_centers(&d, 1e-3, 0.5, 20, derive_seed(seed, 0x501));
    let mut dyadic = Vec::new();
    let mut berezin = Vec::new();
    for sym in Symbol::bmo_family() {
        dyadic.push(bmo_dyadic(systems, &sym, 2.0, TENT_MEMBER_CAP)?.sup());
        berezin.push(bmo_berezin(&d, &sym, 2.0, &centers, 400, derive_seed(seed, 0x503))?.sup());
    }
    // The criterion is decided at r = 3 beta; beta and 6 beta are reported.
    let mut passed = false;
    let mut parts = Vec::new();
    for factor in [3.0, 1.0, 6.0] {
        let r = factor * beta;
        let mut rows = Vec::new();
        for (i, sym) in Symbol::bmo_family().iter().enumerate() {
            let k = bmo_kobayashi(&d, sym, r, 2.0, &centers, 1024, derive_seed(seed, 0x502))?.sup();
            rows.push([k, dyadic[i], berezin[i]]);
        }
        let c = equivalence_constant(&rows);
        let finite = rows.iter().flatten().all(|v| v.is_finite() && *v > 0.0);
        if factor == 3.0 {
            passed = finite && c <= 50.0;
        }
        parts.push(format!("r = {factor} beta = {r:.3}: C* = {c:.3}"));
    }
    Ok((passed, parts.join("; ")))
}

fn vmo_agreement(seed: u64, shared: &mut Shared) -> Verdict {
    let d = Domain::ball(1);
    let t = 1e-3;
    let thresholds = [0.5, 1e-1, 1e-2, t];
    let centers = stratified_centers(&d, 1e-4, 0.5, 10, derive_seed(seed, 0x601));
    let systems = shared.disk_systems(seed)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (sym, expect) in [(Symbol::CompactSupport { radius: 0.5 }, true), (Symbol::LogDelta, false)] {
        let curves: [(&str, OscCurve); 3] = [
            ("kobayashi", bmo_kobayashi(&d, &sym, 1.0, 2.0, &centers, 1024, derive_seed(seed, 0x602))?),
            ("dyadic", bmo_dyadic(systems, &sym, 2.0, TENT_MEMBER_CAP)?),
            ("berezin", bmo_berezin(&d, &sym, 2.0, &centers, 400, derive_seed(seed, 0x603))?),
        ];
        for (name, curve) in &curves {
            let prof = curve.profile(&thresholds);
            let vmo = prof.is_vmo(t);
            ok &= vmo == expect;
            parts.push(format!("{} {name}: {:.3}/{:.3} {}", sym.id(), prof.at(t), prof.bulk, if vmo { "VMO" } else { "not VMO" }));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn commutator_vs_bmo(seed: u64) -> Verdict {
    let d = Domain::ball(1);
    let cloud = nystrom_cloud(&d, 4000, NYSTROM_DELTA_MIN, derive_seed(seed, 0x701));
    let disc = discretize_projection(&d, &cloud, ProjectorMode::Nystrom, None)?;
    let centers = stratified_centers(&d, 1e-3, 0.5, 20, derive_seed(seed, 0x702));
    let opts = PowerOptions { seed: derive_seed(seed, 0x703), ..PowerOptions::default() };
    let pair = |sym: &Symbol| -> Result<(f64, f64)> {
        let norm = commutator_norm_l2(&disc, &disc.values(sym), &opts)?.value;
        let bmo = bmo_kobayashi(&d, sym, 1.0, 2.0, &centers, 1024, derive_seed(seed, 0x704))?.sup();
        Ok((norm, bmo))
    };
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for sym in Symbol::bmo_family() {
        let (norm, bmo) = pair(&sym)?;
        lo = lo.min(norm / bmo);
        hi = hi.max(norm / bmo);
    }
    let band = hi.max(1.0 / lo);
    let floors = [0.2, 0.1, 0.05, 0.02];
    let mut x = Vec::new();
    let mut norms = Vec::new();
    let mut bmos = Vec::new();
    for floor in floors {
        let (norm, bmo) = pair(&Symbol::DeltaPower { alpha: 0.3, floor })?;
        x.push((1.0 / floor).ln());
        norms.push(norm.ln());
        bmos.push(bmo.ln());
    }
    let (sn, sb) = (fit_line(&x, &norms).slope, fit_line(&x, &bmos).slope);
    let ok = band <= 50.0 && sn > 0.0 && sb > 0.0 && (sn - sb).abs() <= 0.1;
    Ok((ok, format!("band C = {band:.3} (ratios {lo:.3}..{hi:.3}); capped delta^-0.3 slopes norm {sn:.3}, bmo {sb:.3}")))
}

fn compactness_dichotomy(seed: u64) -> Verdict {
    let d = Domain::ball(1);
    let curve = |sym: &Symbol| peaking_commutator_curve(&d, sym, &PEAKING_DELTAS, 800, derive_seed(seed, 0x801));
    let compact = curve(&Symbol::CompactSupport { radius: 0.5 })?;
    let log = curve(&Symbol::LogDelta)?;
    let c_ratio = compact.last().expect("nonempty").1 / compact[0].1;
    let l_ratio = log.iter().map(|x| x.1).fold(f64::INFINITY, f64::min) / log[0].1;
    let ok = c_ratio < 0.1 && l_ratio >= 0.5;
    Ok((ok, format!("compact_support at 1e-3: {:.1}% of bulk; log_delta minimum {:.1}% of bulk", 100.0 * c_ratio, 100.0 * l_ratio)))
}

fn cf_reproduction(seed: u64) -> Verdict {
    let d = Domain::ball(2);
    let mut cf = CfKernel::new(&d, 0.05);
    let centers = [CPoint::zeros(2), CPoint::from_real_pairs(2, &[0.3, 0.1, -0.2, 0.0]), CPoint::from_real_pairs(2, &[0.0, -0.4, 0.2, 0.2])];
    cf.calibrate(&sample_plain(&d, 20_000, derive_seed(seed, 0x901)), &centers)?;
    let val = sample_plain(&d, 20_000, derive_seed(seed, 0x902));
    let z = CPoint::from_real_pairs(2, &[0.25, -0.1, 0.15, 0.3]);
    let mut ok = true;
    let mut parts = vec![format!("kappa {:.6}", cf.kappa)];
    for (name, f) in cf_monomials(2) {
        let vals: Vec<C64> = val.points.iter().map(f).collect();
        let e = cf.apply_at(&val, &vals, &z)?;
        let z_score = (e.value - f(&z)).norm() / e.se;
        ok &= z_score < 3.0;
        parts.push(format!("{name}: {z_score:.2} SE"));
    }
    Ok((ok, parts.join(", ")))
}

/// Round-off comparison.
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn exactness_floor(seed: u64) -> Verdict {
    let mut failed: Vec<&str> = Vec::new();
    let mut total = 0;
    let mut check = |name: &'static str, ok: bool| {
        total += 1;
        if !ok {
            failed.push(name);
        }
    };
    let b2 = Domain::ball(2);
    let disk = Domain::ball(1);
    let origin = CPoint::zeros(2);

    // Defining function and projection.
    let jet = b2.jet(&origin);
    check("ball rho(0) = -1", jet.rho == -1.0 && jet.grad.norm() == 0.0);
    check("ball Levi matrix = I", (0..2).all(|j| (0..2).all(|k| jet.levi.a[j][k] == c64(if j == k { 1.0 } else { 0.0 }, 0.0))));
    check("ball holomorphic Hessian = 0", (0..2).all(|j| (0..2).all(|k| jet.hol.a[j][k] == c64(0.0, 0.0))));
    let ell = Domain::new(DomainSpec::Ellipsoid { n: 2, weights: vec![1.0, 4.0] })?;
    check("ellipsoid rho", close(ell.rho(&CPoint::from_real(&[0.5, 0.3])), -0.39));
    let pr = b2.project(&CPoint::from_real(&[0.5, 0.0]));
    check("radial projection", pr.point == CPoint::from_real(&[1.0, 0.0]) && close(pr.delta, 0.5));
    let pr0 = b2.project(&origin);
    check("projection of the origin", close(pr0.point.norm(), 1.0) && close(pr0.delta, 1.0));
    let e1 = CPoint::from_real(&[1.0, 0.0]);
    let tangential = b2.levi_form(&e1, &CPoint::from_real(&[0.0, 1.0]))?;
    check("Levi form on a tangent vector", close(tangential.value, 1.0));
    let normal = b2.levi_form(&e1, &CPoint::new(&[c64(0.0, 1.0), c64(0.0, 0.0)]))?;
    check("Levi form on the normal", close(normal.value, 0.0) && normal.horizontal.norm() <= 1e-15);

    // Quasi-distances and metrics.
    check("d_B(zeta, zeta) = 0", boundary_quasidist(&b2, &e1, &e1)? == 0.0);
    check("d_B example", close(boundary_quasidist(&b2, &e1, &CPoint::from_real(&[0.0, 1.0]))?, 3f64.sqrt()));
    check("F(0, 0) = 2", close(big_f(&b2, &origin, &origin), 2.0));
    check("F example", close(big_f(&b2, &origin, &CPoint::from_real(&[0.5, 0.0])), 2.0));
    check("g(0, 0) = 1", levi_g(&b2, &origin, &origin, GVariant::Exact) == c64(1.0, 0.0));
    check("g example", close((levi_g(&b2, &CPoint::from_real(&[0.5, 0.0]), &origin, GVariant::Exact) - c64(1.0, 0.0)).norm(), 0.0));
    let z = CPoint::from_real(&[0.3, -0.2]);
    let w = CPoint::from_real_pairs(2, &[0.1, 0.4, -0.5, 0.2]);
    check("k(z, z) = 0", kobayashi_proxy(&b2, &z, &z) == 0.0);
    check("d_K(0, 0.5 e1)", close(kobayashi_exact_ball(&b2, &origin, &CPoint::from_real(&[0.5, 0.0]))?, 0.5f64.atanh()));
    check("d_K symmetric", kobayashi_exact_ball(&b2, &z, &w)? == kobayashi_exact_ball(&b2, &w, &z)? && kobayashi_exact_ball(&b2, &z, &z)? == 0.0);

    // Dyadic grids.
    let g = build_grid(&disk, GridConfig::new(2.0, 0.7, 4, 3), SampleSpec::Uniform { count: 20_000, seed: derive_seed(seed, 0xa01) })?;
    check("grid exact audit", g.exact_audit() == (0, 0, 0));
    let coarse = build_grid(&b2, GridConfig::new(2.0, 3.0, 1, 4), SampleSpec::Uniform { count: 2000, seed: derive_seed(seed, 0xa02) })?;
    check("coarse net is a point", coarse.levels[0].points.len() == 1);
    let sys = DyadicSystem::new(g.clone());
    let mut bytes = Vec::new();
    write_grid(&g, Some(&GridCalibration::measure(&sys)), &mut bytes)?;
    let (back, _) = read_grid(bytes.as_slice())?;
    let mut again = Vec::new();
    write_grid(&back, Some(&GridCalibration::measure(&DyadicSystem::new(back.clone()))), &mut again)?;
    check("grid file round trip", bytes == again);
    let center_ok = sys.kubes().all(|(k, j)| {
        sys.is_empty_kube(k, j) || sys.locate(&sys.center(k, j)).kube == dyadlab::dyadic::Kube::Cell { level: k as u32, index: j as u32 }
    });
    check("centers lie in their kubes", center_ok);
    check("deep interior is the root slab", sys.locate(&CPoint::zeros(1)).kube == dyadlab::dyadic::Kube::Root);

    // Berezin and oscillation on constants.
    let s0 = PeakingKernel::new(&b2, &origin, 2.0)?;
    check("S_{0,2} = 1", [z, w].iter().all(|p| s0.eval(&b2, p).is_ok_and(|v| close(v, 1.0))));
    let three = Symbol::Constant { value: 3.0 };
    let zc = CPoint::from_real(&[0.9]);
    let cloud = sample_local(&disk, &zc, 400, derive_seed(seed, 0xa03));
    check("modified Berezin of 3", close(modified_berezin(&disk, &three, &zc, &cloud)?.value.re, 3.0));
    let centers = stratified_centers(&disk, 1e-3, 1e-1, 4, derive_seed(seed, 0xa04));
    check("Kobayashi BMO of a constant", bmo_kobayashi(&disk, &three, 1.0, 2.0, &centers, 256, 1)?.sup() <= 1e-12);
    check("Berezin BMO of a constant", bmo_berezin(&disk, &three, 2.0, &centers, 400, 2)?.sup() <= 1e-12);
    check("dyadic BMO of a constant", bmo_dyadic(std::slice::from_ref(&sys), &three, 2.0, 64)?.sup() <= 1e-12);

    // Bergman kernel and commutators.
    check("K(0, 0) = 1/pi", close(bergman_kernel_ball(&CPoint::zeros(1), &CPoint::zeros(1)).re, std::f64::consts::FRAC_1_PI));
    check("K Hermitian", bergman_kernel_ball(&z, &w) == bergman_kernel_ball(&w, &z).conj());
    let disc = discretize_projection(&disk, &nystrom_cloud(&disk, 600, 0.05, derive_seed(seed, 0xa05)), ProjectorMode::Nystrom, None)?;
    let f: Vec<C64> = disc.points().iter().map(|p| p[0].conj() + 0.5).collect();
    let cst = vec![c64(2.0, -1.0); disc.len()];
    let scale = disc.project(&f).iter().map(|v| v.norm()).fold(1.0, f64::max);
    check("[c, P] f = 0", commutator_apply(&disc, &cst, &f).iter().all(|v| v.norm() <= 1e-12 * scale));
    let opts = PowerOptions::default();
    let b = disc.values(&Symbol::LogDelta);
    let n1 = commutator_norm_l2(&disc, &b, &opts)?.value;
    let lam = c64(-1.5, 2.0);
    let scaled: Vec<C64> = b.iter().map(|v| v * lam).collect();
    let n2 = commutator_norm_l2(&disc, &scaled, &opts)?.value;
    check("norm homogeneity", (n2 - lam.norm() * n1).abs() <= 1e-6 * n2);
    let zero = vec![c64(0.0, 0.0); disc.len()];
    let rep = compactness_diagnostic(&disc, &zero, &[0.1, 0.01], &opts)?;
    check("zero symbol has zero tail", rep.bulk == 0.0 && rep.tail.iter().all(|t| t.1 == 0.0));

    // Runner: empty config and deterministic re-run.
    let tmp = std::env::temp_dir().join(format!("dyadlab-exactness-{}-{seed}", std::process::id()));
    let empty = crate::run::run(&ExperimentConfig::default(), &tmp.join("empty"))?;
    check("empty config writes only a manifest", empty.outputs.is_empty() && std::fs::read_dir(tmp.join("empty"))?.count() == 1);
    let cfg = determinism_config(seed);
    crate::run::run(&cfg, &tmp.join("a"))?;
    crate::run::run(&cfg, &tmp.join("b"))?;
    check("byte-identical re-run", same_tree(&tmp.join("a"), &tmp.join("b"))?);
    let _ = std::fs::remove_dir_all(&tmp);

    let ok = failed.is_empty();
    let detail = if ok { format!("{total} exact checks, re-run byte-identical") } else { format!("{} of {total} failed: {}", failed.len(), failed.join("; ")) };
    Ok((ok, detail))
}

/// Small config touching grids, oscillation and the commutator.
pub fn determinism_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        grid: GridSpec { s: 2.0, delta_cal: 0.7, levels: 3, adjacent: 2, sample_count: 20_000, file: None },
        cloud: crate::config::CloudSpec { points: 600, delta_min: 1e-2, delta_max: 0.5, per_scale: 200, ball_points: 256, centers_per_decade: 4 },
        symbols: vec![Symbol::LogDelta, Symbol::Constant { value: 2.0 }],
        experiments: vec![
            Experiment::GridAudit,
            Experiment::Bmo { r: 1.0, p: 2.0 },
            Experiment::Commutator { p: 2.0 },
        ],
        seed,
        ..ExperimentConfig::default()
    }
}

fn same_tree(a: &std::path::Path, b: &std::path::Path) -> Result<bool> {
    let mut names: Vec<_> = std::fs::read_dir(a)?.map(|e| e.map(|e| e.file_name())).collect::<std::io::Result<_>>()?;
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b)?.map(|e| e.map(|e| e.file_name())).collect::<std::io::Result<_>>()?;
    other.sort();
    if names != other {
        return Ok(false);
    }
    for n in names {
        if std::fs::read(a.join(&n))? != std::fs::read(b.join(&n))? {
            return Ok(false);
        }
    }
    Ok(true)
}
