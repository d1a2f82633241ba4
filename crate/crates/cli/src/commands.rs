//! The five batch commands behind the `axbq` binary.
//!
//! Every command prints a human-readable report to stdout, writes any
//! artifacts it promises (CSV, snapshots, verdicts), and returns one of the
//! contract exit codes: [`EXIT_OK`] when every gated quantity passes,
//! [`EXIT_CHECK_FAILED`] when a numerical verdict fails, [`EXIT_CONFIG`]
//! for usage or parameter errors, and [`EXIT_NUMERICAL`] when a computation
//! aborts (NaN, CFL, diverging solve).

use crate::config::RunConfig;
use crate::snapshot::{Snapshot, SnapshotError};
use crate::{EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
use axbq::diagnostics;
use axbq::harmonic::{self, BoxSpec, HarmonicError, RingProfile};
use axbq::lp::{self, BlockDirection, DyadicBank, Inequality, LpError};
use axbq::oracle::ManufacturedSolution;
use axbq::solver::{self, Observer, Scheme, SimState, SolverError};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Writes `snap_{step:06}.bin` at a fixed step cadence. The observer
/// interface cannot carry errors, so the first failure is parked and
/// reported after the run.
struct SnapshotSink {
    dir: PathBuf,
    every: usize,
    failure: Option<(usize, SnapshotError)>,
}

impl SnapshotSink {
    fn new(dir: PathBuf, every: usize) -> SnapshotSink {
        SnapshotSink {
            dir,
            every,
            failure: None,
        }
    }
}

impl Observer for SnapshotSink {
    fn observe(&mut self, state: &SimState, step: usize) {
        if self.every == 0 || step % self.every != 0 || self.failure.is_some() {
            return;
        }
        let path = self.dir.join(format!("snap_{step:06}.bin"));
        if let Err(e) = Snapshot::from_state(state).write(&path) {
            self.failure = Some((step, e));
        }
    }
}

/// Run a simulation from a config file; write diagnostics.csv, snapshots,
/// and verdicts.txt; exit 0 iff every enabled check passes.
pub fn cmd_simulate(config_path: &Path) -> i32 {
    let cfg = match RunConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (grid, initial, step_cfg) = match cfg.build() {
        Ok(built) => built,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("cannot create output dir {}: {e}", cfg.out_dir.display());
        return EXIT_CONFIG;
    }

    println!(
        "simulate: {}x{} grid (R = {}, Lz = {}), dt = {}, t_end = {}, scheme {:?}",
        grid.nr(),
        grid.nz(),
        grid.r_extent(),
        grid.z_period(),
        step_cfg.dt,
        cfg.t_end,
        step_cfg.scheme,
    );

    let started = Instant::now();
    let mut sink = SnapshotSink::new(cfg.out_dir.clone(), cfg.snapshot_every);
    let mut observers: [&mut dyn Observer; 1] = [&mut sink];
    let outcome = match solver::run(&initial, &step_cfg, cfg.t_end, &mut observers) {
        Ok(outcome) => outcome,
        Err(err) => {
            let abort = cfg.out_dir.join("abort.bin");
            match Snapshot::from_state(&err.last_good).write(&abort) {
                Ok(()) => eprintln!("run aborted: {err}; last good state in {}", abort.display()),
                Err(io) => eprintln!("run aborted: {err}; post-mortem snapshot failed: {io}"),
            }
            return match err.source {
                SolverError::BadConfig(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            };
        }
    };
    if let Some((step, e)) = sink.failure {
        eprintln!("snapshot at step {step} failed: {e}");
        return EXIT_CONFIG;
    }

    let csv_path = cfg.out_dir.join("diagnostics.csv");
    if let Err(e) = std::fs::write(&csv_path, outcome.record.to_csv()) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return EXIT_CONFIG;
    }
    if cfg.snapshot_every > 0 {
        let final_path = cfg.out_dir.join("final.bin");
        if let Err(e) = Snapshot::from_state(&outcome.state).write(&final_path) {
            eprintln!("cannot write {}: {e}", final_path.display());
            return EXIT_CONFIG;
        }
    }
    println!(
        "run finished: t = {:.6}, {} diagnostic rows, wall {:.1} s",
        outcome.state.t(),
        outcome.record.len(),
        started.elapsed().as_secs_f64(),
    );

    if !cfg.checks.any() {
        println!("verification disabled (verify.checks = none)");
        return EXIT_OK;
    }
    if outcome.record.is_empty() {
        println!("no diagnostics rows (t_end equals initial time); nothing to verify");
        return EXIT_OK;
    }
    let reports = match diagnostics::all_checks(&outcome.record) {
        Ok(reports) => reports,
        Err(e) => {
            eprintln!("verification aborted: {e}");
            return EXIT_NUMERICAL;
        }
    };

    let mut verdicts = String::new();
    let mut all_pass = true;
    for report in reports.iter().filter(|r| cfg.checks.enables(r.name)) {
        let tol = report.tol * cfg.tolerance_scale;
        let pass = report.margin <= tol;
        all_pass &= pass;
        let line = format!(
            "{}: margin {:+.6e} (tol {:.1e}) {}",
            report.name,
            report.margin,
            tol,
            if pass { "PASS" } else { "FAIL" },
        );
        println!("{line}");
        verdicts.push_str(&line);
        verdicts.push('\n');
    }
    let verdict_path = cfg.out_dir.join("verdicts.txt");
    if let Err(e) = std::fs::write(&verdict_path, verdicts) {
        eprintln!("cannot write {}: {e}", verdict_path.display());
        return EXIT_CONFIG;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    MomentFree,
    Gaussian,
}

impl ProfileKind {
    fn ring(self, sigma: f64) -> RingProfile {
        match self {
            ProfileKind::MomentFree => RingProfile::MomentFree { sigma },
            ProfileKind::Gaussian => RingProfile::Gaussian { sigma },
        }
    }

    fn label(self) -> &'static str {
        match self {
            ProfileKind::MomentFree => "moment-free",
            ProfileKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdentityArgs {
    pub n: usize,
    pub box_size: f64,
    pub sigma: f64,
    /// Radial nodes of the meridian solve; defaults to 32·n, which keeps the
    /// interpolation error below the box-route error at every tested n.
    pub meridian_nr: Option<usize>,
    pub tol: f64,
    pub profile: ProfileKind,
}

impl Default for IdentityArgs {
    fn default() -> IdentityArgs {
        IdentityArgs {
            n: 128,
            box_size: 16.0,
            sigma: 1.2,
            meridian_nr: None,
            tol: 1e-5,
            profile: ProfileKind::MomentFree,
        }
    }
}

/// Cross-check u^r/r between the periodic-box identity route and the
/// meridian streamfunction route; exit 0 iff the relative L² gap is within
/// tolerance.
pub fn cmd_verify_identity(args: &IdentityArgs) -> i32 {
    let nr = args.meridian_nr.unwrap_or(32 * args.n);
    println!(
        "identity cross-check: profile = {}, n = {}, side = {}, meridian nr = {}, sigma = {}",
        args.profile.label(),
        args.n,
        args.box_size,
        nr,
        args.sigma,
    );
    let started = Instant::now();
    let check = match harmonic::identity_meridian_cross_check(
        args.profile.ring(args.sigma),
        args.n,
        args.box_size,
        nr,
    ) {
        Ok(check) => check,
        Err(
            e @ (HarmonicError::BadModes(_)
            | HarmonicError::BadSide(_)
            | HarmonicError::BadRingWidth(_)),
        ) => {
            eprintln!("invalid parameters: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("cross-check aborted: {e}");
            return EXIT_NUMERICAL;
        }
    };

    println!(
        "  routes gap (rel L2):     {:.4e}   (tol {:.1e})",
        check.rel_l2_error, args.tol,
    );
    if let Some(v) = check.box_vs_exact {
        println!("  box vs closed form:      {v:.4e}");
    }
    if let Some(v) = check.meridian_vs_exact {
        println!("  meridian vs closed form: {v:.4e}");
    }
    println!("  boundary max |omega/r|:  {:.4e}", check.boundary_max);
    println!("  mean adjustment:         {:.4e}", check.mean_adjustment);
    println!("  wall time:               {:.1} s", started.elapsed().as_secs_f64());

    if !check.rel_l2_error.is_finite() {
        eprintln!("routes gap is not finite");
        return EXIT_NUMERICAL;
    }
    if check.rel_l2_error <= args.tol {
        println!("PASS");
        EXIT_OK
    } else {
        println!("FAIL");
        EXIT_CHECK_FAILED
    }
}

/// The five block-space inequality families sampled by `verify-inequalities`;
/// the parameter choices sit strictly inside each admissible range.
pub const LP_FAMILIES: [Inequality; 5] = [
    Inequality::TripleDirectional { q: 3.0 },
    Inequality::TripleMixed,
    Inequality::SupGradient,
    Inequality::SupSobolev { alpha: 0.75 },
    Inequality::Algebra { s: 1.5, t: 0.75 },
];

/// Empirical-constant drift between one resolution and its doubling,
/// relative to the larger constant. Two zero constants are perfectly
/// stable; a NaN anywhere poisons the drift, which fails the gate.
pub fn refinement_drift(coarse: f64, fine: f64) -> f64 {
    let scale = coarse.abs().max(fine.abs());
    if scale == 0.0 {
        0.0
    } else {
        (fine - coarse).abs() / scale
    }
}

/// Largest admissible [`refinement_drift`] for a family to count as stable.
pub const DRIFT_LIMIT: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct InequalityArgs {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// `all`, one lp family label, or `velocity`.
    pub which: String,
    pub out_dir: Option<PathBuf>,
}

impl Default for InequalityArgs {
    fn default() -> InequalityArgs {
        InequalityArgs {
            n: 32,
            samples: 50,
            seed: 7,
            which: "all".to_string(),
            out_dir: None,
        }
    }
}

struct FamilyVerdict {
    label: String,
    coarse: f64,
    fine: f64,
    stable: bool,
}

impl FamilyVerdict {
    fn from_ratios(label: &str, coarse: Option<f64>, fine: Option<f64>) -> FamilyVerdict {
        let coarse = coarse.unwrap_or(f64::NAN);
        let fine = fine.unwrap_or(f64::NAN);
        let drift = refinement_drift(coarse, fine);
        FamilyVerdict {
            label: label.to_string(),
            coarse,
            fine,
            stable: coarse.is_finite() && fine.is_finite() && drift <= DRIFT_LIMIT,
        }
    }

    fn print(&self, n: usize) {
        println!(
            "  {:<20} n={:<3} {:>11.4e}   n={:<3} {:>11.4e}   drift {:>5.1}%   {}",
            self.label,
            n,
            self.coarse,
            2 * n,
            self.fine,
            100.0 * refinement_drift(self.coarse, self.fine),
            if self.stable { "stable" } else { "UNSTABLE" },
        );
    }
}

fn lp_exit(e: &LpError) -> i32 {
    match e {
        LpError::BadParameter { .. }
        | LpError::BadIntegrability(_)
        | LpError::BadSummation(_)
        | LpError::BadLevel(_)
        | LpError::NeedsAnnulus(_)
        | LpError::BadTimeGrid => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn harmonic_exit(e: &HarmonicError) -> i32 {
    match e {
        HarmonicError::BadModes(_) | HarmonicError::BadSide(_) | HarmonicError::BadRingWidth(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_NUMERICAL,
    }
}

/// Sample every inequality harness at n and 2n and demand finite,
/// refinement-stable empirical constants; optionally export the per-sample
/// ratio CSVs. Exit 0 iff every selected family is finite and stable.
pub fn cmd_verify_inequalities(args: &InequalityArgs) -> i32 {
    let spec_pair = match (
        BoxSpec::new(args.n, TAU),
        BoxSpec::new(2 * args.n, TAU),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("invalid resolution: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.samples == 0 {
        eprintln!("samples must be at least 1");
        return EXIT_CONFIG;
    }
    let known_lp = LP_FAMILIES
        .iter()
        .any(|family| family.label() == args.which);
    if args.which != "all" && args.which != "velocity" && !known_lp {
        eprintln!(
            "unknown family `{}`; expected all, velocity, or one of: {}",
            args.which,
            LP_FAMILIES
                .map(|f| f.label())
                .join(", "),
        );
        return EXIT_CONFIG;
    }
    if let Some(dir) = &args.out_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("cannot create output dir {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
    }

    println!(
        "inequality harness: {} samples per family, seed {}, n = {} vs {}",
        args.samples,
        args.seed,
        args.n,
        2 * args.n,
    );
    let started = Instant::now();
    let banks = (
        DyadicBank::for_box(spec_pair.0),
        DyadicBank::for_box(spec_pair.1),
    );

    let mut verdicts: Vec<FamilyVerdict> = Vec::new();
    let mut lp_csv: Vec<String> = Vec::new();

    for family in LP_FAMILIES {
        if args.which != "all" && args.which != family.label() {
            continue;
        }
        let coarse = match lp::inequality_harness(&banks.0, family, args.samples, args.seed) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("{} harness failed: {e}", family.label());
                return lp_exit(&e);
            }
        };
        let fine = match lp::inequality_harness(&banks.1, family, args.samples, args.seed) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("{} harness failed: {e}", family.label());
                return lp_exit(&e);
            }
        };
        let mut verdict =
            FamilyVerdict::from_ratios(family.label(), coarse.max_ratio(), fine.max_ratio());
        verdict.stable &= coarse.all_finite() && fine.all_finite();
        verdict.print(args.n);
        verdicts.push(verdict);
        lp_csv.push(coarse.to_csv());
    }

    let mut velocity_csv: Option<String> = None;
    if args.which == "all" || args.which == "velocity" {
        let run = |spec: BoxSpec| harmonic::velocity_bound_harness(spec, args.samples, args.seed);
        let (coarse, fine) = match (run(spec_pair.0), run(spec_pair.1)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                eprintln!("velocity harness failed: {e}");
                return harmonic_exit(&e);
            }
        };
        type Pick = (&'static str, fn(&harmonic::VelocityBoundRow) -> f64);
        const PICKS: [Pick; 4] = [
            ("velocity-sup", |r| r.sup_ratio),
            ("velocity-dz", |r| r.dz_ratio),
            ("velocity-embedding", |r| r.embedding_ratio),
            ("velocity-radial", |r| r.radial_ratio),
        ];
        let finite = coarse.all_finite() && fine.all_finite();
        for (label, pick) in PICKS {
            let mut verdict =
                FamilyVerdict::from_ratios(label, coarse.max_of(pick), fine.max_of(pick));
            verdict.stable &= finite;
            verdict.print(args.n);
            verdicts.push(verdict);
        }
        velocity_csv = Some(coarse.to_csv());
    }

    if verdicts.is_empty() {
        eprintln!("family filter `{}` selected nothing", args.which);
        return EXIT_CONFIG;
    }
    if let Some(dir) = &args.out_dir {
        if !lp_csv.is_empty() {
            // One header, then each family's rows (every to_csv repeats it).
            let mut merged = String::new();
            for (i, csv) in lp_csv.iter().enumerate() {
                let skip = if i == 0 { 0 } else { 1 };
                for line in csv.lines().skip(skip) {
                    merged.push_str(line);
                    merged.push('\n');
                }
            }
            if let Err(e) = std::fs::write(dir.join("inequalities.csv"), merged) {
                eprintln!("cannot write inequalities.csv: {e}");
                return EXIT_CONFIG;
            }
        }
        if let Some(csv) = velocity_csv {
            if let Err(e) = std::fs::write(dir.join("velocity.csv"), csv) {
                eprintln!("cannot write velocity.csv: {e}");
                return EXIT_CONFIG;
            }
        }
        println!("ratio CSVs written to {}", dir.display());
    }
    println!("wall time: {:.1} s", started.elapsed().as_secs_f64());

    if verdicts.iter().all(|v| v.stable) {
        println!("all {} families finite and refinement-stable", verdicts.len());
        EXIT_OK
    } else {
        println!("unstable families present");
        EXIT_CHECK_FAILED
    }
}

#[derive(Debug, Clone)]
pub struct LpAnalyzeArgs {
    pub n: usize,
    pub seed: u64,
    /// Random fields for the interpolation sweep.
    pub fields: usize,
}

impl Default for LpAnalyzeArgs {
    fn default() -> LpAnalyzeArgs {
        LpAnalyzeArgs {
            n: 32,
            seed: 11,
            fields: 100,
        }
    }
}

struct LpCheckLine {
    name: &'static str,
    detail: String,
    pass: bool,
}

impl LpCheckLine {
    fn print(&self) {
        println!(
            "  {:<22} {}   {}",
            self.name,
            self.detail,
            if self.pass { "PASS" } else { "FAIL" },
        );
    }
}

/// Worst normalized |⟨Δ_j f, Δ_j' f⟩| over far pairs |j−j'| ≥ 2; the
/// multiplier supports are disjoint there, so anything above machine zero
/// means the masks leak.
fn far_block_overlap(bank: &DyadicBank, seed: u64, fields: usize) -> Result<f64, LpError> {
    let mut worst = 0.0f64;
    for i in 0..fields {
        let f = lp::random_smooth_field(*bank.spec(), seed.wrapping_add(i as u64)).to_spectral();
        let blocks: Vec<_> = (0..=bank.j_max())
            .map(|j| lp::dyadic_block(bank, &f, j, BlockDirection::Full))
            .collect::<Result<_, _>>()?;
        let norms: Vec<f64> = blocks.iter().map(|b| b.l2_norm()).collect();
        for j in 0..blocks.len() {
            for jp in (j + 2)..blocks.len() {
                if norms[j] == 0.0 || norms[jp] == 0.0 {
                    continue;
                }
                let dot: f64 = blocks[j]
                    .coeffs()
                    .iter()
                    .zip(blocks[jp].coeffs())
                    .map(|(a, b)| (a * b.conj()).re)
                    .sum();
                worst = worst.max(dot.abs() * bank.spec().side().powi(3) / (norms[j] * norms[jp]));
            }
        }
    }
    Ok(worst)
}

/// Audit the dyadic bank: partition of unity, far-block orthogonality,
/// Bernstein ratio bands, heat-decay rates, and the interpolation
/// inequality over many random fields. Exit 0 iff every line passes.
pub fn cmd_lp_analyze(args: &LpAnalyzeArgs) -> i32 {
    let spec = match BoxSpec::new(args.n, TAU) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("invalid resolution: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.fields == 0 {
        eprintln!("fields must be at least 1");
        return EXIT_CONFIG;
    }
    let bank = DyadicBank::for_box(spec);
    println!(
        "dyadic bank audit: n = {}, side = 2π, j_max = {}, seed = {}",
        args.n,
        bank.j_max(),
        args.seed,
    );
    let started = Instant::now();
    let mut lines: Vec<LpCheckLine> = Vec::new();

    let residual = bank.partition_residual();
    lines.push(LpCheckLine {
        name: "partition-of-unity",
        detail: format!("residual {residual:.3e} (tol 1e-12)"),
        pass: residual <= 1e-12,
    });

    match far_block_overlap(&bank, args.seed, 3) {
        Ok(overlap) => lines.push(LpCheckLine {
            name: "quasi-orthogonality",
            detail: format!("far-pair overlap {overlap:.3e} (tol 1e-12)"),
            pass: overlap <= 1e-12,
        }),
        Err(e) => {
            eprintln!("quasi-orthogonality check failed: {e}");
            return lp_exit(&e);
        }
    }

    let pairs = [(2.0, 2.0), (2.0, 4.0), (2.0, f64::INFINITY)];
    for j in [2, 3] {
        let report = match lp::check_bernstein(&bank, j, &pairs, 20, args.seed + j as u64) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("Bernstein check failed: {e}");
                return lp_exit(&e);
            }
        };
        let mut worst_forward = 0.0f64;
        let mut floor_forward = f64::INFINITY;
        let mut worst_reverse_log2 = 0.0f64;
        for row in &report.rows {
            worst_forward = worst_forward.max(row.forward_max);
            floor_forward = floor_forward.min(row.forward_min);
            for rev in [row.reverse_min, row.reverse_max] {
                worst_reverse_log2 = worst_reverse_log2.max(rev.log2().abs());
            }
        }
        let pass = report.skipped == 0
            && worst_forward <= 4.0
            && floor_forward > 1e-4
            && worst_reverse_log2 <= 2.0;
        lines.push(LpCheckLine {
            name: if j == 2 { "bernstein-j2" } else { "bernstein-j3" },
            detail: format!(
                "forward [{floor_forward:.2e}, {worst_forward:.2e}] (band (1e-4, 4]), \
                 reverse |log2| {worst_reverse_log2:.2} (band <= 2)"
            ),
            pass,
        });
    }

    for j in [2, 3] {
        let top = 0.15 / 4f64.powi(j);
        let t_grid: Vec<f64> = (0..=5).map(|k| k as f64 * top / 5.0).collect();
        let rate = match lp::check_heat_decay(&bank, j, &t_grid, args.seed) {
            Ok(rate) => rate,
            Err(e) => {
                eprintln!("heat-decay check failed: {e}");
                return lp_exit(&e);
            }
        };
        let lo = 4f64.powi(j) * 9.0 / 16.0;
        let hi = 4f64.powi(j) * 64.0 / 9.0;
        lines.push(LpCheckLine {
            name: if j == 2 { "heat-decay-j2" } else { "heat-decay-j3" },
            detail: format!("fitted rate {rate:.1} (band [{lo:.1}, {hi:.1}])"),
            pass: rate >= lo && rate <= hi,
        });
    }

    let interp = Inequality::Interpolation { theta: 0.5 };
    match lp::inequality_harness(&bank, interp, args.fields, args.seed) {
        Ok(report) => {
            let max = report.max_ratio().unwrap_or(f64::NAN);
            lines.push(LpCheckLine {
                name: "interpolation",
                detail: format!(
                    "max ratio {max:.12} over {} fields (tol 1 + 1e-8)",
                    args.fields,
                ),
                pass: report.all_finite() && max <= 1.0 + 1e-8,
            });
        }
        Err(e) => {
            eprintln!("interpolation harness failed: {e}");
            return lp_exit(&e);
        }
    }

    for line in &lines {
        line.print();
    }
    println!("wall time: {:.1} s", started.elapsed().as_secs_f64());
    if lines.iter().all(|l| l.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceArgs {
    pub study: String,
    pub resolutions: Vec<usize>,
    pub min_order: f64,
    pub scheme: Scheme,
}

impl Default for ConvergenceArgs {
    fn default() -> ConvergenceArgs {
        ConvergenceArgs {
            study: "mms".to_string(),
            resolutions: vec![32, 64, 128],
            min_order: 1.9,
            scheme: Scheme::Cnab2,
        }
    }
}

/// Run the manufactured-solution study across resolutions, fit the observed
/// order, and gate the finest pair at `min_order` for both fields.
pub fn cmd_convergence(args: &ConvergenceArgs) -> i32 {
    if args.study != "mms" {
        eprintln!("unknown study `{}`; the only study is `mms`", args.study);
        return EXIT_CONFIG;
    }
    if args.resolutions.len() < 2 {
        eprintln!("need at least two resolutions to fit an order");
        return EXIT_CONFIG;
    }
    println!(
        "mms convergence: resolutions {:?}, scheme {:?}, dt = 0.25 Δr, t_end = 0.1",
        args.resolutions, args.scheme,
    );
    let started = Instant::now();
    let mms = ManufacturedSolution::standard();
    let rows = match solver::mms_convergence_study(
        &mms,
        &args.resolutions,
        2.0,
        TAU,
        0.1,
        0.25,
        args.scheme,
    ) {
        Ok(rows) => rows,
        Err(SolverError::BadConfig(why)) => {
            eprintln!("bad study parameters: {why}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("study aborted: {e}");
            return EXIT_NUMERICAL;
        }
    };

    println!("  {:>5}  {:>10}  {:>12}  {:>12}", "n", "dt", "err(omega)", "err(rho)");
    for row in &rows {
        println!(
            "  {:>5}  {:>10.4e}  {:>12.4e}  {:>12.4e}",
            row.n, row.dt, row.err_omega, row.err_rho,
        );
    }
    let orders = solver::convergence_orders(&rows);
    for (pair, (o_omega, o_rho)) in rows.windows(2).zip(&orders) {
        println!(
            "  order {:>3} -> {:>3}: omega {:.2}, rho {:.2}",
            pair[0].n, pair[1].n, o_omega, o_rho,
        );
    }
    println!("wall time: {:.1} s", started.elapsed().as_secs_f64());

    let (o_omega, o_rho) = *orders.last().expect("two or more resolutions");
    if o_omega >= args.min_order && o_rho >= args.min_order {
        println!("observed order >= {} for both fields", args.min_order);
        EXIT_OK
    } else {
        println!(
            "observed order below {} (omega {:.2}, rho {:.2})",
            args.min_order, o_omega, o_rho,
        );
        EXIT_CHECK_FAILED
    }
}

/// Validate the worker-count cap from the BSQ_THREADS environment variable.
/// `Ok(None)` when unset; an invalid value is a usage error. Every kernel in
/// this build is single-threaded, so any positive cap is honored trivially,
/// but the contract still rejects nonsense values loudly.
pub fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("BSQ_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("BSQ_THREADS is not readable: {e}")),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(0) => Err("BSQ_THREADS must be at least 1".to_string()),
            Ok(cap) => Ok(Some(cap)),
            Err(_) => Err(format!("BSQ_THREADS must be a positive integer, got `{raw}`")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_is_symmetric_and_zero_safe() {
        assert_eq!(refinement_drift(0.0, 0.0), 0.0);
        assert!((refinement_drift(1.0, 1.2) - 0.2 / 1.2).abs() < 1e-15);
        assert_eq!(
            refinement_drift(1.0, 1.2),
            refinement_drift(1.2, 1.0)
        );
        assert!(refinement_drift(f64::NAN, 1.0).is_nan());
    }

    #[test]
    fn lp_family_labels_are_distinct() {
        let labels: Vec<&str> = LP_FAMILIES.iter().map(|f| f.label()).collect();
        let mut dedup = labels.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), labels.len());
    }

    #[test]
    fn thread_cap_parses_the_environment() {
        // Serial by construction: one test binary runs these in one process,
        // but env mutation is still guarded by running in a single test.
        std::env::remove_var("BSQ_THREADS");
        assert_eq!(thread_cap().unwrap(), None);
        std::env::set_var("BSQ_THREADS", "4");
        assert_eq!(thread_cap().unwrap(), Some(4));
        std::env::set_var("BSQ_THREADS", "0");
        assert!(thread_cap().is_err());
        std::env::set_var("BSQ_THREADS", "many");
        assert!(thread_cap().is_err());
        std::env::remove_var("BSQ_THREADS");
    }
}
