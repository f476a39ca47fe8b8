//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::Instant;

use canalbank_core::coeffs::{Block, CoefficientSet};
use canalbank_core::config::ModelConfig;
use canalbank_core::dataset::{split, synthesize_program};
use canalbank_core::hydro::{self, PlanarState};
use canalbank_core::identify::{self, build_matrices, perturbation_probe, RegressionProblem};
use canalbank_core::shapley::{self, ShapleyBlock};
use canalbank_core::sim::{self, Outcome, Side, SimConfig};
use nalgebra::DMatrix;

const DT: f64 = 0.05;
const SEED: u64 = 20240611;

struct Check {
    id: &'static str,
    ok: bool,
    detail: String,
}

fn cfg() -> ModelConfig {
    ModelConfig::dtc_canal()
}

fn program(truth: &CoefficientSet, noise: f64) -> RegressionProblem {
    let c = cfg();
    let ds = synthesize_program(&c.vessel, &c.canal, 0.0, truth, DT, noise, SEED).unwrap();
    build_matrices(&ds, &c.vessel, &c.canal, 0.0).unwrap()
}

fn oracle_identification() -> Check {
    let start = Instant::now();
    let truth = CoefficientSet::reference_dtc();
    let clean = identify::solve(&program(&truth, 0.0)).unwrap();
    let (worst, clean_err) = clean.coefficients.max_relative_error(&truth);

    let noisy = program(&truth, 0.02);
    let s = split(noisy.rows(), 0.8, SEED).unwrap();
    let (train, val) = (noisy.select_rows(&s.train), noisy.select_rows(&s.validation));
    let fit = identify::solve(&train).unwrap();
    // attribution only selects the coefficients to score and is timed under criterion 5
    let secs = start.elapsed().as_secs_f64();
    let report = shapley::attribute(&train, &val).unwrap();
    let mut noisy_worst = ("", 0.0f64);
    for b in &report.blocks {
        for (name, norm) in b.names.iter().zip(&b.normalized) {
            if *norm > 0.05 {
                let est = fit.coefficients.get(name).unwrap();
                let tru = truth.get(name).unwrap();
                // zero truth has no relative scale, so its error is absolute
                let err = if tru == 0.0 { (est - tru).abs() } else { (est - tru).abs() / tru.abs() };
                if err > noisy_worst.1 {
                    noisy_worst = (name.as_str(), err);
                }
            }
        }
    }
    Check {
        id: "1 oracle identification",
        ok: clean_err <= 1e-6 && noisy_worst.1 <= 0.05 && secs < 10.0,
        detail: format!(
            "noise-free max rel err {clean_err:.2e} ({worst}); 2% noise max rel err {:.3} ({}); {secs:.2} s",
            noisy_worst.1, noisy_worst.0
        ),
    }
}

fn rank_behaviour() -> Check {
    let id = identify::solve(&program(&CoefficientSet::reference_dtc(), 0.0)).unwrap();
    let rank = id.diagnostics.block(Block::X).rank;
    let pinned = id.coefficients.a[0] == 0.0 && id.warnings.iter().any(|w| w.pinned && w.columns == ["a_udot"]);
    Check {
        id: "2 rank behaviour",
        ok: rank == 2 && pinned,
        detail: format!("rank(theta_X) = {rank}, a_udot = {} (warning issued: {pinned})", id.coefficients.a[0]),
    }
}

fn constraints() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut violating = CoefficientSet::reference_dtc();
    violating.b[2] = -5.0;
    for (label, truth, noise) in [("reference", CoefficientSet::reference_dtc(), 0.02), ("b_v=-5", violating, 0.0)] {
        let p = program(&truth, noise);
        let c = identify::solve(&p).unwrap().coefficients;
        let equal = c.b[1].to_bits() == c.c[0].to_bits();
        let signs = c.sign_violations();
        let probe = perturbation_probe(&p, &c);
        ok &= equal && signs.is_empty() && probe.is_none();
        notes.push(format!("{label}: equality {equal}, sign violations {signs:?}, improving move {probe:?}"));
    }
    Check { id: "3 constraint satisfaction", ok, detail: notes.join("; ") }
}

fn delta_properties() -> Check {
    let c = cfg();
    let d = |y: f64, psi: f64| {
        let s = PlanarState { y, psi, u: 1.0, ..Default::default() };
        hydro::delta(&s, &c.vessel, &c.canal).unwrap()
    };
    let lim = c.canal.half_width() - 0.5 * c.vessel.beam;
    let grid: Vec<f64> = (0..100).map(|i| -0.99 * lim + 1.98 * lim * i as f64 / 99.0).collect();
    let odd = grid.iter().map(|&y| (d(y, 0.0) + d(-y, 0.0)).abs()).fold(0.0, f64::max);
    let centre = (0..50).map(|i| d(0.0, -1.5 + 3.0 * i as f64 / 49.0).abs()).fold(0.0, f64::max);
    let monotone = grid.windows(2).all(|w| d(w[1], 0.0) > d(w[0], 0.0));
    let psi = std::f64::consts::FRAC_PI_2 - 1e-3;
    let fade = [0.5, 1.0, 2.0, 3.0].iter().all(|&y| d(y, psi).abs() < 1e-2 * d(y, 0.0).abs());
    let near = lim - 1e-6 * (c.canal.width - c.vessel.beam) / 2.0;
    let blow = d(near, 0.0);
    Check {
        id: "4 delta properties",
        ok: odd <= 1e-12 && centre == 0.0 && monotone && fade && blow > 1e3,
        detail: format!(
            "max |d(y)+d(-y)| {odd:.1e}; max |d(0,psi)| {centre:.1e}; monotone {monotone}; fades at pi/2 {fade}; d near wall {blow:.3e}"
        ),
    }
}

fn with_duplicate(a: &DMatrix<f64>, col: usize) -> DMatrix<f64> {
    let n = a.ncols();
    let mut d = a.clone().insert_column(n, 0.0);
    let c = a.column(col).clone_owned();
    d.column_mut(n).copy_from(&c);
    d
}

fn shapley_axioms() -> Check {
    let start = Instant::now();
    let p = program(&CoefficientSet::reference_dtc(), 0.02);
    let s = split(p.rows(), 0.8, SEED).unwrap();
    let (train, val) = (p.select_rows(&s.train), p.select_rows(&s.validation));
    let report = shapley::attribute(&train, &val).unwrap();

    let mut eff = 0.0f64;
    let mut l1 = 0.0f64;
    for b in &report.blocks {
        let sum: f64 = b.phi.iter().sum();
        eff = eff.max((sum - b.grand_value).abs() / b.grand_value.abs());
        l1 = l1.max((b.normalized.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs());
    }
    let x = report.block(Block::X).unwrap();
    let dummy = x.phi[0].abs() <= 1e-12 * x.grand_value.abs();

    // b_v duplicated as an eighth player
    let mut names: Vec<String> = Block::Y.names().iter().map(|s| s.to_string()).collect();
    names.push("b_v'".into());
    let mut nonneg = Block::Y.nonneg().to_vec();
    nonneg.push(true);
    let twin = ShapleyBlock::new(
        names,
        nonneg,
        (with_duplicate(&train.theta_y, 2), train.y.clone()),
        (with_duplicate(&val.theta_y, 2), val.y.clone()),
    )
    .unwrap()
    .attribute(None)
    .unwrap();
    let sym = (twin.phi[2] - twin.phi[7]).abs() / twin.phi[2].abs();

    let b_bank = report.block(Block::Y).unwrap().normalized[6];
    let c_bank = report.block(Block::N).unwrap().normalized[6];
    let secs = start.elapsed().as_secs_f64();
    Check {
        id: "5 shapley axioms",
        ok: eff <= 1e-9 && dummy && sym <= 1e-6 && l1 <= 1e-12 && b_bank > 0.05 && c_bank > 0.05 && secs < 60.0,
        detail: format!(
            "efficiency rel err {eff:.1e}; dummy phi(a_udot) {:.1e}; duplicate rel diff {sym:.1e}; L1 dev {l1:.1e}; b_bank {b_bank:.3}, c_bank {c_bank:.3}; {secs:.2} s",
            x.phi[0]
        ),
    }
}

fn nondimensionality() -> Check {
    let c = cfg();
    let (b, k) = (3298.0, 3346.0);
    let mut worst = 0.0f64;
    for scale in [0.5, 2.0, 89.11] {
        for i in 0..21 {
            for psi in [-0.3, 0.0, 0.2] {
                let y = -3.0 + 6.0 * i as f64 / 20.0;
                let s = PlanarState { y, psi, u: 1.1, ..Default::default() };
                let small = hydro::bank_force(&s, s.u, b, k, &c.vessel, &c.canal).unwrap();
                let (v, cn, ss) = hydro::froude_scale(&c.vessel, &c.canal, &s, scale).unwrap();
                let big = hydro::bank_force(&ss, ss.u, b, k, &v, &cn).unwrap();
                if small.sway != 0.0 {
                    worst = worst.max((big.sway / (small.sway * scale.powi(3)) - 1.0).abs());
                    worst = worst.max((big.yaw / (small.yaw * scale.powi(4)) - 1.0).abs());
                }
            }
        }
    }
    Check { id: "6 nondimensionality", ok: worst <= 1e-10, detail: format!("max rel deviation {worst:.1e}") }
}

fn simulation() -> Check {
    let c = cfg();
    let coeffs = CoefficientSet::reference_dtc();
    let base = SimConfig::transit(&c.vessel, 0.0);

    let centre = sim::run(&base, &coeffs, &c.vessel, &c.canal).unwrap();
    let du = centre.trajectory.iter().map(|p| (p.state.u - 1.0).abs()).fold(0.0, f64::max);
    let a = du <= 1e-6;

    let y0s: Vec<f64> = (0..=48).map(|i| 0.1 + 0.05 * i as f64).collect();
    let pts = sim::sweep_grounding(&y0s, &base, &coeffs, &c.vessel, &c.canal);
    let grounded = pts.iter().filter(|p| p.grounding().is_some()).count();
    let b = grounded == pts.len();

    let mut c_ok = true;
    for w in pts.windows(2) {
        if let (Some((s0, x0, _)), Some((s1, x1, _))) = (w[0].grounding(), w[1].grounding()) {
            if s0 == s1 && x1 > x0 {
                c_ok = false;
            }
        }
    }
    let regimes: Vec<String> = pts
        .iter()
        .filter_map(|p| p.grounding().map(|g| g.0))
        .fold(Vec::<(Side, usize)>::new(), |mut acc, s| {
            match acc.last_mut() {
                Some((last, n)) if *last == s => *n += 1,
                _ => acc.push((s, 1)),
            }
            acc
        })
        .iter()
        .map(|(s, n)| format!("{}x{n}", s.as_str()))
        .collect();

    let flips = sim::side_flips(&pts);
    let d = flips.iter().any(|f| (0.9..=1.5).contains(f));

    let mirror = |y0: f64| {
        let cfg_ = SimConfig { t_max: 60.0, ..SimConfig::transit(&c.vessel, y0) };
        sim::run(&cfg_, &coeffs, &c.vessel, &c.canal).unwrap()
    };
    let (p, n) = (mirror(1.0), mirror(-1.0));
    let mut mdev = if p.trajectory.len() == n.trajectory.len() { 0.0f64 } else { f64::INFINITY };
    for (s, m) in p.trajectory.iter().zip(&n.trajectory) {
        let mm = m.state.mirrored();
        for (u, v) in
            [(s.state.x, mm.x), (s.state.y, mm.y), (s.state.psi, mm.psi), (s.state.v, mm.v), (s.state.r, mm.r)]
        {
            mdev = mdev.max((u - v).abs());
        }
    }
    let sides_mirror = matches!(
        (p.outcome, n.outcome),
        (Outcome::Grounded { side: s1, .. }, Outcome::Grounded { side: s2, .. }) if s1 != s2
    );
    let e = mdev <= 1e-9 && sides_mirror;

    Check {
        id: "7 simulation reproduction",
        ok: a && b && c_ok && d && e,
        detail: format!(
            "(a) max |u-1| {du:.1e} {}; (b) grounded {grounded}/{} {}; (c) x_ground monotone per regime [{}] {}; (d) flips at y_s(0) = {:?} m {}; (e) mirror dev {mdev:.1e} {}",
            tag(a), pts.len(), tag(b), regimes.join(", "), tag(c_ok),
            flips.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>(), tag(d), tag(e)
        ),
    }
}

fn integrator_order() -> Check {
    let c = cfg();
    let coeffs = CoefficientSet::reference_dtc();
    let end = |dt: f64| {
        let s = SimConfig { dt, t_max: 10.0, ..SimConfig::transit(&c.vessel, 0.05) };
        let r = sim::run(&s, &coeffs, &c.vessel, &c.canal).unwrap();
        r.trajectory.last().unwrap().state.y
    };
    let (y1, y2, y4) = (end(0.1), end(0.05), end(0.025));
    let ratio = (y1 - y2) / (y2 - y4);
    Check {
        id: "8 integrator order",
        ok: (ratio - 16.0).abs() <= 0.2 * 16.0,
        detail: format!("Richardson ratio {ratio:.3}"),
    }
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn main() {
    let checks = [
        oracle_identification(),
        rank_behaviour(),
        constraints(),
        delta_properties(),
        shapley_axioms(),
        nondimensionality(),
        simulation(),
        integrator_order(),
    ];
    for c in &checks {
        println!("{} criterion {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.id, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.ok).count();
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
