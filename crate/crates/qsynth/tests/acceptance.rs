//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a required criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use qsynth::fixtures::{self, Fixture};
use qsynth::formats::CircuitJson;
use qsynth::HighsBackend;
use qsynth_core::cuts::{CutFamily, CutSelection};
use qsynth_core::encoding::{
    decode_complex, encode_real, fidelity, j_matrix, overlap, trace_parts, ComplexMatrix, RealMatrix, C64,
};
use qsynth_core::fingerprint::EqualityMode;
use qsynth_core::formulation::{
    build_base, synthesize, ApproxParams, Engine, PhaseMode, SynthesisObjective, SynthesisProblem, SynthesisResult,
};
use qsynth_core::gates::{builtin_matrix, GateSet, GateSpec};
use qsynth_core::mip::{MipModel, Objective, ObjectiveSense, Sense, SolverBackend, Status, VarId};
use qsynth_core::oracle::{exhaustive_synthesize, OracleLimits, OracleObjective};
use qsynth_core::rho::{
    circuit_unitary, equivalence_fidelity, find_first_block, rolling_horizon_passes, OracleWindowSolver, RhoConfig,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    id: &'static str,
    pass: bool,
    required: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { id, pass, required: true, detail: detail.into() }
}

fn gate_set(f: &Fixture) -> GateSet {
    GateSet::new(f.qubits, &f.gates, EqualityMode::Exact).expect("fixture gate set")
}

fn problem(f: &Fixture, mode: PhaseMode) -> SynthesisProblem {
    SynthesisProblem::new(f.target.clone(), gate_set(f), f.p).with_phase_mode(mode)
}

fn milp(p: &SynthesisProblem) -> SynthesisResult {
    synthesize(p, Engine::Mip(&HighsBackend::default())).expect("synthesis runs")
}

fn optimum(r: &SynthesisResult) -> Option<f64> {
    (r.certificate.status == Status::Optimal).then_some(r.objective_value)
}

fn oracle_count(f: &Fixture, mode: EqualityMode) -> Option<f64> {
    let gs = gate_set(f);
    exhaustive_synthesize(&f.target, &gs, f.p, &OracleObjective::unit_count(&gs), mode, OracleLimits::default())
        .expect("oracle within budget")
        .map(|o| o.value)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn random_matrix(rng: &mut StdRng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Entrywise complex embedding written out independently of the library.
fn embed_by_hand(a: &ComplexMatrix) -> RealMatrix {
    let n = a.dim();
    RealMatrix::from_fn(2 * n, |r, s| {
        let z = a.get(r / 2, s / 2);
        match (r % 2, s % 2) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let cases = 240;
    for k in 0..cases {
        let dim = [2, 4, 8][k % 3];
        let a = random_matrix(&mut rng, dim);
        let b = random_matrix(&mut rng, dim);
        let ra = encode_real(&a).into_real();
        let rb = encode_real(&b).into_real();
        worst = worst.max(ra.max_abs_diff(&embed_by_hand(&a)));
        worst = worst.max(encode_real(&(&a * &b)).into_real().max_abs_diff(&ra.matmul(&rb)));
        worst = worst.max(encode_real(&a.adjoint()).into_real().max_abs_diff(&ra.transpose()));
        worst = worst.max(decode_complex(&ra).expect("decodes").max_abs_diff(&a));
        let tr = a.trace();
        let (re, im) = trace_parts(&encode_real(&a));
        worst = worst.max((re - tr.re).abs()).max((im - tr.im).abs());
        worst = worst.max((0.5 * ra.trace() - tr.re).abs());
        worst = worst.max((-0.5 * j_matrix(dim).matmul(&ra).trace() - tr.im).abs());
        if dim <= 4 {
            let d = a.det().norm_sqr();
            worst = worst.max((ra.det() - d).abs() / d.max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line("1 encoding algebra", worst <= 1e-10 && secs < 5.0, format!("{cases} matrices, max error {worst:.2e}, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let backend = HighsBackend::default();
    let mut worst = 0.0f64;
    let mut checks = 0;
    let bound = |m: &MipModel, v: VarId, sense| {
        let mut m = m.clone();
        m.set_objective(Objective { sense, linear: vec![(v, 1.0)], quadratic: vec![], constant: 0.0 });
        let s = backend.solve_model(&m).expect("solves");
        assert_eq!(s.status, Status::Optimal);
        s.values[v.0]
    };
    for z0 in [0.0, 1.0] {
        for x0 in [-1.0, -0.5, 0.0, 0.25, 1.0] {
            let mut m = MipModel::new();
            let z = m.add_binary("z");
            let x = m.add_continuous("x", -1.0, 1.0);
            let b = m.add_mccormick(z, x).expect("product");
            m.add_constraint(vec![(z, 1.0)], Sense::Eq, z0, "fix");
            m.add_constraint(vec![(x, 1.0)], Sense::Eq, x0, "fix");
            for sense in [ObjectiveSense::Minimize, ObjectiveSense::Maximize] {
                worst = worst.max((bound(&m, b, sense) - z0 * x0).abs());
                checks += 1;
            }
        }
    }
    for z1 in [0.0, 1.0] {
        for z2 in [0.0, 1.0] {
            let mut m = MipModel::new();
            let a = m.add_binary("a");
            let bb = m.add_binary("b");
            let y = m.add_mccormick_binary(a, bb).expect("product");
            let mut vals = vec![0.0; 3];
            vals[a.0] = z1;
            vals[bb.0] = z2;
            vals[y.0] = z1 * z2;
            let exact_ok = m.first_violation(&vals, 1e-12).is_none();
            vals[y.0] = 1.0 - z1 * z2;
            let wrong_rejected = m.first_violation(&vals, 1e-12).is_some();
            if !(exact_ok && wrong_rejected) {
                worst = f64::INFINITY;
            }
            checks += 1;
        }
    }
    line("2 McCormick exactness", worst <= 1e-12, format!("{checks} integral points, max deviation {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let corpus = fixtures::small_corpus();
    let mut mismatches = Vec::new();
    for f in &corpus {
        for (mode, eq) in [(PhaseMode::Exact, EqualityMode::Exact), (PhaseMode::GlobalPhase, EqualityMode::UpToPhase)] {
            let m = optimum(&milp(&problem(f, mode)));
            let o = oracle_count(f, eq);
            let same = match (m, o) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
                (None, None) => true,
                _ => false,
            };
            if !same {
                mismatches.push(format!("{}/{mode:?}: milp {m:?} oracle {o:?}", f.name));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "3 oracle equivalence",
        mismatches.is_empty() && secs < 600.0,
        format!("{} fixtures x 2 phase modes, {} mismatches {:?}, {secs:.1}s", corpus.len(), mismatches.len(), mismatches),
    )
}

fn criterion_4() -> Outcome {
    let corpus = fixtures::small_corpus();
    let mut bad = Vec::new();
    let (mut base_times, mut all_times) = (Vec::new(), Vec::new());
    for f in &corpus {
        let base = milp(&problem(f, PhaseMode::Exact).with_cuts(CutSelection::none()));
        base_times.push(base.stats.solve_seconds);
        let reference = optimum(&base);
        for mask in 1u32..32 {
            let fams: Vec<CutFamily> = CutFamily::ALL.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, f)| *f).collect();
            let r = milp(&problem(f, PhaseMode::Exact).with_cuts(CutSelection::from_families(&fams)));
            if mask == 31 {
                all_times.push(r.stats.solve_seconds);
            }
            let same = match (optimum(&r), reference) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
                (None, None) => r.certificate.status == base.certificate.status,
                _ => false,
            };
            if !same {
                bad.push(format!("{} {:?}", f.name, fams));
            }
        }
    }
    let (mb, ma) = (median(base_times), median(all_times));
    line(
        "4 cut soundness",
        bad.is_empty() && ma <= mb,
        format!("{} fixtures x 32 subsets, {} disagreements {:?}; median solve {:.4}s with all cuts vs {:.4}s without", corpus.len(), bad.len(), bad, ma, mb),
    )
}

fn criterion_5() -> Outcome {
    let gates = [
        GateSpec::builtin("RX", &[1], Some(PI / 2.0)).unwrap(),
        GateSpec::builtin("RZ", &[1], Some(PI / 2.0)).unwrap(),
    ];
    let gs = GateSet::new(1, &gates, EqualityMode::Exact).unwrap();
    let u = gs.product(&[1, 2, 1]);
    let target = u.scale(C64::from_polar(1.0, PI / 4.0));
    let base = SynthesisProblem::new(target.clone(), gs, 3);
    let gp = milp(&base.clone().with_phase_mode(PhaseMode::GlobalPhase));
    let ex = milp(&base.with_phase_mode(PhaseMode::Exact));
    let (r, s) = gp.global_phase.unwrap_or((f64::NAN, f64::NAN));
    let modulus = r * r + s * s;
    let realized = gp.realized_unitary.clone().unwrap_or_else(|| ComplexMatrix::identity(2));
    let rephased = realized.max_abs_diff(&target.scale(C64::new(r, s)));
    let pass = gp.certificate.status == Status::Optimal
        && (modulus - 1.0).abs() <= 1e-6
        && rephased <= 1e-6
        && ex.certificate.status == Status::Infeasible;
    line(
        "5 global-phase semantics",
        pass,
        format!("GP: {:?}, r^2+s^2 = {modulus:.9}, |U - (r+is)T| = {rephased:.1e}; exact: {:?}", gp.certificate.status, ex.certificate.status),
    )
}

fn same_value(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-6,
        (None, None) => true,
        _ => false,
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    let depth_of = |f: &Fixture| {
        let p = problem(f, PhaseMode::Exact).with_objective(SynthesisObjective::Depth);
        optimum(&milp(&p))
    };
    let oracle_depth = |f: &Fixture| {
        let gs = gate_set(f);
        exhaustive_synthesize(&f.target, &gs, f.p, &OracleObjective::Depth, EqualityMode::Exact, OracleLimits::default())
            .expect("oracle within budget")
            .map(|o| o.value)
    };
    for (f, k) in fixtures::depth_corpus() {
        let m = depth_of(&f);
        if !same_value(m, Some(k as f64)) {
            ok = false;
            notes.push(format!("{}: milp {m:?}, expected {k}", f.name));
        }
    }
    let mut compared = 0;
    for f in fixtures::small_corpus().iter().filter(|f| f.p <= 4) {
        let (m, o) = (depth_of(f), oracle_depth(f));
        compared += 1;
        if !same_value(m, o) {
            ok = false;
            notes.push(format!("{}: milp {m:?}, oracle {o:?}", f.name));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "6 depth optimization",
        ok && secs < 300.0,
        format!("{} certified instances, {compared} oracle comparisons, {secs:.1}s {notes:?}", fixtures::depth_corpus().len()),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut got = Vec::new();
    for (name, expected) in fixtures::WEAVE_FIDELITIES {
        let circuit = CircuitJson::from_specs(1, &fixtures::weave_listing(name).unwrap());
        let text = serde_json::to_string(&circuit).unwrap();
        let reloaded = CircuitJson::from_str(&text, "weave").unwrap();
        let target = builtin_matrix(name, None).unwrap().1;
        let report = qsynth::cli::verify_circuit(&reloaded, &target, &Default::default()).unwrap();
        let f = report.fidelity.unwrap_or(f64::NAN);
        got.push(format!("{name} {f:.6}"));
        worst = worst.max((f - expected).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    line("7 weave fidelities", worst <= 1e-6 && secs < 1.0, format!("{}; max deviation {worst:.1e}, {secs:.3}s", got.join(", ")))
}

/// Enumerates every weave sequence of length at most `p` and returns the best α.
fn brute_force_alpha(gates: &[ComplexMatrix], target: &ComplexMatrix, p: usize) -> f64 {
    let mut best = overlap(&ComplexMatrix::identity(2), target).re;
    let mut frontier = vec![ComplexMatrix::identity(2)];
    for _ in 0..p {
        let mut next = Vec::new();
        for u in &frontier {
            for g in gates {
                let v = u * g;
                best = best.max(overlap(&v, target).re);
                next.push(v);
            }
        }
        frontier = next;
    }
    best
}

fn criterion_8() -> Outcome {
    let weaves = qsynth_core::gates::fibonacci_weaves();
    let mats: Vec<ComplexMatrix> = weaves.iter().map(|w| w.base_matrix.clone()).collect();
    let gs = GateSet::new(1, &weaves, EqualityMode::Exact).unwrap();
    let tol = 1e-8;
    let mut failures = Vec::new();
    let mut checked = 0;
    for name in ["H", "X", "T"] {
        let target = builtin_matrix(name, None).unwrap().1;
        for p in 1..=5 {
            let base = SynthesisProblem::new(target.clone(), gs.clone(), p);
            let lin = milp(&base.clone().with_objective(SynthesisObjective::LinearizedFidelity));
            let brute = brute_force_alpha(&mats, &target, p);
            if (lin.objective_value - brute).abs() > tol {
                failures.push(format!("(a) {name} P={p}: milp {} brute {brute}", lin.objective_value));
            }
            let mut oa = base.clone().with_objective(SynthesisObjective::FrobeniusOa);
            oa.approx = ApproxParams { epsilon: 1.0, k: 5 };
            let oa = milp(&oa);
            for (is_oa, r) in [(false, &lin), (true, &oa)] {
                if !r.has_solution() {
                    continue;
                }
                checked += 1;
                let u = circuit_unitary(&r.sequence, 1).unwrap();
                let diff = encode_real(&u).into_real().sub(encode_real(&target).as_real());
                let fro = diff.frobenius_norm_sq();
                let alpha = overlap(&u, &target).re;
                let f = fidelity(&u, &target).unwrap();
                if is_oa && r.objective_value > fro + tol {
                    failures.push(format!("(b) {name} P={p}: objective {} above {fro}", r.objective_value));
                }
                if f + tol < (1.0 - fro / 8.0).powi(2) {
                    failures.push(format!("(c) {name} P={p}: F {f} below bound"));
                }
                if (fro - 8.0 * (1.0 - alpha)).abs() > tol {
                    failures.push(format!("(d) {name} P={p}: {fro} vs {}", 8.0 * (1.0 - alpha)));
                }
            }
        }
    }
    line("8 approximate objectives", failures.is_empty(), format!("3 targets x P=1..5, {checked} returned points {failures:?}"))
}

fn criterion_9() -> Vec<Outcome> {
    let run = |seed: &[GateSpec], passes: usize| {
        let mut cfg = RhoConfig::new(10, 5, 4, fixtures::rho_templates());
        cfg.passes = passes;
        let mut solver = OracleWindowSolver::default();
        let out = rolling_horizon_passes(seed, &cfg, &mut solver).expect("rho runs");
        let f = equivalence_fidelity(seed, &out.gates).expect("same register");
        (out, f)
    };
    let start = Instant::now();
    let k5 = fixtures::k5_seed();
    let (out5, f5) = run(&k5, 2);
    let counts = &out5.pass_counts;
    let after1 = counts.first().copied().unwrap_or(k5.len());
    let after2 = counts.get(1).copied().unwrap_or(after1);
    let secs5 = start.elapsed().as_secs_f64();
    let k4 = fixtures::k4_seed();
    let (out4, f4) = run(&k4, 3);
    let window_model = {
        let gs = qsynth_core::rho::instantiate_gate_set(&fixtures::rho_templates(), 4, EqualityMode::UpToPhase).unwrap();
        let p = SynthesisProblem::new(ComplexMatrix::identity(16), gs, 10);
        build_base(&p).map(|(m, _)| m.num_vars()).unwrap_or(0)
    };
    vec![
        Outcome {
            id: "9 rho K5 savings",
            pass: (f5 - 1.0).abs() <= 1e-9 && after1 <= 36 && after2 <= 32,
            required: false,
            detail: format!(
                "50 -> {after1} -> {after2} gates (targets <= 36, <= 32), fidelity {f5:.12}, {secs5:.1}s; \
                 a 4-qubit P=10 window MILP has {window_model} variables, so the degraded form applies"
            ),
        },
        line(
            "9 rho K4 degraded",
            (f4 - 1.0).abs() <= 1e-9 && (f5 - 1.0).abs() <= 1e-9 && k4.len() >= out4.gates.len() + 4,
            format!("20 -> {:?} gates, fidelity {f4:.12}; K5 output equivalent: {}", out4.pass_counts, (f5 - 1.0).abs() <= 1e-9),
        ),
    ]
}

fn criterion_10() -> Outcome {
    let block = find_first_block(&fixtures::brickwork(), 12, 4).expect("block");
    line("10 brickwork first block", block.len() == 11, format!("{} gates", block.len()))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5(), criterion_6(), criterion_7(), criterion_8()];
    outcomes.extend(criterion_9());
    outcomes.push(criterion_10());
    let mut failed = 0;
    for o in &outcomes {
        let tag = match (o.pass, o.required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (not required)",
        };
        println!("criterion {:<28} {tag}  {}", o.id, o.detail);
        if !o.pass && o.required {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} required criteria failed");
        std::process::exit(1);
    }
}
