//! Built-in instances: benchmark targets, a small exact-synthesis corpus,
//! the depth-15 Fibonacci weaves and rolling-horizon seed circuits.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use qsynth_core::encoding::{ComplexMatrix, C64};
use qsynth_core::gates::{builtin_matrix, embed, GateSpec};
use qsynth_core::rho::{circuit_unitary, zzz_hypergraph_seed, GateList};

/// A ready-to-solve exact synthesis instance.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub qubits: usize,
    pub target: ComplexMatrix,
    /// Non-identity elementary gates; the identity is added by the gate set.
    pub gates: Vec<GateSpec>,
    pub p: usize,
}

/// One benchmark row: target name, register size, gate-set size (identity
/// included) and position budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkRow {
    pub name: &'static str,
    pub qubits: usize,
    pub gate_set_size: usize,
    pub p: usize,
}

pub const BENCHMARK_ROWS: &[BenchmarkRow] = &[
    BenchmarkRow { name: "controlled_sqrt_x", qubits: 2, gate_set_size: 9, p: 7 },
    BenchmarkRow { name: "controlled_h", qubits: 2, gate_set_size: 32, p: 5 },
    BenchmarkRow { name: "magic", qubits: 2, gate_set_size: 73, p: 4 },
    BenchmarkRow { name: "iswap", qubits: 2, gate_set_size: 9, p: 10 },
    BenchmarkRow { name: "single_excitation_hadamard", qubits: 2, gate_set_size: 14, p: 5 },
    BenchmarkRow { name: "toffoli", qubits: 3, gate_set_size: 9, p: 5 },
    BenchmarkRow { name: "cnot_13", qubits: 3, gate_set_size: 14, p: 8 },
    BenchmarkRow { name: "fredkin", qubits: 3, gate_set_size: 11, p: 7 },
    BenchmarkRow { name: "miller", qubits: 3, gate_set_size: 7, p: 10 },
    BenchmarkRow { name: "relative_toffoli", qubits: 3, gate_set_size: 7, p: 9 },
    BenchmarkRow { name: "margolus", qubits: 3, gate_set_size: 12, p: 7 },
    BenchmarkRow { name: "qft_3", qubits: 3, gate_set_size: 17, p: 7 },
    BenchmarkRow { name: "controlled_iswap", qubits: 3, gate_set_size: 7, p: 12 },
    BenchmarkRow { name: "cnot_41", qubits: 4, gate_set_size: 6, p: 10 },
    BenchmarkRow { name: "double_peres", qubits: 4, gate_set_size: 9, p: 7 },
    BenchmarkRow { name: "quantum_full_adder", qubits: 4, gate_set_size: 11, p: 7 },
    BenchmarkRow { name: "double_toffoli", qubits: 4, gate_set_size: 10, p: 7 },
];

fn g(name: &str, qubits: &[usize]) -> GateSpec {
    GateSpec::builtin(name, qubits, None).expect("valid builtin")
}

fn on(name: &str, qubits: &[usize], n: usize) -> ComplexMatrix {
    embed(&builtin_matrix(name, None).expect("builtin").1, qubits, n).expect("valid placement")
}

fn product(gates: &[GateSpec], n: usize) -> ComplexMatrix {
    circuit_unitary(gates, n).expect("valid circuit")
}

/// Permutation matrix sending basis state `j` to `perm[j]`.
fn permutation(perm: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(perm.len(), |i, j| if perm[j] == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Target unitary of a benchmark row, for the rows whose unitary is standard.
pub fn benchmark_target(name: &str) -> Option<ComplexMatrix> {
    let h = FRAC_1_SQRT_2;
    Some(match name {
        "controlled_sqrt_x" => on("CV", &[1, 2], 2),
        "controlled_h" => on("CH", &[1, 2], 2),
        "magic" => {
            let rows = [[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 0.0)], [
                (0.0, 0.0),
                (0.0, 0.0),
                (0.0, 1.0),
                (-1.0, 0.0),
            ], [(1.0, 0.0), (0.0, -1.0), (0.0, 0.0), (0.0, 0.0)]];
            ComplexMatrix::from_fn(4, |i, j| C64::new(h * rows[i][j].0, h * rows[i][j].1))
        }
        "iswap" => on("iSWAP", &[1, 2], 2),
        "single_excitation_hadamard" => ComplexMatrix::from_fn(4, |i, j| match (i, j) {
            (0, 0) | (3, 3) => C64::new(1.0, 0.0),
            (1, 1) | (1, 2) | (2, 1) => C64::new(h, 0.0),
            (2, 2) => C64::new(-h, 0.0),
            _ => C64::new(0.0, 0.0),
        }),
        "toffoli" => permutation(&[0, 1, 2, 3, 4, 5, 7, 6]),
        "cnot_13" => on("CNOT", &[1, 3], 3),
        "fredkin" => permutation(&[0, 1, 2, 3, 4, 6, 5, 7]),
        "qft_3" => ComplexMatrix::from_fn(8, |i, j| C64::from_polar(1.0 / 8f64.sqrt(), 2.0 * PI * (i * j) as f64 / 8.0)),
        "controlled_iswap" => {
            let mut m = ComplexMatrix::identity(8);
            let is = builtin_matrix("iSWAP", None).expect("builtin").1;
            for i in 0..4 {
                for j in 0..4 {
                    m.set(4 + i, 4 + j, is.get(i, j));
                }
            }
            m
        }
        "cnot_41" => on("CNOT", &[4, 1], 4),
        _ => return None,
    })
}

/// Toffoli from controlled-√X gates and CNOTs (nine gates with the identity).
pub fn toffoli() -> Fixture {
    let gates = vec![
        g("CV", &[1, 3]),
        g("CV", &[2, 3]),
        g("CV", &[1, 2]),
        g("CVdg", &[1, 3]),
        g("CVdg", &[2, 3]),
        g("CVdg", &[1, 2]),
        g("CNOT", &[2, 1]),
        g("CNOT", &[1, 2]),
    ];
    Fixture { name: "toffoli", qubits: 3, target: benchmark_target("toffoli").expect("known"), gates, p: 5 }
}

fn fx(name: &'static str, qubits: usize, gates: &[(&str, &[usize])], target: ComplexMatrix, p: usize) -> Fixture {
    Fixture { name, qubits, target, gates: gates.iter().map(|(n, q)| g(n, q)).collect(), p }
}

fn circuit(gates: &[(&str, &[usize])], n: usize) -> ComplexMatrix {
    product(&gates.iter().map(|(name, q)| g(name, q)).collect::<Vec<_>>(), n)
}

/// Small exact-synthesis instances on at most two qubits, at most seven
/// non-identity gates and at most five positions.
pub fn small_corpus() -> Vec<Fixture> {
    let hcx: &[(&str, &[usize])] = &[("H", &[1]), ("H", &[2]), ("CNOT", &[1, 2])];
    vec![
        fx("t_squared_is_s", 1, &[("T", &[1]), ("H", &[1])], on("S", &[1], 1), 3),
        fx("t_fourth_is_z", 1, &[("T", &[1]), ("H", &[1])], on("Z", &[1], 1), 4),
        fx("x_from_h_and_s", 1, &[("H", &[1]), ("S", &[1])], on("X", &[1], 1), 5),
        fx("sqrt_x_from_h_and_s", 1, &[("H", &[1]), ("S", &[1])], on("SX", &[1], 1), 3),
        fx("y_from_h_s_x", 1, &[("H", &[1]), ("S", &[1]), ("X", &[1])], on("Y", &[1], 1), 3),
        fx("sdg_from_s_and_t", 1, &[("S", &[1]), ("T", &[1])], on("Sdg", &[1], 1), 4),
        fx("hzh_is_x", 1, &[("H", &[1]), ("Z", &[1])], on("X", &[1], 1), 3),
        fx("h_cnot_h_is_cz", 2, hcx, on("CZ", &[1, 2], 2), 3),
        fx("control_target_reversal", 2, hcx, on("CNOT", &[2, 1], 2), 5),
        fx("reversal_budget_too_small", 2, hcx, on("CNOT", &[2, 1], 2), 3),
        fx("swap_from_cnots", 2, &[("CNOT", &[1, 2]), ("CNOT", &[2, 1])], on("SWAP", &[1, 2], 2), 3),
        fx("cnot_from_cz", 2, &[("H", &[1]), ("H", &[2]), ("CZ", &[1, 2])], on("CNOT", &[1, 2], 2), 3),
        fx("hadamard_pair", 2, hcx, circuit(&[("H", &[1]), ("H", &[2])], 2), 2),
        fx("bell_preparation", 2, &[("H", &[1]), ("H", &[2]), ("CNOT", &[1, 2]), ("T", &[1])], circuit(&[("H", &[1]), ("CNOT", &[1, 2])], 2), 3),
        fx(
            "controlled_s",
            2,
            &[("T", &[1]), ("T", &[2]), ("Tdg", &[2]), ("CNOT", &[1, 2])],
            circuit(&[("T", &[1]), ("T", &[2]), ("CNOT", &[1, 2]), ("Tdg", &[2]), ("CNOT", &[1, 2])], 2),
            5,
        ),
        fx("identity_target", 2, &[("H", &[1]), ("CNOT", &[1, 2])], ComplexMatrix::identity(4), 2),
        fx("controlled_y", 2, &[("S", &[2]), ("Sdg", &[2]), ("CNOT", &[1, 2])], on("CY", &[1, 2], 2), 3),
        fx("s_tensor_s", 2, &[("T", &[1]), ("T", &[2]), ("S", &[1])], circuit(&[("S", &[1]), ("S", &[2])], 2), 4),
        fx(
            "zz_phase",
            2,
            &[("CNOT", &[1, 2]), ("S", &[2]), ("S", &[1])],
            circuit(&[("CNOT", &[1, 2]), ("S", &[2]), ("CNOT", &[1, 2])], 2),
            3,
        ),
        fx("x_tensor_x", 2, &[("X", &[1]), ("X", &[2]), ("CNOT", &[1, 2]), ("H", &[1])], circuit(&[("X", &[1]), ("X", &[2])], 2), 3),
        fx(
            "cnot_pair",
            2,
            &[("CNOT", &[1, 2]), ("CNOT", &[2, 1]), ("H", &[1])],
            circuit(&[("CNOT", &[1, 2]), ("CNOT", &[2, 1])], 2),
            3,
        ),
        fx(
            "mixed_clifford",
            2,
            &[("H", &[1]), ("S", &[1]), ("S", &[2]), ("CNOT", &[1, 2]), ("CNOT", &[2, 1])],
            circuit(&[("H", &[1]), ("CNOT", &[1, 2]), ("S", &[2]), ("CNOT", &[2, 1])], 2),
            4,
        ),
    ]
}

/// Instances whose minimum depth differs from their minimum gate count:
/// `T1 T2 CNOT12` fits in two layers while a chain of gates that pairwise
/// share a qubit needs one layer per gate.
pub fn depth_corpus() -> Vec<(Fixture, usize)> {
    let set: &[(&str, &[usize])] = &[("T", &[1]), ("T", &[2]), ("CNOT", &[1, 2])];
    let mut out = vec![(fx("parallel_t_then_cnot", 2, set, circuit(&[("T", &[1]), ("T", &[2]), ("CNOT", &[1, 2])], 2), 3), 2)];
    let chain: &[(&str, &[usize])] = &[("H", &[1]), ("CNOT", &[1, 2]), ("S", &[2]), ("CNOT", &[1, 2])];
    let names = ["chain_1", "chain_2", "chain_3", "chain_4"];
    for k in 1..=4 {
        let gates: &[(&str, &[usize])] = &[("H", &[1]), ("S", &[2]), ("CNOT", &[1, 2])];
        out.push((fx(names[k - 1], 2, gates, circuit(&chain[..k], 2), 4), k));
    }
    out
}

/// The certified depth-15 Fibonacci weaves for `H`, `X` and `T`, as
/// `(generator, exponent)` factors with even exponents.
pub fn weave_factors(target: &str) -> Option<&'static [(u8, i32)]> {
    Some(match target {
        "H" => &[(1, -4), (2, 2), (1, -2), (2, 2), (1, -2), (2, -2), (1, 2), (2, -4), (1, -2), (2, 2), (1, 2), (2, -2), (1, -2)],
        "X" => &[(2, 2), (1, -4), (2, 2), (1, -4), (2, 2), (1, -4), (2, 2)],
        "T" => &[(1, 2), (2, -2), (1, 2), (2, 4), (1, -2), (2, 2), (1, -2), (2, -4), (1, 2), (2, -2), (1, -4), (2, -2)],
        _ => return None,
    })
}

/// Expands weave factors into `W1`, `W1dg`, `W2`, `W2dg` gates.
pub fn weave_listing(target: &str) -> Option<GateList> {
    let mut out = Vec::new();
    for &(gen, exp) in weave_factors(target)? {
        let name = match (gen, exp > 0) {
            (1, true) => "W1",
            (1, false) => "W1dg",
            (_, true) => "W2",
            (_, false) => "W2dg",
        };
        for _ in 0..exp.unsigned_abs() / 2 {
            out.push(g(name, &[1]));
        }
    }
    Some(out)
}

/// Published fidelities of the three weaves.
pub const WEAVE_FIDELITIES: [(&str, f64); 3] = [("H", 0.999957), ("X", 0.999990), ("T", 0.999917)];

/// Rotation angle used by the parity-ladder seeds. `RZ(π/2)` equals `S` up to phase.
pub const ZZZ_ANGLE: f64 = PI / 2.0;

/// Parity ladders on every 3-subset of five qubits (50 gates).
pub fn k5_seed() -> GateList {
    zzz_hypergraph_seed(5, ZZZ_ANGLE).expect("valid seed")
}

/// Parity ladders on every 3-subset of four qubits (20 gates).
pub fn k4_seed() -> GateList {
    zzz_hypergraph_seed(4, ZZZ_ANGLE).expect("valid seed")
}

/// `{CNOT, H, S}` templates for rolling-horizon windows.
pub fn rho_templates() -> Vec<GateSpec> {
    vec![g("CNOT", &[1, 2]), g("H", &[1]), g("S", &[1])]
}

/// A 7-qubit brickwork: rotations `R1..R7`, entanglers `U8..U10` on
/// (1,2),(3,4),(5,6), rotations `R11..R17`, entanglers `U18..U20` on
/// (2,3),(4,5),(6,7), rotations `R21..R27`.
pub fn brickwork() -> GateList {
    let rot = |q: usize, layer: usize| GateSpec::builtin("RY", &[q], Some(0.1 * (q + 7 * layer) as f64)).expect("rotation");
    let mut out = Vec::new();
    out.extend((1..=7).map(|q| rot(q, 0)));
    out.extend([[1, 2], [3, 4], [5, 6]].iter().map(|p| g("CNOT", p)));
    out.extend((1..=7).map(|q| rot(q, 1)));
    out.extend([[2, 3], [4, 5], [6, 7]].iter().map(|p| g("CNOT", p)));
    out.extend((1..=7).map(|q| rot(q, 2)));
    out
}

/// Looks up a seed circuit by name.
pub fn seed_circuit(name: &str) -> Option<(usize, GateList)> {
    match name {
        "k5" => Some((5, k5_seed())),
        "k4" => Some((4, k4_seed())),
        "brickwork" => Some((7, brickwork())),
        _ => weave_listing(name.strip_prefix("weave_")?).map(|w| (1, w)),
    }
}

/// Looks up a runnable fixture by name.
pub fn fixture(name: &str) -> Option<Fixture> {
    if name == "toffoli" {
        return Some(toffoli());
    }
    small_corpus().into_iter().chain(depth_corpus().into_iter().map(|(f, _)| f)).find(|f| f.name == name)
}

/// Names accepted by [`fixture`].
pub fn fixture_names() -> Vec<&'static str> {
    let mut v = vec!["toffoli"];
    v.extend(small_corpus().iter().map(|f| f.name));
    v.extend(depth_corpus().iter().map(|(f, _)| f.name));
    v
}
