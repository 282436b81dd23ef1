//! Near-Clifford qubit circuits: Heisenberg Pauli propagation with T-gate
//! branching, a Pauli-basis importance-sampling estimator and a dense
//! state-vector oracle.
//!
//! Qubit `q` is bit `q` of a basis-state index. Gates are listed in
//! application order; `T = diag(1, e^{i pi/4})`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::estimators::{run_source, EstimateResult, EstimatorConfig, SampleSource, Target};
use crate::linalg::C64;
use crate::rng::SampleRng;

pub const DEFAULT_MAX_T: usize = 20;
pub const MAX_STATEVECTOR_QUBITS: usize = 14;

const STATE_TOL: f64 = 1e-12;

/// Pauli index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub type Pauli = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    T(usize),
    Cnot(usize, usize),
    Cz(usize, usize),
}

impl Gate {
    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::Sdg(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::T(q) => (q, None),
            Gate::Cnot(c, t) | Gate::Cz(c, t) => (c, Some(t)),
        }
    }

    fn single_index(&self) -> Option<usize> {
        Some(match self {
            Gate::H(_) => 0,
            Gate::S(_) => 1,
            Gate::Sdg(_) => 2,
            Gate::X(_) => 3,
            Gate::Y(_) => 4,
            Gate::Z(_) => 5,
            Gate::T(_) => 6,
            _ => return None,
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::S(q) => write!(f, "S {q}"),
            Gate::Sdg(q) => write!(f, "SDG {q}"),
            Gate::X(q) => write!(f, "X {q}"),
            Gate::Y(q) => write!(f, "Y {q}"),
            Gate::Z(q) => write!(f, "Z {q}"),
            Gate::T(q) => write!(f, "T {q}"),
            Gate::Cnot(c, t) => write!(f, "CNOT {c} {t}"),
            Gate::Cz(c, t) => write!(f, "CZ {c} {t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitCircuit {
    qubits: usize,
    gates: Vec<Gate>,
}

impl QubitCircuit {
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::Dimension("circuit needs at least one qubit".into()));
        }
        for g in &gates {
            let (a, b) = g.qubits();
            if a >= qubits || b.is_some_and(|b| b >= qubits) {
                return Err(Error::Dimension(format!("gate `{g}` outside a {qubits}-qubit register")));
            }
            if b == Some(a) {
                return Err(Error::InvalidConfig(format!("gate `{g}` uses the same qubit twice")));
            }
        }
        Ok(Self { qubits, gates })
    }

    /// Parses one gate per line (`H 0`, `CNOT 0 1`, `T 3`, ...); `#` starts a
    /// comment and an optional `qubits N` line fixes the register size.
    /// Without either `qubits` or the header, the size is the largest index + 1.
    pub fn parse(text: &str, qubits: Option<usize>) -> Result<Self> {
        let mut gates = Vec::new();
        let mut header = None;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: k + 1, message };
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap_or("").to_ascii_uppercase();
            let args = parts
                .map(|p| p.parse::<usize>().map_err(|_| parse_err(format!("`{p}` is not a qubit index"))))
                .collect::<Result<Vec<_>>>()?;
            let want = match name.as_str() {
                "QUBITS" | "CNOT" | "CX" | "CZ" => if name == "QUBITS" { 1 } else { 2 },
                _ => 1,
            };
            if args.len() != want {
                return Err(parse_err(format!("`{name}` takes {want} argument(s), got {}", args.len())));
            }
            let gate = match name.as_str() {
                "QUBITS" => {
                    header = Some(args[0]);
                    continue;
                }
                "H" => Gate::H(args[0]),
                "S" => Gate::S(args[0]),
                "SDG" | "SDAG" => Gate::Sdg(args[0]),
                "X" => Gate::X(args[0]),
                "Y" => Gate::Y(args[0]),
                "Z" => Gate::Z(args[0]),
                "T" => Gate::T(args[0]),
                "CNOT" | "CX" => Gate::Cnot(args[0], args[1]),
                "CZ" => Gate::Cz(args[0], args[1]),
                _ => return Err(parse_err(format!("unknown gate `{name}`"))),
            };
            gates.push(gate);
        }
        let implied = gates
            .iter()
            .map(|g| {
                let (a, b) = g.qubits();
                a.max(b.unwrap_or(0)) + 1
            })
            .max()
            .unwrap_or(1);
        Self::new(qubits.or(header).unwrap_or(implied), gates)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\n", self.qubits);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn t_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::T(_))).count()
    }

    /// `depth` layers of random single-qubit Cliffords on every qubit followed
    /// by CNOT or CZ on a random pairing, with `t` T gates placed at random.
    pub fn random_near_clifford(qubits: usize, depth: usize, t: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gates = Vec::new();
        let mut layers_with_t: Vec<usize> = (0..t).map(|_| rng.random_range(0..depth.max(1))).collect();
        layers_with_t.sort_unstable();
        for layer in 0..depth {
            for q in 0..qubits {
                gates.push(match rng.random_range(0..6) {
                    0 => Gate::H(q),
                    1 => Gate::S(q),
                    2 => Gate::Sdg(q),
                    3 => Gate::X(q),
                    4 => Gate::Y(q),
                    _ => Gate::Z(q),
                });
            }
            let mut order: Vec<usize> = (0..qubits).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for pair in order.chunks_exact(2) {
                gates.push(if rng.random::<bool>() { Gate::Cnot(pair[0], pair[1]) } else { Gate::Cz(pair[0], pair[1]) });
            }
            for _ in layers_with_t.iter().filter(|&&l| l == layer) {
                gates.push(Gate::T(rng.random_range(0..qubits)));
            }
        }
        Self::new(qubits, gates)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub paulis: Vec<Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, paulis: Vec<Pauli>) -> Result<Self> {
        if !coefficient.is_finite() || paulis.iter().any(|&p| p > 3) {
            return Err(Error::InvalidOperator("Pauli term needs a finite coefficient and indices in 0..4".into()));
        }
        Ok(Self { coefficient, paulis })
    }

    /// `P` on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut paulis = vec![0; n];
        paulis[q] = p;
        Self { coefficient: 1.0, paulis }
    }
}

type Mat2 = [[C64; 2]; 2];

fn pauli_matrix(p: Pauli) -> Mat2 {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match p {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

fn single_gate_matrix(index: usize) -> Mat2 {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match index {
        0 => [[h, h], [h, -h]],
        1 => [[o, z], [z, i]],
        2 => [[o, z], [z, -i]],
        3 => pauli_matrix(1),
        4 => pauli_matrix(2),
        5 => pauli_matrix(3),
        _ => [[o, z], [z, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
    }
}

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Real Pauli coefficients of a Hermitian 2x2 matrix, `c_a = Tr[P_a M] / 2`.
fn pauli_decompose(m: &Mat2) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (p, slot) in out.iter_mut().enumerate() {
        let pm = pauli_matrix(p as u8);
        let tr = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| pm[c][r] * m[r][c]).sum::<C64>() * 0.5;
        assert!(tr.im.abs() < 1e-12, "non-Hermitian conjugation residue");
        *slot = tr.re;
    }
    out
}

type Rule1 = Vec<(f64, Pauli)>;

/// `g^dag P g` for the seven single-qubit gates and four Paulis.
fn single_rules() -> &'static Vec<[Rule1; 4]> {
    static RULES: OnceLock<Vec<[Rule1; 4]>> = OnceLock::new();
    RULES.get_or_init(|| {
        (0..7)
            .map(|g| {
                let gm = single_gate_matrix(g);
                std::array::from_fn(|p| {
                    let conj = mat2_mul(&mat2_adjoint(&gm), &mat2_mul(&pauli_matrix(p as u8), &gm));
                    pauli_decompose(&conj)
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.abs() > 1e-12)
                        .map(|(q, c)| (if (c.abs() - 1.0).abs() < 1e-12 { c.signum() } else { *c }, q as Pauli))
                        .collect()
                })
            })
            .collect()
    })
}

/// Two-qubit Clifford rule: `(sign, control pauli, target pauli)`, indexed by `4 pc + pt`.
fn two_rule(gate: &Gate, pc: Pauli, pt: Pauli) -> (f64, Pauli, Pauli) {
    static CNOT: OnceLock<[(f64, Pauli, Pauli); 16]> = OnceLock::new();
    static CZ: OnceLock<[(f64, Pauli, Pauli); 16]> = OnceLock::new();
    let table = match gate {
        Gate::Cnot(..) => CNOT.get_or_init(|| two_table(true)),
        _ => CZ.get_or_init(|| two_table(false)),
    };
    table[(4 * pc + pt) as usize]
}

fn two_table(cnot: bool) -> [(f64, Pauli, Pauli); 16] {
    // Basis index = c + 2 t (control is the low bit). Both gates are real,
    // symmetric and self-inverse, so g^dag P g = g P g.
    let g = |row: usize, col: usize| -> C64 {
        let val = if cnot {
            let map = |i: usize| if i & 1 == 1 { i ^ 2 } else { i };
            if map(col) == row { 1.0 } else { 0.0 }
        } else if row == col {
            if row == 3 { -1.0 } else { 1.0 }
        } else {
            0.0
        };
        C64::new(val, 0.0)
    };
    let kron = |pc: Pauli, pt: Pauli, row: usize, col: usize| {
        pauli_matrix(pt)[row >> 1][col >> 1] * pauli_matrix(pc)[row & 1][col & 1]
    };
    std::array::from_fn(|idx| {
        let (pc, pt) = ((idx / 4) as Pauli, (idx % 4) as Pauli);
        let conj = |r: usize, c: usize| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    acc += g(r, a) * kron(pc, pt, a, b) * g(b, c);
                }
            }
            acc
        };
        for qc in 0..4u8 {
            for qt in 0..4u8 {
                let tr: C64 = (0..4)
                    .flat_map(|r| (0..4).map(move |c| (r, c)))
                    .map(|(r, c)| kron(qc, qt, c, r) * conj(r, c))
                    .sum::<C64>()
                    / 4.0;
                if tr.norm() > 0.5 {
                    assert!(tr.im.abs() < 1e-12 && (tr.re.abs() - 1.0).abs() < 1e-12);
                    return (tr.re.signum(), qc, qt);
                }
            }
        }
        unreachable!("Clifford conjugation of a Pauli is a signed Pauli")
    })
}

/// `U^dag P U` as signed Pauli strings, where `U` applies the circuit's gates
/// in order. Terms with equal strings are merged.
pub fn propagate_pauli(circuit: &QubitCircuit, p: &PauliTerm) -> Result<Vec<PauliTerm>> {
    propagate_pauli_capped(circuit, p, DEFAULT_MAX_T)
}

pub fn propagate_pauli_capped(circuit: &QubitCircuit, p: &PauliTerm, max_t: usize) -> Result<Vec<PauliTerm>> {
    if p.paulis.len() != circuit.qubits() {
        return Err(Error::Dimension(format!(
            "Pauli string over {} qubits for a {}-qubit circuit",
            p.paulis.len(),
            circuit.qubits()
        )));
    }
    let t = circuit.t_count();
    if t > max_t {
        return Err(Error::Budget(format!("circuit has {t} T gates, above the branching cap {max_t}")));
    }
    let rules = single_rules();
    let mut terms = vec![p.clone()];
    // U^dag P U = g_1^dag ... g_L^dag P g_L ... g_1: conjugate by the last gate first.
    for gate in circuit.gates().iter().rev() {
        let (a, b) = gate.qubits();
        if let Some(idx) = gate.single_index() {
            let branching = idx == 6;
            let mut next = Vec::with_capacity(if branching { 2 * terms.len() } else { terms.len() });
            for term in terms {
                let rule = &rules[idx][term.paulis[a] as usize];
                if rule.len() == 1 {
                    let (c, q) = rule[0];
                    let mut term = term;
                    term.coefficient *= c;
                    term.paulis[a] = q;
                    next.push(term);
                } else {
                    for &(c, q) in rule {
                        let mut paulis = term.paulis.clone();
                        paulis[a] = q;
                        next.push(PauliTerm { coefficient: term.coefficient * c, paulis });
                    }
                }
            }
            terms = if branching { merge(next) } else { next };
        } else {
            let b = b.expect("two-qubit gate");
            for term in &mut terms {
                let (s, pc, pt) = two_rule(gate, term.paulis[a], term.paulis[b]);
                term.coefficient *= s;
                term.paulis[a] = pc;
                term.paulis[b] = pt;
            }
        }
    }
    Ok(terms)
}

fn merge(terms: Vec<PauliTerm>) -> Vec<PauliTerm> {
    let mut map: HashMap<Vec<Pauli>, f64> = HashMap::with_capacity(terms.len());
    let mut order = Vec::new();
    for t in terms {
        match map.get_mut(&t.paulis) {
            Some(c) => *c += t.coefficient,
            None => {
                order.push(t.paulis.clone());
                map.insert(t.paulis, t.coefficient);
            }
        }
    }
    order
        .into_iter()
        .filter_map(|p| {
            let c = map[&p];
            (c.abs() > 1e-14).then_some(PauliTerm { coefficient: c, paulis: p })
        })
        .collect()
}

/// `<psi| P |psi>` for a single-qubit state.
pub fn single_qubit_pauli_expectation(state: &[C64; 2], pauli: Pauli) -> f64 {
    let [a, b] = *state;
    match pauli {
        0 => a.norm_sqr() + b.norm_sqr(),
        1 => 2.0 * (a.conj() * b).re,
        2 => 2.0 * (a.conj() * b).im,
        _ => a.norm_sqr() - b.norm_sqr(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitProductState {
    qubits: Vec<[C64; 2]>,
}

impl QubitProductState {
    pub fn new(qubits: Vec<[C64; 2]>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidState("qubit state needs at least one qubit".into()));
        }
        for (k, q) in qubits.iter().enumerate() {
            let n = q[0].norm_sqr() + q[1].norm_sqr();
            if (n - 1.0).abs() > STATE_TOL {
                return Err(Error::InvalidState(format!("qubit {k} has norm^2 {n}")));
            }
        }
        Ok(Self { qubits })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]; n])
    }

    pub fn qubits(&self) -> &[[C64; 2]] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    /// `<psi| sum_k c_k P_k |psi>`.
    pub fn expectation(&self, terms: &[PauliTerm]) -> f64 {
        terms
            .iter()
            .map(|t| {
                let mut v = t.coefficient;
                for (q, &p) in self.qubits.iter().zip(&t.paulis) {
                    if p != 0 {
                        v *= single_qubit_pauli_expectation(q, p);
                    }
                }
                v
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitProductObservable {
    qubits: usize,
    support: BTreeMap<usize, Mat2>,
}

impl QubitProductObservable {
    pub fn new(qubits: usize, support: BTreeMap<usize, Mat2>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidOperator("observable support is empty".into()));
        }
        for (&q, m) in &support {
            if q >= qubits {
                return Err(Error::Dimension(format!("observable acts on qubit {q} of {qubits}")));
            }
            let herm = (0..2).all(|r| (0..2).all(|c| (m[r][c] - m[c][r].conj()).norm() <= 1e-12));
            if !herm {
                return Err(Error::InvalidOperator(format!("operator on qubit {q} is not Hermitian")));
            }
            if m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidOperator(format!("operator on qubit {q} has non-finite entries")));
            }
        }
        Ok(Self { qubits, support })
    }

    pub fn from_pairs(qubits: usize, pairs: impl IntoIterator<Item = (usize, Mat2)>) -> Result<Self> {
        let mut support = BTreeMap::new();
        for (q, m) in pairs {
            if support.insert(q, m).is_some() {
                return Err(Error::InvalidOperator(format!("qubit {q} listed twice")));
            }
        }
        Self::new(qubits, support)
    }

    pub fn pauli(p: Pauli) -> Mat2 {
        pauli_matrix(p)
    }

    /// `|b><b|` for a computational basis bit.
    pub fn projector(bit: u8) -> Mat2 {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        if bit == 0 { [[o, z], [z, z]] } else { [[z, z], [z, o]] }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn support(&self) -> &BTreeMap<usize, Mat2> {
        &self.support
    }

    /// `prod_i Tr[O_i^dag O_i]`.
    pub fn two_norm_sq(&self) -> f64 {
        self.support.values().map(|m| m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>()).product()
    }
}

/// Per-qubit importance law `|Tr[O P_a]|^2 / (2 ||O||^2)` over `a in 0..4`.
#[derive(Clone, Debug)]
struct PauliLaw {
    chi: [f64; 4],
    cdf: [f64; 4],
    norm_sq: f64,
}

impl PauliLaw {
    fn new(m: &Mat2) -> Result<Self> {
        let coeffs = pauli_decompose(m);
        let chi = coeffs.map(|c| 2.0 * c);
        let norm_sq: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
        if !(norm_sq > 0.0) {
            return Err(Error::InvalidOperator("operator has zero two-norm".into()));
        }
        let mut cdf = [0.0; 4];
        let mut acc = 0.0;
        for (slot, c) in cdf.iter_mut().zip(chi) {
            acc += c * c / (2.0 * norm_sq);
            *slot = acc;
        }
        Ok(Self { chi, cdf, norm_sq })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.cdf[3];
        loop {
            let a = self.cdf.iter().position(|&c| u < c).unwrap_or(3);
            if self.chi[a] != 0.0 {
                return a;
            }
        }
    }
}

/// Per-sample variable for `<psi| U^dag O U |psi>` on qubits.
///
/// Conjugated generators `U^dag P_a^{(i)} U` are cached per supported qubit,
/// and `<psi|U^dag P_a U|psi>` is memoized per distinct sampled `a`.
pub struct QubitSampler {
    state: QubitProductState,
    support: Vec<usize>,
    laws: Vec<PauliLaw>,
    generators: Vec<[Vec<PauliTerm>; 3]>,
    norm: f64,
    memo: RwLock<HashMap<Vec<u8>, f64>>,
}

impl QubitSampler {
    /// Qubits the observable acts on.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Number of distinct Pauli strings evaluated so far.
    pub fn distinct_paulis(&self) -> usize {
        self.memo.read().expect("memo lock").len()
    }

    pub fn new(circuit: &QubitCircuit, state: &QubitProductState, observable: &QubitProductObservable) -> Result<Self> {
        let n = circuit.qubits();
        if state.len() != n || observable.qubits() != n {
            return Err(Error::Dimension(format!(
                "circuit has {n} qubits, state {} and observable {}",
                state.len(),
                observable.qubits()
            )));
        }
        let mut support = Vec::new();
        let mut laws = Vec::new();
        let mut generators = Vec::new();
        for (&q, m) in observable.support() {
            support.push(q);
            laws.push(PauliLaw::new(m)?);
            let gens = [1u8, 2, 3].map(|p| propagate_pauli(circuit, &PauliTerm::single(n, q, p)));
            let [x, y, z] = gens;
            generators.push([x?, y?, z?]);
        }
        let norm = laws.iter().map(|l| l.norm_sq).product();
        Ok(Self { state: state.clone(), support, laws, generators, norm, memo: RwLock::new(HashMap::new()) })
    }

    /// `<psi| U^dag P_a U |psi>` for per-support-qubit Pauli indices `a`.
    fn conjugated_expectation(&self, a: &[usize]) -> f64 {
        let key: Vec<u8> = a.iter().map(|&x| x as u8).collect();
        if let Some(v) = self.memo.read().expect("memo lock").get(&key) {
            return *v;
        }
        let n = self.state.len();
        // Products of Paulis carry phases i^k; the full product is Hermitian.
        let mut acc: HashMap<Vec<Pauli>, C64> = HashMap::from([(vec![0; n], C64::new(1.0, 0.0))]);
        for (gens, &ai) in self.generators.iter().zip(a) {
            if ai == 0 {
                continue;
            }
            let mut next: HashMap<Vec<Pauli>, C64> = HashMap::new();
            for (p, c) in &acc {
                for g in &gens[ai - 1] {
                    let (phase, prod) = pauli_string_product(p, &g.paulis);
                    *next.entry(prod).or_default() += c * phase * g.coefficient;
                }
            }
            acc = next;
        }
        let mut v = C64::new(0.0, 0.0);
        for (p, c) in &acc {
            let mut e = *c;
            for (q, &pi) in self.state.qubits().iter().zip(p) {
                if pi != 0 {
                    e *= single_qubit_pauli_expectation(q, pi);
                }
            }
            v += e;
        }
        debug_assert!(v.im.abs() < 1e-9, "imaginary residue {}", v.im);
        self.memo.write().expect("memo lock").insert(key, v.re);
        v.re
    }
}

/// `P Q = phase * R` for Pauli strings.
fn pauli_string_product(p: &[Pauli], q: &[Pauli]) -> (C64, Vec<Pauli>) {
    let mut phase = 0u8;
    let out = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0 {
                return b;
            }
            if b == 0 || a == b {
                return if a == b { 0 } else { a };
            }
            // XY = iZ and cyclic; reversed order gives -i.
            if (b + 3 - a) % 3 == 1 {
                phase += 1;
            } else {
                phase += 3;
            }
            6 - a - b
        })
        .collect();
    let ph = match phase % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    (ph, out)
}

impl SampleSource for QubitSampler {
    fn draw(&self, rng: &mut SampleRng, _counters: &mut Counters) -> Result<C64> {
        let mut a = Vec::with_capacity(self.laws.len());
        let mut x = self.norm;
        for law in &self.laws {
            let ai = law.sample(rng);
            x /= law.chi[ai];
            a.push(ai);
        }
        Ok(C64::new(x * self.conjugated_expectation(&a), 0.0))
    }

    fn variance_bound(&self) -> f64 {
        self.norm
    }
}

/// Estimates `<psi| U^dag O_k U |psi>` for every observable, jointly within
/// `epsilon` with probability at least `1 - delta`.
pub fn estimate_qubit_expectation(
    circuit: &QubitCircuit,
    input: &QubitProductState,
    observables: &[QubitProductObservable],
    cfg: &EstimatorConfig,
) -> Result<Vec<EstimateResult>> {
    cfg.validate()?;
    if observables.is_empty() {
        return Err(Error::InvalidOperator("no observables given".into()));
    }
    let k = cfg.k_observables.max(observables.len());
    let samplers =
        observables.iter().map(|o| QubitSampler::new(circuit, input, o)).collect::<Result<Vec<_>>>()?;
    samplers
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let mut r = run_source(s, cfg, cfg.epsilon, cfg.delta, k, idx as u64, Target::Real)?;
            r.extra.insert("t_count".into(), circuit.t_count() as f64);
            r.extra.insert("distinct_paulis".into(), s.distinct_paulis() as f64);
            Ok(r)
        })
        .collect()
}

/// Exact expectation by dense state-vector evolution.
pub fn statevector_oracle(
    circuit: &QubitCircuit,
    input: &QubitProductState,
    observable: &QubitProductObservable,
) -> Result<f64> {
    let n = circuit.qubits();
    if n > MAX_STATEVECTOR_QUBITS {
        return Err(Error::Size { what: "state-vector qubits", size: n, max: MAX_STATEVECTOR_QUBITS });
    }
    if input.len() != n || observable.qubits() != n {
        return Err(Error::Dimension("state, observable and circuit qubit counts differ".into()));
    }
    let dim = 1usize << n;
    let mut psi = vec![C64::new(1.0, 0.0); dim];
    for (idx, amp) in psi.iter_mut().enumerate() {
        for (q, s) in input.qubits().iter().enumerate() {
            *amp *= s[(idx >> q) & 1];
        }
    }
    for g in circuit.gates() {
        match *g {
            Gate::Cnot(c, t) => {
                for idx in 0..dim {
                    if (idx >> c) & 1 == 1 && (idx >> t) & 1 == 0 {
                        psi.swap(idx, idx | (1 << t));
                    }
                }
            }
            Gate::Cz(c, t) => {
                for (idx, amp) in psi.iter_mut().enumerate() {
                    if (idx >> c) & 1 == 1 && (idx >> t) & 1 == 1 {
                        *amp = -*amp;
                    }
                }
            }
            _ => {
                let (q, _) = g.qubits();
                apply_single(&mut psi, q, &single_gate_matrix(g.single_index().expect("single-qubit gate")));
            }
        }
    }
    let mut phi = psi.clone();
    for (&q, m) in observable.support() {
        apply_single(&mut phi, q, m);
    }
    let v: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
    Ok(v.re)
}

fn apply_single(psi: &mut [C64], q: usize, m: &Mat2) {
    let bit = 1 << q;
    for idx in 0..psi.len() {
        if idx & bit == 0 {
            let (a, b) = (psi[idx], psi[idx | bit]);
            psi[idx] = m[0][0] * a + m[0][1] * b;
            psi[idx | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::draw_samples;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    const FRAC: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> [C64; 2] {
        [C64::new(FRAC, 0.0), C64::new(FRAC, 0.0)]
    }

    #[test]
    fn clifford_rules() {
        let c = QubitCircuit::new(1, vec![Gate::H(0)]).unwrap();
        let out = propagate_pauli(&c, &PauliTerm::single(1, 0, 3)).unwrap();
        assert_eq!(out, vec![PauliTerm { coefficient: 1.0, paulis: vec![1] }]);

        let c = QubitCircuit::new(2, vec![Gate::Cnot(0, 1)]).unwrap();
        let out = propagate_pauli(&c, &PauliTerm::single(2, 0, 1)).unwrap();
        assert_eq!(out, vec![PauliTerm { coefficient: 1.0, paulis: vec![1, 1] }]);
        let out = propagate_pauli(&c, &PauliTerm::single(2, 1, 3)).unwrap();
        assert_eq!(out[0].paulis, vec![3, 3]);
        let out = propagate_pauli(&c, &PauliTerm::single(2, 0, 2)).unwrap();
        assert_eq!(out[0].paulis, vec![2, 1]);

        let c = QubitCircuit::new(1, vec![Gate::S(0)]).unwrap();
        let out = propagate_pauli(&c, &PauliTerm::single(1, 0, 1)).unwrap();
        assert_eq!(out, vec![PauliTerm { coefficient: -1.0, paulis: vec![2] }]);
    }

    #[test]
    fn t_rule_follows_matrix_conjugation() {
        // T^dag X T = (X - Y)/sqrt 2 for T = diag(1, e^{i pi/4}).
        let c = QubitCircuit::new(1, vec![Gate::T(0)]).unwrap();
        let mut out = propagate_pauli(&c, &PauliTerm::single(1, 0, 1)).unwrap();
        out.sort_by_key(|t| t.paulis[0]);
        assert_eq!(out.len(), 2);
        assert!((out[0].coefficient - FRAC).abs() < 1e-15 && out[0].paulis == vec![1]);
        assert!((out[1].coefficient + FRAC).abs() < 1e-15 && out[1].paulis == vec![2]);
        let z = propagate_pauli(&c, &PauliTerm::single(1, 0, 3)).unwrap();
        assert_eq!(z, vec![PauliTerm::single(1, 0, 3)]);
    }

    #[test]
    fn single_qubit_expectations() {
        let zero = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(single_qubit_pauli_expectation(&zero, 3), 1.0);
        assert!((single_qubit_pauli_expectation(&plus(), 1) - 1.0).abs() < 1e-15);
        assert_eq!(single_qubit_pauli_expectation(&zero, 1), 0.0);
    }

    #[test]
    fn estimator_small_examples() {
        let cfg = EstimatorConfig::new(0.05, 0.05, 3);
        let input = QubitProductState::zeros(1).unwrap();
        let h = QubitCircuit::new(1, vec![Gate::H(0)]).unwrap();
        let zobs = QubitProductObservable::from_pairs(1, [(0, QubitProductObservable::pauli(3))]).unwrap();
        let xobs = QubitProductObservable::from_pairs(1, [(0, QubitProductObservable::pauli(1))]).unwrap();
        let r = estimate_qubit_expectation(&h, &input, &[zobs.clone(), xobs.clone()], &cfg).unwrap();
        assert!(r[0].estimate.re.abs() < 0.05);
        assert!((r[1].estimate.re - 1.0).abs() < 0.05);

        let ht = QubitCircuit::new(1, vec![Gate::H(0), Gate::T(0)]).unwrap();
        let r = estimate_qubit_expectation(&ht, &input, &[xobs.clone()], &cfg).unwrap();
        assert!((r[0].estimate.re - FRAC).abs() < 0.05);
        for (c, o, want) in [(&h, &zobs, 0.0), (&h, &xobs, 1.0), (&ht, &xobs, FRAC)] {
            assert!((statevector_oracle(c, &input, o).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "# comment\nH 0\ncnot 0 1\nT 2 # trailing\nSDG 1\nCZ 2 0\n";
        let c = QubitCircuit::parse(text, None).unwrap();
        assert_eq!(c.qubits(), 3);
        assert_eq!(c.t_count(), 1);
        assert_eq!(QubitCircuit::parse(&c.to_text(), None).unwrap(), c);
        assert!(matches!(QubitCircuit::parse("H 0\nFOO 1\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(QubitCircuit::parse("CNOT 0\n", None), Err(Error::Parse { line: 1, .. })));
        assert!(QubitCircuit::parse("H 5\n", Some(2)).is_err());
    }

    #[test]
    fn branching_cap() {
        let c = QubitCircuit::new(1, vec![Gate::T(0); 3]).unwrap();
        assert!(matches!(propagate_pauli_capped(&c, &PauliTerm::single(1, 0, 1), 2), Err(Error::Budget(_))));
    }

    #[test]
    fn pauli_products() {
        assert_eq!(pauli_string_product(&[1], &[2]), (C64::new(0.0, 1.0), vec![3]));
        assert_eq!(pauli_string_product(&[2], &[1]), (C64::new(0.0, -1.0), vec![3]));
        assert_eq!(pauli_string_product(&[3, 1], &[1, 1]), (C64::new(0.0, 1.0), vec![2, 0]));
    }

    fn random_observable(n: usize, seed: u64) -> QubitProductObservable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rng.random_range(1..=3usize);
        let mut qs: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            qs.swap(i, rng.random_range(0..=i));
        }
        QubitProductObservable::from_pairs(
            n,
            qs[..l].iter().map(|&q| {
                let m = if rng.random::<bool>() {
                    QubitProductObservable::projector(rng.random_range(0..2))
                } else {
                    let (a, d) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    let b = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    [[C64::new(a, 0.0), b], [b.conj(), C64::new(d, 0.0)]]
                };
                (q, m)
            }),
        )
        .unwrap()
    }

    #[test]
    fn sample_mean_matches_oracle() {
        for seed in 0..4 {
            let c = QubitCircuit::random_near_clifford(5, 6, 2, seed).unwrap();
            let input = QubitProductState::new(
                (0..5).map(|k| [C64::from_polar((0.3 * k as f64).cos(), 0.0), C64::from_polar((0.3 * k as f64).sin(), 0.4 * k as f64)]).collect(),
            )
            .unwrap();
            let obs = random_observable(5, seed);
            let s = QubitSampler::new(&c, &input, &obs).unwrap();
            let xs = draw_samples(&s, seed, 0, 40_000).unwrap();
            let n = xs.len() as f64;
            let mean = xs.iter().map(|x| x.re).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x.re - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let want = statevector_oracle(&c, &input, &obs).unwrap();
            assert!((mean - want).abs() < 5.0 * (var / n).sqrt() + 1e-12, "seed {seed}: {mean} vs {want}");
            assert!(var <= obs.two_norm_sq() * 1.05);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn propagation_conserves_coefficient_norm(seed in 0u64..10_000, t in 0usize..5, q in 0usize..4, p in 1u8..4) {
            let c = QubitCircuit::random_near_clifford(4, 8, t, seed).unwrap();
            let out = propagate_pauli(&c, &PauliTerm::single(4, q, p)).unwrap();
            let norm: f64 = out.iter().map(|t| t.coefficient * t.coefficient).sum();
            prop_assert!((norm - 1.0).abs() < 1e-10);
            prop_assert!(out.len() <= 1 << t);
            if t == 0 {
                prop_assert_eq!(out.len(), 1);
                prop_assert!((out[0].coefficient.abs() - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn propagation_matches_statevector(seed in 0u64..10_000, t in 0usize..4, q in 0usize..4, p in 1u8..4) {
            let c = QubitCircuit::random_near_clifford(4, 5, t, seed).unwrap();
            let input = QubitProductState::new(
                (0..4).map(|k| [C64::new((0.5 + 0.2 * k as f64).cos(), 0.0), C64::from_polar((0.5 + 0.2 * k as f64).sin(), 0.3 * k as f64 + seed as f64)]).collect(),
            ).unwrap();
            let terms = propagate_pauli(&c, &PauliTerm::single(4, q, p)).unwrap();
            let obs = QubitProductObservable::from_pairs(4, [(q, QubitProductObservable::pauli(p))]).unwrap();
            let want = statevector_oracle(&c, &input, &obs).unwrap();
            prop_assert!((input.expectation(&terms) - want).abs() < 1e-10);
        }
    }
}
