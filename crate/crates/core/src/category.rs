//! The directed 𝔽₂ category assembled from connection counts, gradings and
//! `m₁` estimates; a verifier for the `A∞` relations through `m₂`; and the
//! Picard–Lefschetz side: thimble-class lattices, the mod-2 wall-crossing
//! prediction, and recounts along coefficient families.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2::F2Matrix;
use crate::floer::{m1_estimate, Confidence, GradedGenerator, M1Estimate, M1Settings};
use crate::flow::{find_connections, ShootingConfig};
use crate::landscape::{critical_points, phase_geometry, phase_geometry_of_values, CriticalDatum, PhaseGeometry};
use crate::poly::{wrap_angle, HolomorphicFunction};
use crate::transport::{absolute_grading, LiftConvention};
use crate::Tolerances;

/// An ordered pair of objects, written `"i,j"` in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Pair(pub usize, pub usize);

/// An ordered triple of objects, written `"i,j,k"` in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Triple(pub usize, pub usize, pub usize);

fn parse_indices(s: &str, n: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Precondition(format!("bad index list {s:?}: {e}")))?;
    if parts.len() != n {
        return Err(Error::Precondition(format!("expected {n} indices in {s:?}")));
    }
    Ok(parts)
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

impl FromStr for Pair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let p = parse_indices(s, 2)?;
        Ok(Pair(p[0], p[1]))
    }
}

impl From<Pair> for String {
    fn from(p: Pair) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for Pair {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0, self.1, self.2)
    }
}

impl FromStr for Triple {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let p = parse_indices(s, 3)?;
        Ok(Triple(p[0], p[1], p[2]))
    }
}

impl From<Triple> for String {
    fn from(t: Triple) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for Triple {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One basis element of a morphism space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub label: String,
    pub grading: i64,
    pub action: f64,
}

impl GeneratorRecord {
    pub fn identity(object: usize) -> Self {
        GeneratorRecord {
            label: format!("id_{object}"),
            grading: 0,
            action: 0.0,
        }
    }
}

/// Where the entries for one pair of objects came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub hom: String,
    pub m1: String,
}

/// `m₂ : Hom(i,j) ⊗ Hom(j,k) → Hom(i,k)`; `by_left[a]` is the matrix of
/// `m₂(e_a, ·)`, of shape `rank Hom(i,k) × rank Hom(j,k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct M2Table {
    pub by_left: Vec<F2Matrix>,
}

impl M2Table {
    fn product(&self, a: &[bool], b: &[bool], out: usize) -> Vec<bool> {
        let mut acc = vec![false; out];
        for (k, m) in self.by_left.iter().enumerate() {
            if a[k] {
                for (x, y) in acc.iter_mut().zip(m.apply(b)) {
                    *x ^= y;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedCategoryData {
    /// Critical indices in clockwise order.
    pub objects: Vec<usize>,
    pub homs: BTreeMap<Pair, Vec<GeneratorRecord>>,
    /// `m1[(i,j)][r][c]` is the coefficient of generator `r` in `m₁(generator c)`.
    pub m1: BTreeMap<Pair, F2Matrix>,
    pub m1_confidence: BTreeMap<Pair, Vec<Vec<Confidence>>>,
    pub m2: Option<BTreeMap<Triple, M2Table>>,
    pub provenance: BTreeMap<Pair, Provenance>,
}

impl DirectedCategoryData {
    pub fn rank(&self, i: usize, j: usize) -> usize {
        self.homs.get(&Pair(i, j)).map_or(0, Vec::len)
    }

    /// `m₁` on `Hom(i,j)` with low-confidence entries cleared.
    pub fn verified_m1(&self, i: usize, j: usize) -> F2Matrix {
        let r = self.rank(i, j);
        let mut m = self.m1.get(&Pair(i, j)).cloned().unwrap_or_else(|| F2Matrix::zeros(r, r));
        if let Some(conf) = self.m1_confidence.get(&Pair(i, j)) {
            for (row, flags) in conf.iter().enumerate() {
                for (col, flag) in flags.iter().enumerate() {
                    if *flag == Confidence::Low && row < m.rows() && col < m.cols() {
                        m.set(row, col, false);
                    }
                }
            }
        }
        m
    }
}

/// Assembles the directed category for one `(F, α)`.
///
/// Supplied morphisms against the order are rejected, the diagonal is the
/// identity in degree 0, and `m₁` must raise the grading by exactly one.
pub fn assemble(
    geometry: &PhaseGeometry,
    homs: &BTreeMap<Pair, Vec<GeneratorRecord>>,
    m1: &BTreeMap<Pair, M1Estimate>,
) -> Result<DirectedCategoryData> {
    let n = geometry.values.len();
    for (&Pair(i, j), gens) in homs {
        if i >= n || j >= n {
            return Err(Error::Precondition(format!("object pair ({i}, {j}) out of range")));
        }
        if i == j {
            if gens.len() != 1 || gens[0].grading != 0 {
                return Err(Error::Precondition(format!(
                    "Hom({i},{i}) must be a single generator in degree 0"
                )));
            }
        } else if !geometry.precedes(i, j) && !gens.is_empty() {
            return Err(Error::DirectednessViolation { from: i, to: j });
        }
    }
    for (&Pair(i, j), est) in m1 {
        if i != j && !geometry.precedes(i, j) && est.matrix.iter().flatten().any(|&b| b == 1) {
            return Err(Error::DirectednessViolation { from: i, to: j });
        }
    }

    let mut data = DirectedCategoryData {
        objects: geometry.order.clone(),
        homs: BTreeMap::new(),
        m1: BTreeMap::new(),
        m1_confidence: BTreeMap::new(),
        m2: None,
        provenance: BTreeMap::new(),
    };
    for (a, &i) in geometry.order.iter().enumerate() {
        for &j in &geometry.order[a..] {
            let key = Pair(i, j);
            let (gens, hom_source) = if i == j {
                (vec![GeneratorRecord::identity(i)], "identity".to_string())
            } else {
                let gens = homs.get(&key).cloned().unwrap_or_default();
                let source = if homs.contains_key(&key) {
                    format!("{} flowline generator(s)", gens.len())
                } else {
                    "not supplied; empty".to_string()
                };
                (gens, source)
            };
            let r = gens.len();
            let (matrix, confidence, m1_source) = match m1.get(&key) {
                Some(est) => {
                    if est.matrix.len() != r || est.matrix.iter().any(|row| row.len() != r) {
                        return Err(Error::ShapeMismatch {
                            expected: (r, r),
                            got: (est.matrix.len(), est.matrix.first().map_or(0, Vec::len)),
                        });
                    }
                    let m = F2Matrix::from_rows(&est.matrix)?;
                    for (row, col) in m.nonzeros() {
                        if gens[row].grading != gens[col].grading + 1 {
                            return Err(Error::Precondition(format!(
                                "m1 entry ({row},{col}) on Hom({i},{j}) does not raise the grading by one"
                            )));
                        }
                    }
                    let low = est.confidence.iter().flatten().filter(|&&c| c == Confidence::Low).count();
                    let source = if est.attempts.is_empty() {
                        "supplied counts".to_string()
                    } else {
                        format!("multi-start estimate, {} pair(s), {low} low-confidence", est.attempts.len())
                    };
                    (m, est.confidence.clone(), source)
                }
                None => (
                    F2Matrix::zeros(r, r),
                    vec![vec![Confidence::High; r]; r],
                    "no grading-one pairs; zero".to_string(),
                ),
            };
            data.homs.insert(key, gens);
            data.m1.insert(key, matrix);
            data.m1_confidence.insert(key, confidence);
            data.provenance.insert(
                key,
                Provenance {
                    hom: hom_source,
                    m1: m1_source,
                },
            );
        }
    }
    Ok(data)
}

/// The category of a polynomial at angle `α`, with everything computed:
/// critical data, clockwise order, connections for each `x ≺ y`, gradings
/// with all lifts on sheet 0, and `m₁` (multi-start estimates only where a
/// morphism space has generators one degree apart and settings are given).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryBuild {
    pub critical: Vec<CriticalDatum>,
    pub geometry: PhaseGeometry,
    pub data: DirectedCategoryData,
}

pub fn build_category(
    f: &HolomorphicFunction,
    alpha: f64,
    tol: &Tolerances,
    m1_settings: Option<&M1Settings>,
) -> Result<CategoryBuild> {
    let critical = critical_points(f, tol)?;
    let geometry = phase_geometry(&critical, alpha, tol)?;
    let config = ShootingConfig::for_critical_points(&critical, tol);
    let lift = LiftConvention::default();
    let mut homs = BTreeMap::new();
    let mut m1 = BTreeMap::new();
    for (a, &i) in geometry.order.iter().enumerate() {
        for &j in &geometry.order[a + 1..] {
            let connections = find_connections(f, &critical, i, j, &config, tol)?;
            let mut generators = Vec::new();
            let mut records = Vec::new();
            for flowline in &connections.flowlines {
                let grading = absolute_grading(flowline, &lift)?;
                records.push(GeneratorRecord {
                    label: format!("gamma_{i}_{j}_ray{}", flowline.ray),
                    grading: grading.grading,
                    action: flowline.action,
                });
                generators.push(GradedGenerator {
                    flowline: flowline.clone(),
                    grading: grading.grading,
                });
            }
            let needs_pde = records
                .iter()
                .any(|a| records.iter().any(|b| b.grading == a.grading + 1));
            if needs_pde {
                let estimate = match m1_settings {
                    Some(settings) => m1_estimate(f, &critical, &generators, settings)?,
                    None => {
                        let n = records.len();
                        let mut e = M1Estimate::from_counts(records.iter().map(|r| r.grading).collect(), &[])?;
                        e.confidence = vec![vec![Confidence::Low; n]; n];
                        e
                    }
                };
                m1.insert(Pair(i, j), estimate);
            }
            homs.insert(Pair(i, j), records);
        }
    }
    let data = assemble(&geometry, &homs, &m1)?;
    Ok(CategoryBuild {
        critical,
        geometry,
        data,
    })
}

/// An entry at which an `A∞` relation fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    /// `(m₁∘m₁)[row][col] = 1` on `Hom(source, target)`.
    M1Squared {
        source: usize,
        target: usize,
        row: usize,
        col: usize,
    },
    /// The Leibniz rule fails at output generator `output` of
    /// `m₂(e_left, e_right)` on the triple `objects`.
    Leibniz {
        objects: (usize, usize, usize),
        left: usize,
        right: usize,
        output: usize,
    },
    /// `m₂` with an identity argument differs from the other argument.
    Unit {
        objects: (usize, usize, usize),
        left: usize,
        right: usize,
        output: usize,
    },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::M1Squared {
                source,
                target,
                row,
                col,
            } => write!(f, "m1^2 has entry ({row},{col}) on Hom({source},{target})"),
            Witness::Leibniz {
                objects: (i, j, k),
                left,
                right,
                output,
            } => write!(f, "Leibniz rule fails on ({i},{j},{k}) for generators ({left},{right}) at output {output}"),
            Witness::Unit {
                objects: (i, j, k),
                left,
                right,
                output,
            } => write!(f, "unit law fails on ({i},{j},{k}) for generators ({left},{right}) at output {output}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AInfinityReport {
    pub max_n: usize,
    pub homs_checked: usize,
    pub triples_checked: usize,
}

fn basis(n: usize, k: usize) -> Vec<bool> {
    (0..n).map(|i| i == k).collect()
}

/// First relation failure, if any.
pub fn a_infinity_witness(data: &DirectedCategoryData, max_n: usize) -> Result<Option<Witness>> {
    Ok(check_relations(data, max_n)?.1)
}

fn check_relations(data: &DirectedCategoryData, max_n: usize) -> Result<(AInfinityReport, Option<Witness>)> {
    if !(1..=2).contains(&max_n) {
        return Err(Error::Precondition(format!("max_n must be 1 or 2, got {max_n}")));
    }
    let mut report = AInfinityReport {
        max_n,
        homs_checked: 0,
        triples_checked: 0,
    };
    let mut m1s = BTreeMap::new();
    for (&Pair(i, j), gens) in &data.homs {
        let m = data.verified_m1(i, j);
        if m.rows() != gens.len() || m.cols() != gens.len() {
            return Err(Error::ShapeMismatch {
                expected: (gens.len(), gens.len()),
                got: (m.rows(), m.cols()),
            });
        }
        let sq = m.mul(&m)?;
        report.homs_checked += 1;
        if let Some((row, col)) = sq.nonzeros().next() {
            let w = Witness::M1Squared {
                source: i,
                target: j,
                row,
                col,
            };
            return Ok((report, Some(w)));
        }
        m1s.insert(Pair(i, j), m);
    }
    if max_n < 2 {
        return Ok((report, None));
    }
    let m2 = data
        .m2
        .as_ref()
        .ok_or_else(|| Error::Precondition("m2 requested but not supplied".into()))?;
    for (&Triple(i, j, k), table) in m2 {
        let (ra, rb, rc) = (data.rank(i, j), data.rank(j, k), data.rank(i, k));
        if table.by_left.len() != ra || table.by_left.iter().any(|m| m.rows() != rc || m.cols() != rb) {
            return Err(Error::ShapeMismatch {
                expected: (rc, rb),
                got: table.by_left.first().map_or((0, 0), |m| (m.rows(), m.cols())),
            });
        }
        report.triples_checked += 1;
        let zero = |n| F2Matrix::zeros(n, n);
        let m1_ij = m1s.get(&Pair(i, j)).cloned().unwrap_or_else(|| zero(ra));
        let m1_jk = m1s.get(&Pair(j, k)).cloned().unwrap_or_else(|| zero(rb));
        let m1_ik = m1s.get(&Pair(i, k)).cloned().unwrap_or_else(|| zero(rc));
        for a in 0..ra {
            for b in 0..rb {
                let (ea, eb) = (basis(ra, a), basis(rb, b));
                let product = table.product(&ea, &eb, rc);
                let lhs = m1_ik.apply(&product);
                let left = table.product(&m1_ij.apply(&ea), &eb, rc);
                let right = table.product(&ea, &m1_jk.apply(&eb), rc);
                for c in 0..rc {
                    if lhs[c] != (left[c] ^ right[c]) {
                        let w = Witness::Leibniz {
                            objects: (i, j, k),
                            left: a,
                            right: b,
                            output: c,
                        };
                        return Ok((report, Some(w)));
                    }
                }
                let expected = if i == j {
                    Some(eb.clone())
                } else if j == k {
                    Some(ea.clone())
                } else {
                    None
                };
                if let Some(expected) = expected {
                    if let Some(c) = (0..rc).find(|&c| product[c] != expected[c]) {
                        let w = Witness::Unit {
                            objects: (i, j, k),
                            left: a,
                            right: b,
                            output: c,
                        };
                        return Ok((report, Some(w)));
                    }
                }
            }
        }
    }
    Ok((report, None))
}

/// Checks `m₁² = 0` on every morphism space and, for `max_n = 2`, the
/// Leibniz rule and strict unitality of the supplied `m₂`.
pub fn verify_a_infinity(data: &DirectedCategoryData, max_n: usize) -> Result<AInfinityReport> {
    match check_relations(data, max_n)? {
        (report, None) => Ok(report),
        (_, Some(witness)) => Err(Error::RelationFailure { witness }),
    }
}

/// Integer classes in the span of the thimbles, with an antisymmetric pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PLLattice {
    pub basis: Vec<String>,
    pub pairing: Vec<Vec<i64>>,
}

impl PLLattice {
    pub fn new(basis: Vec<String>, pairing: Vec<Vec<i64>>) -> Result<Self> {
        let n = basis.len();
        if pairing.len() != n || pairing.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: (pairing.len(), pairing.first().map_or(0, Vec::len)),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if pairing[i][j] != -pairing[j][i] {
                    return Err(Error::Precondition(format!("pairing is not antisymmetric at ({i},{j})")));
                }
            }
        }
        Ok(PLLattice { basis, pairing })
    }

    /// The lattice of thimbles in the given order, with `⟨e_a, e_b⟩` the
    /// connection count between them for `a` before `b`.
    pub fn from_counts(order: &[usize], counts: &BTreeMap<Pair, i64>) -> Result<Self> {
        let n = order.len();
        let mut pairing = vec![vec![0i64; n]; n];
        for a in 0..n {
            for b in (a + 1)..n {
                let (i, j) = (order[a], order[b]);
                let c = counts
                    .get(&Pair(i, j))
                    .or_else(|| counts.get(&Pair(j, i)))
                    .copied()
                    .unwrap_or(0);
                pairing[a][b] = c;
                pairing[b][a] = -c;
            }
        }
        Self::new(order.iter().map(|i| format!("thimble_{i}")).collect(), pairing)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn unit(&self, k: usize) -> Vec<i64> {
        (0..self.dim()).map(|i| i64::from(i == k)).collect()
    }

    pub fn pair(&self, x: &[i64], y: &[i64]) -> i64 {
        let mut total = 0;
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                total += xi * self.pairing[i][j] * yj;
            }
        }
        total
    }
}

/// `τ_c(x) = x + ⟨x, c⟩·c`.
pub fn pl_transform(lattice: &PLLattice, c: &[i64], x: &[i64]) -> Result<Vec<i64>> {
    let n = lattice.dim();
    if c.len() != n || x.len() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            got: (x.len().max(c.len()), 1),
        });
    }
    let k = lattice.pair(x, c);
    Ok(x.iter().zip(c).map(|(xi, ci)| xi + k * ci).collect())
}

/// `n′₁₃ ≡ n₁₃ + n₁₂·n₂₃ (mod 2)` after `F(x₂)` crosses the segment `(F(x₁), F(x₃))`.
pub fn wall_crossing_predict(n12: u8, n23: u8, n13: u8) -> u8 {
    (n13 + n12 * n23) % 2
}

/// A polynomial family `F_t` whose coefficients are piecewise linear in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub knots: Vec<f64>,
    /// Coefficients in increasing degree at each knot.
    pub coefficients: Vec<Vec<Complex64>>,
}

impl CoefficientPath {
    pub fn new(knots: Vec<f64>, coefficients: Vec<Vec<Complex64>>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != coefficients.len() {
            return Err(Error::Precondition("a path needs at least two knots, one coefficient vector each".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("knots must increase".into()));
        }
        let len = coefficients[0].len();
        if coefficients.iter().any(|c| c.len() != len) {
            return Err(Error::Precondition("coefficient vectors differ in length".into()));
        }
        Ok(CoefficientPath { knots, coefficients })
    }

    /// Two-knot path on `[0, 1]`.
    pub fn segment(start: Vec<Complex64>, end: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![start, end])
    }

    /// `F_t` with `F_t(0) = 0` and `F_t' = ∏(z − p)·(z − r_t)` over the fixed
    /// points `p`, where `r_t` runs linearly through `moving`. The
    /// coefficients are linear in `r_t`, so knots at the `moving` points
    /// trace the family exactly.
    pub fn moving_critical_point(fixed: &[Complex64], moving: &[Complex64]) -> Result<Self> {
        let knots = (0..moving.len()).map(|k| k as f64).collect();
        let coefficients = moving
            .iter()
            .map(|&r| {
                let mut d = vec![Complex64::new(1.0, 0.0)];
                for &p in fixed.iter().chain(std::iter::once(&r)) {
                    let mut next = vec![Complex64::new(0.0, 0.0); d.len() + 1];
                    for (k, &a) in d.iter().enumerate() {
                        next[k + 1] += a;
                        next[k] -= a * p;
                    }
                    d = next;
                }
                std::iter::once(Complex64::new(0.0, 0.0))
                    .chain(d.iter().enumerate().map(|(k, a)| a / (k + 1) as f64))
                    .collect()
            })
            .collect();
        Self::new(knots, coefficients)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn at(&self, t: f64) -> Result<HolomorphicFunction> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&t) {
            return Err(Error::Precondition(format!("t = {t} outside [{lo}, {hi}]")));
        }
        let k = self.knots.partition_point(|&x| x <= t).clamp(1, self.knots.len() - 1) - 1;
        let w = (t - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
        let coefficients = self.coefficients[k]
            .iter()
            .zip(&self.coefficients[k + 1])
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect();
        HolomorphicFunction::new(coefficients)
    }
}

/// Mod-2 counts for the three pairs of a frame at one parameter value, with
/// indices in the labelling fixed at `t_before`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSnapshot {
    pub t: f64,
    pub values: Vec<Complex64>,
    pub counts: BTreeMap<Pair, u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallCrossingEvent {
    /// The middle index, whose value crosses the frame segment when `crossed`.
    pub moving: usize,
    pub frame: (usize, usize),
    pub crossed: bool,
    /// Parameter at which the crossing was detected.
    pub crossing_parameter: Option<f64>,
    pub before: CountSnapshot,
    pub after: CountSnapshot,
    pub predicted_counts: BTreeMap<Pair, u8>,
    pub recounted_counts: BTreeMap<Pair, u8>,
    pub agree: bool,
}

/// Steps used to follow critical points along a family.
const TRACKING_STEPS: usize = 400;

/// Critical points at `t` relabelled to match `previous` by nearest position.
fn matched_critical(f: &HolomorphicFunction, previous: &[Complex64], tol: &Tolerances) -> Result<Vec<CriticalDatum>> {
    let crit = critical_points(f, tol)?;
    if crit.len() != previous.len() {
        return Err(Error::Precondition("number of critical points changes along the family".into()));
    }
    let n = crit.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permutations(&mut perm, 0, &mut |p| {
        let cost: f64 = p.iter().enumerate().map(|(a, &b)| (previous[a] - crit[b].point).norm_sqr()).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, p.to_vec()));
        }
    });
    let (_, p) = best.expect("at least one permutation");
    Ok(p.into_iter().map(|b| crit[b]).collect())
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Signed area of the triangle `(a, m, b)`.
fn orientation(a: Complex64, m: Complex64, b: Complex64) -> f64 {
    ((m - a) * (b - a).conj()).im
}

/// Follows a three-critical-point family from `t_before` to `t_after`,
/// detects crossings of the middle value through the frame segment, and
/// compares recounted mod-2 counts with the prediction.
pub fn deform_and_recount(
    family: &CoefficientPath,
    t_before: f64,
    t_after: f64,
    frame: (usize, usize),
    tol: &Tolerances,
) -> Result<WallCrossingEvent> {
    let f0 = family.at(t_before)?;
    family.at(t_after)?;
    let crit0 = critical_points(&f0, tol)?;
    if crit0.len() != 3 {
        return Err(Error::Precondition(format!(
            "wall crossing needs three critical points, found {}",
            crit0.len()
        )));
    }
    let (i, k) = frame;
    if i >= 3 || k >= 3 || i == k {
        return Err(Error::Precondition(format!("bad frame ({i}, {k})")));
    }
    let m = 3 - i - k;

    let mut tracked = crit0.clone();
    let mut crossings = Vec::new();
    let values = |c: &[CriticalDatum]| -> Vec<Complex64> { c.iter().map(|d| d.value).collect() };
    let mut prev_orientation = orientation(tracked[i].value, tracked[m].value, tracked[k].value);
    for step in 1..=TRACKING_STEPS {
        let t = t_before + (t_after - t_before) * step as f64 / TRACKING_STEPS as f64;
        let f = family.at(t)?;
        let previous: Vec<Complex64> = tracked.iter().map(|d| d.point).collect();
        let next = matched_critical(&f, &previous, tol)?;
        let o = orientation(next[i].value, next[m].value, next[k].value);
        if o == 0.0 || o.signum() != prev_orientation.signum() {
            let w = prev_orientation / (prev_orientation - o);
            let lerp = |a: Complex64, b: Complex64| a + (b - a) * w;
            let (a, mm, b) = (
                lerp(tracked[i].value, next[i].value),
                lerp(tracked[m].value, next[m].value),
                lerp(tracked[k].value, next[k].value),
            );
            let s = ((mm - a) * (b - a).conj()).re / (b - a).norm_sqr();
            if s > 0.0 && s < 1.0 {
                let t_prev = t - (t_after - t_before) / TRACKING_STEPS as f64;
                crossings.push(t_prev + (t - t_prev) * w);
            }
        }
        if o != 0.0 {
            prev_orientation = o;
        }
        tracked = next;
    }
    if crossings.len() > 1 {
        return Err(Error::MultipleCrossings { count: crossings.len() });
    }
    let f1 = family.at(t_after)?;
    let pairs = [Pair(i.min(m), i.max(m)), Pair(m.min(k), m.max(k)), Pair(i.min(k), i.max(k))];
    let count_at = |f: &HolomorphicFunction, crit: &[CriticalDatum], t: f64| -> Result<BTreeMap<Pair, u8>> {
        let config = ShootingConfig::for_critical_points(crit, tol);
        let mut counts = BTreeMap::new();
        for p in pairs {
            let c = find_connections(f, crit, p.0, p.1, &config, tol).map_err(|e| Error::CountUndefined {
                t,
                reason: e.to_string(),
            })?;
            counts.insert(p, c.count_mod2);
        }
        Ok(counts)
    };
    let before = CountSnapshot {
        t: t_before,
        values: values(&crit0),
        counts: count_at(&f0, &crit0, t_before)?,
    };
    let after = CountSnapshot {
        t: t_after,
        values: values(&tracked),
        counts: count_at(&f1, &tracked, t_after)?,
    };
    let crossed = crossings.len() == 1;
    let mut predicted_counts = before.counts.clone();
    if crossed {
        let n12 = before.counts[&pairs[0]];
        let n23 = before.counts[&pairs[1]];
        let n13 = before.counts[&pairs[2]];
        predicted_counts.insert(pairs[2], wall_crossing_predict(n12, n23, n13));
    }
    let recounted_counts = after.counts.clone();
    let agree = predicted_counts == recounted_counts;
    Ok(WallCrossingEvent {
        moving: m,
        frame,
        crossed,
        crossing_parameter: crossings.first().copied(),
        before,
        after,
        predicted_counts,
        recounted_counts,
        agree,
    })
}

/// An angle `α = arg F(x_index)` at which the clockwise order changes: the
/// object `index` moves from the end of the order to its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalAngle {
    pub angle: f64,
    pub index: usize,
    pub order_before: Vec<usize>,
    pub order_after: Vec<usize>,
}

/// Exceptional angles with the orders just below and just above each.
pub fn annotated_exceptional_angles(values: &[Complex64], tol: &Tolerances) -> Result<Vec<ExceptionalAngle>> {
    let mut angles: Vec<(f64, usize)> = values.iter().enumerate().map(|(i, w)| (wrap_angle(w.arg()), i)).collect();
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = angles.len();
    let mut min_gap = std::f64::consts::TAU;
    for a in 0..n {
        let next = if a + 1 < n {
            angles[a + 1].0
        } else {
            angles[0].0 + std::f64::consts::TAU
        };
        min_gap = min_gap.min(next - angles[a].0);
    }
    let eps = (0.25 * min_gap).min(1e-3);
    angles
        .into_iter()
        .map(|(angle, index)| {
            let before = phase_geometry_of_values(values, angle - eps, tol)?;
            let after = phase_geometry_of_values(values, angle + eps, tol)?;
            Ok(ExceptionalAngle {
                angle,
                index,
                order_before: before.order,
                order_after: after.order,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::phase_geometry_of_values;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_hom(m1: Vec<Vec<u8>>, gradings: Vec<i64>) -> DirectedCategoryData {
        let geometry = phase_geometry_of_values(&[c(1.0, 1.0), c(1.0, -1.0)], 0.0, &Tolerances::default()).unwrap();
        let (x, y) = (geometry.order[0], geometry.order[1]);
        let gens: Vec<GeneratorRecord> = gradings
            .iter()
            .enumerate()
            .map(|(k, &g)| GeneratorRecord {
                label: format!("g{k}"),
                grading: g,
                action: 0.0,
            })
            .collect();
        let mut homs = BTreeMap::new();
        homs.insert(Pair(x, y), gens);
        let mut m1s = BTreeMap::new();
        m1s.insert(Pair(x, y), M1Estimate::from_counts(gradings, &[]).unwrap());
        let mut data = assemble(&geometry, &homs, &m1s).unwrap();
        data.m1.insert(Pair(x, y), F2Matrix::from_rows(&m1).unwrap());
        data
    }

    #[test]
    fn pair_keys_round_trip() {
        let p: Pair = "3,1".parse().unwrap();
        assert_eq!(p, Pair(3, 1));
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"3,1\"");
        assert!("1".parse::<Pair>().is_err());
        assert_eq!("0,1,2".parse::<Triple>().unwrap(), Triple(0, 1, 2));
    }

    #[test]
    fn backwards_hom_is_rejected() {
        let geometry = phase_geometry_of_values(&[c(1.0, 1.0), c(1.0, -1.0)], 0.0, &Tolerances::default()).unwrap();
        let (x, y) = (geometry.order[0], geometry.order[1]);
        let mut homs = BTreeMap::new();
        homs.insert(
            Pair(y, x),
            vec![GeneratorRecord {
                label: "bad".into(),
                grading: 0,
                action: 0.0,
            }],
        );
        let err = assemble(&geometry, &homs, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::DirectednessViolation { from, to } if from == y && to == x));
    }

    #[test]
    fn diagonal_is_the_identity() {
        let data = single_hom(vec![vec![0]], vec![0]);
        for &i in &data.objects {
            assert_eq!(data.homs[&Pair(i, i)], vec![GeneratorRecord::identity(i)]);
        }
        assert!(verify_a_infinity(&data, 1).is_ok());
    }

    #[test]
    fn m1_must_raise_grading() {
        let geometry = phase_geometry_of_values(&[c(1.0, 1.0), c(1.0, -1.0)], 0.0, &Tolerances::default()).unwrap();
        let (x, y) = (geometry.order[0], geometry.order[1]);
        let gens = |g: [i64; 2]| {
            g.iter()
                .map(|&grading| GeneratorRecord {
                    label: "g".into(),
                    grading,
                    action: 0.0,
                })
                .collect::<Vec<_>>()
        };
        let mut homs = BTreeMap::new();
        homs.insert(Pair(x, y), gens([0, 0]));
        let mut m1 = BTreeMap::new();
        m1.insert(Pair(x, y), M1Estimate::from_counts(vec![0, 0], &[(0, 1, 1)]).unwrap());
        assert!(assemble(&geometry, &homs, &m1).is_err());
        homs.insert(Pair(x, y), gens([0, 1]));
        m1.insert(Pair(x, y), M1Estimate::from_counts(vec![0, 1], &[(0, 1, 1)]).unwrap());
        let data = assemble(&geometry, &homs, &m1).unwrap();
        assert_eq!(data.m1[&Pair(x, y)].to_rows(), vec![vec![0, 0], vec![1, 0]]);
        assert!(verify_a_infinity(&data, 1).is_ok());
    }

    #[test]
    fn identity_m1_fails_with_witness() {
        let data = single_hom(vec![vec![1, 0], vec![0, 1]], vec![0, 1]);
        let err = verify_a_infinity(&data, 1).unwrap_err();
        match err {
            Error::RelationFailure {
                witness: Witness::M1Squared { row, col, .. },
            } => assert_eq!((row, col), (0, 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn low_confidence_entries_are_not_verified() {
        let mut data = single_hom(vec![vec![1, 0], vec![0, 1]], vec![0, 1]);
        let key = *data.m1.keys().find(|p| p.0 != p.1).unwrap();
        data.m1_confidence.insert(key, vec![vec![Confidence::Low; 2]; 2]);
        assert!(verify_a_infinity(&data, 1).is_ok());
    }

    #[test]
    fn leibniz_and_units_are_checked() {
        let mut data = single_hom(vec![vec![0, 0], vec![1, 0]], vec![0, 1]);
        let (x, y) = (data.objects[0], data.objects[1]);
        let id1 = F2Matrix::identity(1);
        let id2 = F2Matrix::identity(2);
        let mut m2 = BTreeMap::new();
        m2.insert(Triple(x, x, y), M2Table { by_left: vec![id2.clone()] });
        let right_unit: Vec<F2Matrix> = (0..2)
            .map(|a| {
                let mut m = F2Matrix::zeros(2, 1);
                m.set(a, 0, true);
                m
            })
            .collect();
        m2.insert(Triple(x, y, y), M2Table { by_left: right_unit.clone() });
        m2.insert(Triple(x, x, x), M2Table { by_left: vec![id1] });
        data.m2 = Some(m2.clone());
        let report = verify_a_infinity(&data, 2).unwrap();
        assert_eq!(report.triples_checked, 3);

        let mut broken = m2;
        broken.insert(Triple(x, x, y), M2Table { by_left: vec![F2Matrix::zeros(2, 2)] });
        data.m2 = Some(broken);
        assert!(matches!(
            verify_a_infinity(&data, 2),
            Err(Error::RelationFailure { .. })
        ));

        data.m2 = None;
        assert!(matches!(verify_a_infinity(&data, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn pl_transform_examples() {
        let lattice = PLLattice::new(vec!["e1".into(), "e2".into()], vec![vec![0, 1], vec![-1, 0]]).unwrap();
        let (e1, e2) = (lattice.unit(0), lattice.unit(1));
        assert_eq!(pl_transform(&lattice, &e2, &e1).unwrap(), vec![1, 1]);
        assert_eq!(pl_transform(&lattice, &e2, &e2).unwrap(), e2);
        let twice = pl_transform(&lattice, &e2, &pl_transform(&lattice, &e2, &e1).unwrap()).unwrap();
        assert_eq!(twice, vec![1, 2]);
        assert!(PLLattice::new(vec!["a".into()], vec![vec![1]]).is_err());
    }

    #[test]
    fn wall_crossing_formula() {
        assert_eq!(wall_crossing_predict(1, 1, 0), 1);
        assert_eq!(wall_crossing_predict(1, 1, 1), 0);
        for n23 in 0..2 {
            for n13 in 0..2 {
                assert_eq!(wall_crossing_predict(0, n23, n13), n13);
            }
        }
    }

    #[test]
    fn exceptional_angles_rotate_the_order() {
        let tol = Tolerances::default();
        let values = [c(1.0, 0.5), c(-1.0, 1.0), c(0.2, -1.0)];
        let angles = annotated_exceptional_angles(&values, &tol).unwrap();
        assert_eq!(angles.len(), 3);
        for a in &angles {
            assert_eq!(a.order_before.last(), Some(&a.index));
            assert_eq!(a.order_after.first(), Some(&a.index));
            let mut rotated = a.order_before.clone();
            rotated.rotate_right(1);
            assert_eq!(rotated, a.order_after);
        }
        let two = annotated_exceptional_angles(&[c(-2.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0)], &tol).unwrap();
        let list: Vec<f64> = two.iter().map(|a| a.angle).collect();
        assert!((list[0] - 0.0).abs() < 1e-15 && (list[1] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn coefficient_path_interpolates() {
        let path = CoefficientPath::new(
            vec![0.0, 1.0, 3.0],
            vec![
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
                vec![c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
                vec![c(2.0, 4.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            ],
        )
        .unwrap();
        assert_eq!(path.at(0.5).unwrap().coefficients()[0], c(1.0, 0.0));
        assert_eq!(path.at(2.0).unwrap().coefficients()[0], c(2.0, 2.0));
        assert!(path.at(3.5).is_err());
        assert!(CoefficientPath::new(vec![0.0, 0.0], vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn moving_critical_point_family_has_the_requested_roots() {
        let fixed = [c(1.0, 0.0), c(-1.0, 0.0)];
        let path = CoefficientPath::moving_critical_point(&fixed, &[c(0.0, 0.3), c(0.0, 1.0)]).unwrap();
        let f = path.at(0.5).unwrap();
        for p in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.65)] {
            assert!(f.d1(p).norm() < 1e-14);
        }
        assert_eq!(f.eval(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(path.range(), (0.0, 1.0));
    }

    #[test]
    fn wall_crossing_family_agrees_with_prediction() {
        let tol = Tolerances::default();
        let path = CoefficientPath::moving_critical_point(&[c(1.0, 0.0), c(-1.0, 0.0)], &[c(0.0, 0.3), c(0.0, 1.0)]).unwrap();
        let crit = critical_points(&path.at(0.0).unwrap(), &tol).unwrap();
        let i = crit.iter().position(|d| (d.point - 1.0).norm() < 1e-9).unwrap();
        let k = crit.iter().position(|d| (d.point + 1.0).norm() < 1e-9).unwrap();
        let event = deform_and_recount(&path, 0.0, 1.0, (i, k), &tol).unwrap();
        assert!(event.crossed);
        assert!(event.agree);
        let frame = Pair(i.min(k), i.max(k));
        assert_ne!(event.before.counts[&frame], event.after.counts[&frame]);

        let back_and_forth = CoefficientPath::moving_critical_point(
            &[c(1.0, 0.0), c(-1.0, 0.0)],
            &[c(0.0, 0.3), c(0.0, 1.0), c(0.0, 0.3)],
        )
        .unwrap();
        assert!(matches!(
            deform_and_recount(&back_and_forth, 0.0, 2.0, (i, k), &tol),
            Err(Error::MultipleCrossings { count: 2 })
        ));
    }

    #[test]
    fn cubic_category_has_one_generator() {
        let f = HolomorphicFunction::cubic_example();
        let build = build_category(&f, std::f64::consts::FRAC_PI_2, &Tolerances::default(), None).unwrap();
        assert_eq!(build.data.objects.len(), 2);
        let (x, y) = (build.data.objects[0], build.data.objects[1]);
        assert_eq!(build.data.rank(x, y), 1);
        assert_eq!(build.data.rank(y, x), 0);
        assert!(build.data.m1[&Pair(x, y)].is_zero());
        assert!(verify_a_infinity(&build.data, 1).is_ok());
    }
}
