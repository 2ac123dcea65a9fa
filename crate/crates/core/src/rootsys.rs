//! Finite root systems of all simple types, with the extended simple root
//! data used everywhere else: highest root, marks, Coxeter number and the
//! rational Gram matrix on Z = Pi ∪ {-delta}.
//!
//! Roots live in simple-root coordinates (integer vectors), heights are
//! coordinate sums, and all bilinear data is exact rational with long
//! roots normalized to ν(α,α) = 2. Node 0 of the extended index set is
//! always -delta.

use std::collections::BTreeSet;
use std::fmt;

use num::traits::Zero;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ratlin::{rat, rat_string, rat_to_f64, ratio, Rat, RatMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LieType {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl fmt::Display for LieType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl std::str::FromStr for LieType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_uppercase().as_str() {
            "A" => Ok(LieType::A),
            "B" => Ok(LieType::B),
            "C" => Ok(LieType::C),
            "D" => Ok(LieType::D),
            "E" => Ok(LieType::E),
            "F" => Ok(LieType::F),
            "G" => Ok(LieType::G),
            other => Err(format!("unknown Lie type {other:?} (expected one of A-G)")),
        }
    }
}

/// Finite root system plus the extended simple root data.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub lie_type: LieType,
    pub rank: usize,
    /// Column-normalized Cartan matrix: `cartan[i][j] = 2 ν(α_i,α_j) / ν(α_j,α_j)`.
    pub cartan: Vec<Vec<i64>>,
    /// All roots in simple-root coordinates, sorted lexicographically.
    pub roots: Vec<Vec<i64>>,
    /// Roots with nonnegative coordinates.
    pub positive_roots: Vec<Vec<i64>>,
    /// Highest root coordinates.
    pub delta: Vec<i64>,
    /// Coefficients of delta in the simple roots; n_{-delta} = 1 is implicit.
    pub marks: Vec<i64>,
    /// Coxeter number r = 1 + height(delta).
    pub coxeter: usize,
    /// Gram matrix ν on Z = {-delta} ∪ Pi, index 0 = -delta, long roots have ν(α,α) = 2.
    pub gram_ext: RatMatrix,
    /// Squared lengths ν(α_i,α_i) of the simple roots.
    pub len2: Vec<Rat>,
}

/// Degrees of the simple-root line bundles together with the genus, the
/// input of the polystability inequality.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DegreeData {
    pub degrees: Vec<i64>,
    pub genus: i64,
}

fn invalid(t: LieType, rank: usize, msg: &str) -> Error {
    Error::InvalidType(t.to_string(), rank, msg.to_string())
}

/// Row-normalized (Kac) Cartan matrix and squared simple-root lengths for a
/// valid (type, rank) pair, following the Bourbaki node ordering.
fn cartan_row_and_lengths(t: LieType, rank: usize) -> Result<(Vec<Vec<i64>>, Vec<Rat>)> {
    let n = rank;
    let chain = |a: &mut Vec<Vec<i64>>, i: usize, j: usize, aij: i64, aji: i64| {
        a[i][j] = aij;
        a[j][i] = aji;
    };
    let mut a = vec![vec![0i64; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 2;
    }
    let mut len2 = vec![rat(2); n];
    match (t, n) {
        (LieType::A, n) if n >= 1 => {
            for i in 0..n.saturating_sub(1) {
                chain(&mut a, i, i + 1, -1, -1);
            }
        }
        (LieType::B, n) if n >= 2 => {
            for i in 0..n - 2 {
                chain(&mut a, i, i + 1, -1, -1);
            }
            chain(&mut a, n - 2, n - 1, -1, -2);
            len2[n - 1] = rat(1);
        }
        (LieType::C, n) if n >= 2 => {
            for i in 0..n - 2 {
                chain(&mut a, i, i + 1, -1, -1);
            }
            chain(&mut a, n - 2, n - 1, -2, -1);
            for l in len2.iter_mut().take(n - 1) {
                *l = rat(1);
            }
        }
        (LieType::D, n) if n >= 4 => {
            for i in 0..n - 3 {
                chain(&mut a, i, i + 1, -1, -1);
            }
            chain(&mut a, n - 3, n - 2, -1, -1);
            chain(&mut a, n - 3, n - 1, -1, -1);
        }
        (LieType::E, n) if (6..=8).contains(&n) => {
            // Bourbaki: 1-3-4-5-...-n chain, 2 attached to 4.
            chain(&mut a, 0, 2, -1, -1);
            chain(&mut a, 1, 3, -1, -1);
            for i in 2..n - 1 {
                chain(&mut a, i, i + 1, -1, -1);
            }
        }
        (LieType::F, 4) => {
            chain(&mut a, 0, 1, -1, -1);
            chain(&mut a, 1, 2, -1, -2);
            chain(&mut a, 2, 3, -1, -1);
            len2[2] = rat(1);
            len2[3] = rat(1);
        }
        (LieType::G, 2) => {
            chain(&mut a, 0, 1, -1, -3);
            len2[1] = ratio(2, 3);
        }
        (LieType::A, _) => return Err(invalid(t, n, "type A requires rank >= 1")),
        (LieType::B, _) => return Err(invalid(t, n, "type B requires rank >= 2")),
        (LieType::C, _) => return Err(invalid(t, n, "type C requires rank >= 2")),
        (LieType::D, _) => {
            return Err(invalid(
                t,
                n,
                "type D requires rank >= 4 (low-rank coincidences are not aliased)",
            ))
        }
        (LieType::E, _) => return Err(invalid(t, n, "type E requires rank in {6,7,8}")),
        (LieType::F, _) => return Err(invalid(t, n, "type F requires rank = 4")),
        (LieType::G, _) => return Err(invalid(t, n, "type G requires rank = 2")),
    }
    Ok((a, len2))
}

fn height(v: &[i64]) -> i64 {
    v.iter().sum()
}

/// Builds the root system by closing the simple roots under simple
/// reflections, then derives delta, marks, Coxeter number and the extended
/// Gram matrix. All `RootSystem` invariants are verified before returning.
pub fn build_root_system(lie_type: LieType, rank: usize) -> Result<RootSystem> {
    let (a_row, len2) = cartan_row_and_lengths(lie_type, rank)?;
    let n = rank;

    // Reflection closure: r_i(β) = β - (Σ_j a_row[i][j] β_j) e_i.
    let mut set: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut queue: Vec<Vec<i64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0i64; n];
        e[i] = 1;
        set.insert(e.clone());
        queue.push(e);
    }
    while let Some(beta) = queue.pop() {
        for i in 0..n {
            let c: i64 = (0..n).map(|j| a_row[i][j] * beta[j]).sum();
            let mut refl = beta.clone();
            refl[i] -= c;
            if set.insert(refl.clone()) {
                queue.push(refl);
            }
        }
    }
    let mut all: BTreeSet<Vec<i64>> = set.clone();
    for r in &set {
        all.insert(r.iter().map(|x| -x).collect());
    }
    let roots: Vec<Vec<i64>> = all.into_iter().collect();
    let positive_roots: Vec<Vec<i64>> = roots
        .iter()
        .filter(|r| r.iter().all(|&x| x >= 0))
        .cloned()
        .collect();
    if roots.len() != 2 * positive_roots.len() {
        return Err(invalid(lie_type, rank, "closure produced unbalanced signs"));
    }

    let delta = positive_roots
        .iter()
        .max_by_key(|r| height(r))
        .expect("nonempty root set")
        .clone();
    let marks = delta.clone();
    let coxeter = (1 + height(&delta)) as usize;

    // Finite Gram from the row Cartan matrix: ν(α_i,α_j) = a_row[i][j] len2[i] / 2.
    let gram_fin = RatMatrix::from_fn(n, n, |i, j| rat(a_row[i][j]) * &len2[i] / rat(2));
    // Extended Gram on Z, index 0 = -delta.
    let ext = n + 1;
    let gram_ext = RatMatrix::from_fn(ext, ext, |i, j| {
        let pair = |p: usize, q: usize| -> Rat {
            // ν(z_p, z_q) with z_0 = -delta, z_{k} = α_{k-1}.
            match (p, q) {
                (0, 0) => {
                    let mut s = Rat::zero();
                    for x in 0..n {
                        for y in 0..n {
                            s += rat(delta[x] * delta[y]) * &gram_fin[(x, y)];
                        }
                    }
                    s
                }
                (0, q) => {
                    let mut s = Rat::zero();
                    for x in 0..n {
                        s += rat(delta[x]) * &gram_fin[(x, q - 1)];
                    }
                    -s
                }
                (p, 0) => pairing_delta_col(&gram_fin, &delta, p - 1),
                (p, q) => gram_fin[(p - 1, q - 1)].clone(),
            }
        };
        pair(i, j)
    });

    let rs = RootSystem {
        lie_type,
        rank,
        cartan: column_cartan(&gram_fin, &len2),
        roots,
        positive_roots,
        delta,
        marks,
        coxeter,
        gram_ext,
        len2,
    };
    rs.check_invariants()
        .map_err(|msg| invalid(lie_type, rank, &msg))?;
    Ok(rs)
}

fn pairing_delta_col(gram_fin: &RatMatrix, delta: &[i64], col: usize) -> Rat {
    let mut s = Rat::zero();
    for (x, &dx) in delta.iter().enumerate() {
        s += rat(dx) * &gram_fin[(x, col)];
    }
    -s
}

/// Column-normalized Cartan matrix a[i][j] = 2 ν(α_i,α_j) / ν(α_j,α_j).
fn column_cartan(gram_fin: &RatMatrix, len2: &[Rat]) -> Vec<Vec<i64>> {
    let n = len2.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = rat(2) * &gram_fin[(i, j)] / &len2[j];
                    assert!(v.is_integer(), "Cartan entry must be integral");
                    rat_to_f64(&v).round() as i64
                })
                .collect()
        })
        .collect()
}

impl RootSystem {
    /// Number of extended simple roots, |Z| = rank + 1.
    pub fn ext_size(&self) -> usize {
        self.rank + 1
    }

    /// Marks over Z (index 0 = -delta carries n = 1).
    pub fn ext_marks(&self) -> Vec<i64> {
        let mut m = vec![1i64];
        m.extend_from_slice(&self.marks);
        m
    }

    /// Names of the extended nodes, "-d" first then "a1", "a2", ...
    pub fn ext_labels(&self) -> Vec<String> {
        let mut v = vec!["-d".to_string()];
        v.extend((1..=self.rank).map(|i| format!("a{i}")));
        v
    }

    pub fn contains_root(&self, v: &[i64]) -> bool {
        self.roots.binary_search_by(|r| r.as_slice().cmp(v)).is_ok()
    }

    /// Finite Gram matrix on Pi.
    pub fn gram_fin(&self) -> RatMatrix {
        RatMatrix::from_fn(self.rank, self.rank, |i, j| {
            self.gram_ext[(i + 1, j + 1)].clone()
        })
    }

    /// Runs every structural invariant, returning the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.rank;
        // Roots closed under negation and simple reflections.
        for r in &self.roots {
            let neg: Vec<i64> = r.iter().map(|x| -x).collect();
            if !self.contains_root(&neg) {
                return Err(format!("root set not closed under negation at {r:?}"));
            }
            for i in 0..n {
                let c: i64 = (0..n)
                    .map(|j| {
                        // row convention entry from the column matrix: a_row[i][j] = cartan[j][i]
                        self.cartan[j][i] * r[j]
                    })
                    .sum();
                let mut refl = r.clone();
                refl[i] -= c;
                if !self.contains_root(&refl) {
                    return Err(format!("root set not closed under r_{i} at {r:?}"));
                }
            }
        }
        if self.roots.len() % 2 != 0 {
            return Err("odd number of roots".into());
        }
        // Cartan entry ranges and the exact relation to the Gram matrix.
        for i in 0..n {
            if self.cartan[i][i] != 2 {
                return Err(format!("cartan[{i}][{i}] != 2"));
            }
            for j in 0..n {
                if i != j && !(-3..=0).contains(&self.cartan[i][j]) {
                    return Err(format!("cartan[{i}][{j}] out of range"));
                }
                let lhs = rat(self.cartan[i][j]) * &self.len2[j];
                let rhs = rat(2) * &self.gram_ext[(i + 1, j + 1)];
                if lhs != rhs {
                    return Err(format!("cartan[{i}][{j}] != 2ν(i,j)/ν(j,j)"));
                }
            }
        }
        if !self.gram_ext.is_symmetric() {
            return Err("gram_ext not symmetric".into());
        }
        // Long normalization: the highest root is long, ν(δ,δ) = 2.
        if self.gram_ext[(0, 0)] != rat(2) {
            return Err("ν(δ,δ) != 2".into());
        }
        // Sign structure on Z.
        let ext = self.ext_size();
        for i in 0..ext {
            if self.gram_ext[(i, i)] <= Rat::zero() {
                return Err(format!("gram_ext diagonal {i} not positive"));
            }
            for j in 0..ext {
                if i != j && self.gram_ext[(i, j)] > Rat::zero() {
                    return Err(format!("gram_ext[{i}][{j}] positive off-diagonal"));
                }
            }
        }
        // Affine kernel identity gram_ext · n = 0, exactly.
        let nvec: Vec<Rat> = self.ext_marks().iter().map(|&m| rat(m)).collect();
        let prod = self.gram_ext.mul_vec(&nvec);
        if prod.iter().any(|x| !x.is_zero()) {
            return Err("gram_ext · n != 0".into());
        }
        // Coxeter number: 1 + height(δ) = Σ_{Z} n_α.
        let r1 = 1 + height(&self.delta);
        let r2: i64 = self.ext_marks().iter().sum();
        if r1 != self.coxeter as i64 || r2 != self.coxeter as i64 {
            return Err("Coxeter number mismatch".into());
        }
        // Positive roots have nonnegative coordinates and make up half the set.
        if self.positive_roots.len() * 2 != self.roots.len() {
            return Err("positive root count mismatch".into());
        }
        if !height_grading_check(self) {
            return Err("height grading {ht ≡ 1 mod r} != Z".into());
        }
        if !extended_simple_sums_check(self) {
            return Err("extended simple sums check failed".into());
        }
        Ok(())
    }

    /// JSON document with exact fractions for the Gram matrix.
    pub fn to_json(&self) -> Value {
        let gram: Vec<Vec<String>> = (0..self.ext_size())
            .map(|i| {
                (0..self.ext_size())
                    .map(|j| rat_string(&self.gram_ext[(i, j)]))
                    .collect()
            })
            .collect();
        json!({
            "lie_type": self.lie_type.to_string(),
            "rank": self.rank,
            "cartan": self.cartan,
            "roots": self.roots,
            "positive_roots": self.positive_roots,
            "delta": self.delta,
            "marks": self.marks,
            "coxeter": self.coxeter,
            "ext_labels": self.ext_labels(),
            "gram_ext": gram,
        })
    }
}

/// Coxeter number as the sum of the extended marks.
pub fn coxeter_number(rs: &RootSystem) -> usize {
    rs.ext_marks().iter().sum::<i64>() as usize
}

/// Checks that the roots of height ≡ 1 mod r are exactly the extended
/// simple roots.
pub fn height_grading_check(rs: &RootSystem) -> bool {
    let r = rs.coxeter as i64;
    let grade_one: BTreeSet<Vec<i64>> = rs
        .roots
        .iter()
        .filter(|root| height(root).rem_euclid(r) == 1)
        .cloned()
        .collect();
    let mut expected: BTreeSet<Vec<i64>> = BTreeSet::new();
    expected.insert(rs.delta.iter().map(|x| -x).collect());
    for i in 0..rs.rank {
        let mut e = vec![0i64; rs.rank];
        e[i] = 1;
        expected.insert(e);
    }
    grade_one == expected
}

/// Root-level content of the commutator lemma: differences of distinct
/// extended simple roots are never roots, and no positive root can be
/// raised past delta.
pub fn extended_simple_sums_check(rs: &RootSystem) -> bool {
    let n = rs.rank;
    let mut zset: Vec<Vec<i64>> = vec![rs.delta.iter().map(|x| -x).collect()];
    for i in 0..n {
        let mut e = vec![0i64; n];
        e[i] = 1;
        zset.push(e);
    }
    for (i, a) in zset.iter().enumerate() {
        for (j, b) in zset.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            if rs.contains_root(&diff) {
                return false;
            }
        }
    }
    for p in &rs.positive_roots {
        let sum: Vec<i64> = p.iter().zip(&rs.delta).map(|(x, d)| x + d).collect();
        if rs.contains_root(&sum) {
            return false;
        }
    }
    true
}

/// Polystability inequality for the C*-fixed limit point: 2-2g ≤ d_i and
/// (R d)_i < 0 with R the inverse finite Gram matrix. Returns the verdict
/// together with the exact vector R d.
pub fn polystability_degree_check(rs: &RootSystem, deg: &DegreeData) -> (bool, Vec<Rat>) {
    assert_eq!(deg.degrees.len(), rs.rank, "degree vector length");
    let gram = rs.gram_fin();
    let inv = gram.inverse().expect("finite Gram matrix is invertible");
    let d: Vec<Rat> = deg.degrees.iter().map(|&x| rat(x)).collect();
    let rd = inv.mul_vec(&d);
    let bound = rat(2 - 2 * deg.genus);
    let ok = deg.degrees.iter().all(|&di| bound <= rat(di))
        && rd.iter().all(|x| *x < Rat::zero());
    (ok, rd)
}
