//! Affine (generalized) Cartan matrices: extended Dynkin diagrams of all
//! simple types, the diagram involutions that fold them, and exact kernel
//! vectors.
//!
//! Stored matrices follow the Kac row convention `A[i][j] = 2 ν(z_i,z_j) /
//! ν(z_i,z_i)`, so the right kernel of an extended matrix is the marks
//! vector. The Toda system attached to an `AffineSystem` reads off the
//! transpose (see [`crate::toda`]); its kernel is the stored left kernel,
//! which is what the path-ordering lemma divides by.

use num::traits::Zero;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ratlin::{rat, rat_string, Rat, RatMatrix};
use crate::rootsys::{LieType, RootSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Path,
    Prong,
    Cycle,
    Other,
}

/// A generalized Cartan matrix of affine type with its kernel vectors.
#[derive(Debug, Clone)]
pub struct AffineSystem {
    pub size: usize,
    /// Row-normalized generalized Cartan matrix.
    pub a: Vec<Vec<i64>>,
    /// Positive right kernel, normalized so the smallest entry is 1.
    pub right_kernel: Vec<Rat>,
    /// Positive left kernel, normalized so the smallest entry is 1.
    pub left_kernel: Vec<Rat>,
    pub shape: Shape,
    /// Node names carrying fold provenance ("a1|a5" for a merged orbit).
    pub node_labels: Vec<String>,
    /// Set when this system was produced by [`fold`].
    pub provenance: Option<FoldProvenance>,
}

/// How folded nodes map back to unfolded ones.
#[derive(Debug, Clone)]
pub struct FoldProvenance {
    /// Unfolded node indices per folded node.
    pub orbits: Vec<Vec<usize>>,
    /// Marks the merged self-adjacent orbit of an even-A fold, which
    /// carries the e' = e/2 substitution.
    pub half: Vec<bool>,
}

/// Involutive diagram symmetry of an extended system; node 0 (-delta) is
/// always fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Involution {
    pub perm: Vec<usize>,
}

impl Involution {
    pub fn identity(size: usize) -> Self {
        Self { perm: (0..size).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }
}

fn is_gcm(a: &[Vec<i64>]) -> std::result::Result<(), String> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err("matrix not square".into());
        }
        if row[i] != 2 {
            return Err(format!("diagonal entry {i} is {} (expected 2)", row[i]));
        }
        for j in 0..n {
            if i != j {
                if row[j] > 0 {
                    return Err(format!("positive off-diagonal at ({i},{j})"));
                }
                if (row[j] == 0) != (a[j][i] == 0) {
                    return Err(format!("zero pattern not symmetric at ({i},{j})"));
                }
            }
        }
    }
    Ok(())
}

/// Exact right and left kernels of a generalized Cartan matrix of affine
/// type, both strictly positive and normalized so the smallest entry is 1.
pub fn affine_kernels(a: &[Vec<i64>]) -> Result<(Vec<Rat>, Vec<Rat>)> {
    is_gcm(a).map_err(Error::NotAffine)?;
    let m = RatMatrix::from_i64(a);
    let right = one_dim_positive(m.nullspace())?;
    let left = one_dim_positive(m.transpose().nullspace())?;
    Ok((right, left))
}

fn one_dim_positive(ns: Vec<Vec<Rat>>) -> Result<Vec<Rat>> {
    if ns.len() != 1 {
        return Err(Error::NotAffine(format!(
            "kernel dimension is {} (expected 1)",
            ns.len()
        )));
    }
    let mut v = ns.into_iter().next().unwrap();
    if v.iter().any(|x| x.is_zero()) {
        return Err(Error::NotAffine("kernel vector has zero entries".into()));
    }
    if v[0] < Rat::zero() {
        for x in v.iter_mut() {
            *x = -x.clone();
        }
    }
    if v.iter().any(|x| *x <= Rat::zero()) {
        return Err(Error::NotAffine("kernel vector is not strictly positive".into()));
    }
    let min = v.iter().min().expect("nonempty").clone();
    Ok(v.into_iter().map(|x| x / min.clone()).collect())
}

fn classify_shape(a: &[Vec<i64>]) -> Shape {
    let n = a.len();
    let deg: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && a[i][j] != 0).count())
        .collect();
    let edges: usize = deg.iter().sum::<usize>() / 2;
    // Connectivity.
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if j != i && a[i][j] != 0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if !seen.iter().all(|&s| s) {
        return Shape::Other;
    }
    let maxdeg = deg.iter().copied().max().unwrap_or(0);
    if edges == n && maxdeg == 2 {
        Shape::Cycle
    } else if edges == n - 1 && maxdeg <= 2 {
        Shape::Path
    } else if edges == n - 1 {
        Shape::Prong
    } else {
        Shape::Other
    }
}

fn build_affine(a: Vec<Vec<i64>>, labels: Vec<String>, provenance: Option<FoldProvenance>) -> Result<AffineSystem> {
    let (right, left) = affine_kernels(&a)?;
    let shape = classify_shape(&a);
    Ok(AffineSystem {
        size: a.len(),
        a,
        right_kernel: right,
        left_kernel: left,
        shape,
        node_labels: labels,
        provenance,
    })
}

/// Extended affine Cartan matrix of a root system; the right kernel is
/// verified to equal the marks vector.
pub fn extended_affine(rs: &RootSystem) -> AffineSystem {
    let ext = rs.ext_size();
    let mut a = vec![vec![0i64; ext]; ext];
    for i in 0..ext {
        for j in 0..ext {
            let v = rat(2) * &rs.gram_ext[(i, j)] / &rs.gram_ext[(i, i)];
            assert!(v.is_integer(), "affine Cartan entry must be integral");
            a[i][j] = crate::ratlin::rat_to_f64(&v).round() as i64;
        }
    }
    let sys = build_affine(a, rs.ext_labels(), None)
        .expect("extended diagram of a simple type is affine");
    let marks: Vec<Rat> = rs.ext_marks().iter().map(|&m| rat(m)).collect();
    assert_eq!(sys.right_kernel, marks, "right kernel must equal the marks");
    sys
}

/// Diagram involution used for folding: the flip for A_n (n >= 2) and E6,
/// the identity otherwise. D_{2n+1} carries a nontrivial involution in the
/// theory, but no fold in scope consumes it, so requesting it is an error.
pub fn sigma0(lie_type: LieType, rank: usize) -> Result<Involution> {
    // Validates the (type, rank) pair as a side effect.
    let rs = crate::rootsys::build_root_system(lie_type, rank)?;
    let ext = rs.ext_size();
    match lie_type {
        LieType::A if rank >= 2 => {
            let mut perm = vec![0usize; ext];
            for i in 1..=rank {
                perm[i] = rank + 1 - i;
            }
            Ok(Involution { perm })
        }
        LieType::E if rank == 6 => {
            // Bourbaki flip: a1<->a6, a3<->a5; a2, a4 and -delta fixed.
            let mut perm: Vec<usize> = (0..ext).collect();
            perm.swap(1, 6);
            perm.swap(3, 5);
            Ok(Involution { perm })
        }
        LieType::D if rank % 2 == 1 => Err(Error::FoldingOutOfScope(
            format!("D{rank}"),
            "odd D carries a nontrivial involution but no fold in scope".into(),
        )),
        _ => Ok(Involution::identity(ext)),
    }
}

/// Folds an affine system along an involutive diagram symmetry.
///
/// Orbits merge; the folded entry at (O, O') sums the rows of O at any
/// column representative of O'. A merged orbit whose two nodes are
/// adjacent (even-A folds) gets its row doubled, which is the matrix form
/// of the e' = e/2 substitution. The folded right kernel then equals the
/// orbit sums of the unfolded marks, and the left kernel the orbit-wise
/// identified marks with the extra 1/2 on the self-adjacent orbit.
pub fn fold(ext: &AffineSystem, inv: &Involution) -> Result<AffineSystem> {
    let n = ext.size;
    if inv.perm.len() != n {
        return Err(Error::NotAutomorphism(format!(
            "permutation has {} nodes, diagram has {n}",
            inv.perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for (i, &p) in inv.perm.iter().enumerate() {
        if p >= n || inv.perm[p] != i {
            return Err(Error::NotAutomorphism(format!("not an involution at node {i}")));
        }
        seen[p] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::NotAutomorphism("not a permutation".into()));
    }
    if inv.perm[0] != 0 {
        return Err(Error::NotAutomorphism("-delta must be fixed".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if ext.a[inv.perm[i]][inv.perm[j]] != ext.a[i][j] {
                return Err(Error::NotAutomorphism(format!(
                    "Cartan entry not preserved at ({i},{j})"
                )));
            }
        }
    }

    // Orbits, ordered by minimal element.
    let mut orbit_of = vec![usize::MAX; n];
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if orbit_of[i] == usize::MAX {
            let mut orb = vec![i];
            if inv.perm[i] != i {
                orb.push(inv.perm[i]);
            }
            for &k in &orb {
                orbit_of[k] = orbits.len();
            }
            orbits.push(orb);
        }
    }
    let m = orbits.len();
    let half: Vec<bool> = orbits
        .iter()
        .map(|orb| orb.len() == 2 && ext.a[orb[0]][orb[1]] != 0)
        .collect();

    let mut a = vec![vec![0i64; m]; m];
    for (oi, orb_i) in orbits.iter().enumerate() {
        for (oj, orb_j) in orbits.iter().enumerate() {
            let sums: Vec<i64> = orb_j
                .iter()
                .map(|&j| orb_i.iter().map(|&i| ext.a[i][j]).sum())
                .collect();
            assert!(
                sums.windows(2).all(|w| w[0] == w[1]),
                "row-orbit sums must not depend on the column representative"
            );
            a[oi][oj] = sums[0] * if half[oi] { 2 } else { 1 };
        }
    }

    // Reorder along the path when the fold produced one, starting at the
    // orbit containing -delta.
    let order = path_order(&a).unwrap_or_else(|| (0..m).collect());
    let a = permute(&a, &order);
    let orbits: Vec<Vec<usize>> = order.iter().map(|&o| orbits[o].clone()).collect();
    let half: Vec<bool> = order.iter().map(|&o| half[o]).collect();
    let labels: Vec<String> = orbits
        .iter()
        .map(|orb| {
            orb.iter()
                .map(|&i| ext.node_labels[i].clone())
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect();

    let sys = build_affine(a, labels, Some(FoldProvenance { orbits: orbits.clone(), half }))?;

    // Folded right kernel = orbit sums of the unfolded right kernel.
    let expected: Vec<Rat> = orbits
        .iter()
        .map(|orb| {
            orb.iter()
                .map(|&i| ext.right_kernel[i].clone())
                .fold(Rat::zero(), |x, y| x + y)
        })
        .collect();
    let min = expected.iter().min().expect("nonempty").clone();
    let expected: Vec<Rat> = expected.into_iter().map(|x| x / min.clone()).collect();
    assert_eq!(sys.right_kernel, expected, "folded kernel must be the orbit sums");
    Ok(sys)
}

/// Consecutive ordering of a path graph starting from node 0 if node 0 is
/// an endpoint and the support graph is a path.
fn path_order(a: &[Vec<i64>]) -> Option<Vec<usize>> {
    let n = a.len();
    if classify_shape(a) != Shape::Path {
        return None;
    }
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| j != i && a[i][j] != 0).collect()
    };
    if neighbors(0).len() != 1 {
        return None;
    }
    let mut order = vec![0usize];
    let mut prev = usize::MAX;
    let mut cur = 0usize;
    while order.len() < n {
        let next = neighbors(cur).into_iter().find(|&j| j != prev)?;
        order.push(next);
        prev = cur;
        cur = next;
    }
    Some(order)
}

fn permute(a: &[Vec<i64>], order: &[usize]) -> Vec<Vec<i64>> {
    let m = order.len();
    let mut out = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in 0..m {
            out[i][j] = a[order[i]][order[j]];
        }
    }
    out
}

impl AffineSystem {
    /// Coefficient matrix of the Toda system attached to this diagram:
    /// the transpose of the stored matrix, as floats.
    pub fn system_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.a[j][i] as f64).collect())
            .collect()
    }

    /// Denominators of the path-ordering chain w_i/u_i: the positive kernel
    /// of the system matrix, i.e. the stored left kernel, as floats.
    pub fn ordering_denominators(&self) -> Vec<f64> {
        self.left_kernel.iter().map(crate::ratlin::rat_to_f64).collect()
    }

    /// Weights annihilating the system matrix from the left (used for the
    /// integral compatibility identities): the stored right kernel.
    pub fn compatibility_weights(&self) -> Vec<f64> {
        self.right_kernel.iter().map(crate::ratlin::rat_to_f64).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "size": self.size,
            "cartan": self.a,
            "toda_system": self.system_matrix(),
            "right_kernel": self.right_kernel.iter().map(rat_string).collect::<Vec<_>>(),
            "left_kernel": self.left_kernel.iter().map(rat_string).collect::<Vec<_>>(),
            "shape": self.shape,
            "node_labels": self.node_labels,
            "orbits": self.provenance.as_ref().map(|p| p.orbits.clone()),
            "half_nodes": self.provenance.as_ref().map(|p| p.half.clone()),
        })
    }
}
