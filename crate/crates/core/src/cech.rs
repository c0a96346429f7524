//! Čech Z₂ lifting obstruction for projective bundles of rank 2.
//!
//! Transition lifts are constant `SL(2, R)` matrices on the edges of a nerve.
//! Around each triangle their product is `±I`; the signs form a 2-cocycle `z`
//! whose class decides whether the lifts can be corrected by signs into a
//! genuine `SL(2)` cocycle.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};

pub type Mat2 = [[f64; 2]; 2];

pub const DET_TOLERANCE: f64 = 1e-9;
pub const CENTER_TOLERANCE: f64 = 1e-9;

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Inverse of a determinant-one matrix.
pub fn sl2_inverse(a: &Mat2) -> Mat2 {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}

pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

fn max_dist(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            m = m.max((a[r][c] - b[r][c]).abs());
        }
    }
    m
}

fn negate(a: &Mat2) -> Mat2 {
    [[-a[0][0], -a[0][1]], [-a[1][0], -a[1][1]]]
}

/// Nerve of a cover, with simplices stored in increasing vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct Nerve {
    pub vertices: Vec<String>,
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub tetrahedra: Vec<[usize; 4]>,
    edge_index: HashMap<[usize; 2], usize>,
    triangle_index: HashMap<[usize; 3], usize>,
}

impl Nerve {
    /// Simplices may be listed in any vertex order; they are sorted here.
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<[usize; 2]>,
        triangles: Vec<[usize; 3]>,
        tetrahedra: Vec<[usize; 4]>,
    ) -> Result<Self> {
        let n = vertices.len();
        let bad = |msg: String| Err(GbxError::Cech(msg));
        let mut edge_index = HashMap::new();
        let mut sorted_edges = Vec::new();
        for e in edges {
            let mut s = e;
            s.sort_unstable();
            if s[0] == s[1] || s[1] >= n {
                return bad(format!("invalid edge {e:?}"));
            }
            if edge_index.insert(s, sorted_edges.len()).is_some() {
                return bad(format!("duplicate edge {s:?}"));
            }
            sorted_edges.push(s);
        }
        let mut triangle_index = HashMap::new();
        let mut sorted_triangles = Vec::new();
        for t in triangles {
            let mut s = t;
            s.sort_unstable();
            if s[0] == s[1] || s[1] == s[2] || s[2] >= n {
                return bad(format!("invalid triangle {t:?}"));
            }
            for f in [[s[0], s[1]], [s[1], s[2]], [s[0], s[2]]] {
                if !edge_index.contains_key(&f) {
                    return bad(format!("triangle {s:?} is missing its edge {f:?}"));
                }
            }
            if triangle_index.insert(s, sorted_triangles.len()).is_some() {
                return bad(format!("duplicate triangle {s:?}"));
            }
            sorted_triangles.push(s);
        }
        let mut sorted_tetra = Vec::new();
        for t in tetrahedra {
            let mut s = t;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) || s[3] >= n {
                return bad(format!("invalid tetrahedron {t:?}"));
            }
            for f in tetra_faces(s) {
                if !triangle_index.contains_key(&f) {
                    return bad(format!("tetrahedron {s:?} is missing its face {f:?}"));
                }
            }
            if sorted_tetra.contains(&s) {
                return bad(format!("duplicate tetrahedron {s:?}"));
            }
            sorted_tetra.push(s);
        }
        Ok(Nerve {
            vertices,
            edges: sorted_edges,
            triangles: sorted_triangles,
            tetrahedra: sorted_tetra,
            edge_index,
            triangle_index,
        })
    }

    /// Nerve with all faces of the given triangles (and optional 3-cells).
    pub fn from_triangles(
        n_vertices: usize,
        triangles: &[[usize; 3]],
        tetrahedra: &[[usize; 4]],
    ) -> Result<Self> {
        let mut edges: Vec<[usize; 2]> = Vec::new();
        for t in triangles {
            let mut s = *t;
            s.sort_unstable();
            for e in [[s[0], s[1]], [s[1], s[2]], [s[0], s[2]]] {
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
        edges.sort_unstable();
        let vertices = (0..n_vertices).map(|i| format!("U{i}")).collect();
        Nerve::new(vertices, edges, triangles.to_vec(), tetrahedra.to_vec())
    }

    /// Boundary of a tetrahedron, optionally with the 3-cell filled in.
    pub fn tetrahedron(filled: bool) -> Self {
        let tris = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
        let cells: &[[usize; 4]] = if filled { &[[0, 1, 2, 3]] } else { &[] };
        Nerve::from_triangles(4, &tris, cells).expect("valid nerve")
    }

    /// Boundary of the octahedron, a second triangulated sphere.
    pub fn octahedron() -> Self {
        // poles 0 and 5, equator 1-2-3-4
        let tris = [
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 1, 4],
            [1, 2, 5],
            [2, 3, 5],
            [3, 4, 5],
            [1, 4, 5],
        ];
        Nerve::from_triangles(6, &tris, &[]).expect("valid nerve")
    }

    /// Six-vertex triangulation of the real projective plane.
    pub fn projective_plane() -> Self {
        let tris = [
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 1, 5],
            [1, 2, 4],
            [2, 3, 5],
            [1, 3, 4],
            [2, 4, 5],
            [1, 3, 5],
        ];
        Nerve::from_triangles(6, &tris, &[]).expect("valid nerve")
    }

    pub fn edge_position(&self, i: usize, j: usize) -> Option<usize> {
        let e = if i < j { [i, j] } else { [j, i] };
        self.edge_index.get(&e).copied()
    }

    pub fn triangle_position(&self, t: [usize; 3]) -> Option<usize> {
        let mut s = t;
        s.sort_unstable();
        self.triangle_index.get(&s).copied()
    }
}

fn tetra_faces(s: [usize; 4]) -> [[usize; 3]; 4] {
    [
        [s[1], s[2], s[3]],
        [s[0], s[2], s[3]],
        [s[0], s[1], s[3]],
        [s[0], s[1], s[2]],
    ]
}

/// Constant lifts `g̃_ij`, stored for `i < j`; `g̃_ji = g̃_ij⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftAssignment {
    lifts: Vec<Mat2>,
}

impl LiftAssignment {
    /// `matrices[e]` is the lift on `nerve.edges[e]` in its canonical order.
    pub fn new(nerve: &Nerve, matrices: Vec<Mat2>) -> Result<Self> {
        if matrices.len() != nerve.edges.len() {
            return Err(GbxError::Cech(format!(
                "{} lifts for {} edges",
                matrices.len(),
                nerve.edges.len()
            )));
        }
        for (e, m) in nerve.edges.iter().zip(&matrices) {
            check_lift(*e, m)?;
        }
        Ok(LiftAssignment { lifts: matrices })
    }

    /// Builds lifts from `(i, j, g̃_ij)` in either orientation. If both
    /// orientations of an edge are given they must be mutually inverse.
    pub fn from_oriented(nerve: &Nerve, entries: &[(usize, usize, Mat2)]) -> Result<Self> {
        let mut slots: Vec<Option<Mat2>> = vec![None; nerve.edges.len()];
        for &(i, j, m) in entries {
            check_lift([i, j], &m)?;
            let e = nerve.edge_position(i, j).ok_or_else(|| {
                GbxError::Cech(format!("lift given on ({i}, {j}), which is not an edge"))
            })?;
            let canonical = if i < j { m } else { sl2_inverse(&m) };
            match slots[e] {
                Some(prev) if max_dist(&prev, &canonical) > DET_TOLERANCE => {
                    return Err(GbxError::Cech(format!(
                        "lifts on ({i}, {j}) and its reverse are not mutually inverse"
                    )))
                }
                Some(_) => {}
                None => slots[e] = Some(canonical),
            }
        }
        let lifts = slots
            .into_iter()
            .enumerate()
            .map(|(e, m)| {
                m.ok_or_else(|| GbxError::Cech(format!("edge {:?} has no lift", nerve.edges[e])))
            })
            .collect::<Result<_>>()?;
        Ok(LiftAssignment { lifts })
    }

    /// `g̃_ij` for an ordered pair.
    pub fn get(&self, nerve: &Nerve, i: usize, j: usize) -> Option<Mat2> {
        let m = self.lifts[nerve.edge_position(i, j)?];
        Some(if i < j { m } else { sl2_inverse(&m) })
    }

    pub fn canonical(&self) -> &[Mat2] {
        &self.lifts
    }

    /// Copy with the lift on canonical edge `e` multiplied by `-I`.
    pub fn flipped(&self, e: usize) -> Self {
        let mut lifts = self.lifts.clone();
        lifts[e] = negate(&lifts[e]);
        LiftAssignment { lifts }
    }
}

fn check_lift(e: [usize; 2], m: &Mat2) -> Result<()> {
    let d = det(m);
    if !d.is_finite() {
        return Err(GbxError::Cech(format!("lift on {e:?} is not finite")));
    }
    if d < 0.0 {
        return Err(GbxError::Cech(format!(
            "non-orientable lift on {e:?} (det = {d})"
        )));
    }
    if (d - 1.0).abs() > DET_TOLERANCE {
        return Err(GbxError::Cech(format!(
            "lift on {e:?} has det = {d}, expected 1"
        )));
    }
    Ok(())
}

/// Normalized Z₂-valued cochain; `values[s]` belongs to the `s`-th simplex
/// of the nerve in the cochain's degree (edges for 1, triangles for 2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Z2Cochain {
    pub degree: usize,
    pub values: Vec<u8>,
}

impl Z2Cochain {
    pub fn zero(nerve: &Nerve, degree: usize) -> Self {
        let n = match degree {
            1 => nerve.edges.len(),
            2 => nerve.triangles.len(),
            _ => 0,
        };
        Z2Cochain {
            degree,
            values: vec![0; n],
        }
    }

    /// Value on an arbitrary ordering of a simplex; zero on degenerate tuples.
    /// Over Z₂ the value does not depend on the ordering.
    pub fn value(&self, nerve: &Nerve, simplex: &[usize]) -> Option<u8> {
        let mut s = simplex.to_vec();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Some(0);
        }
        let pos = match (self.degree, s.as_slice()) {
            (1, &[i, j]) => nerve.edge_position(i, j),
            (2, &[i, j, k]) => nerve.triangle_position([i, j, k]),
            _ => None,
        }?;
        Some(self.values[pos])
    }

    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }
}

/// `z_ijk = g̃_ij g̃_jk g̃_ki` on every triangle, classified as `±I`.
pub fn build_cocycle(nerve: &Nerve, lifts: &LiftAssignment) -> Result<Z2Cochain> {
    let mut values = Vec::with_capacity(nerve.triangles.len());
    for &[i, j, k] in &nerve.triangles {
        let p = triangle_product(nerve, lifts, i, j, k);
        values.push(classify_center(&p).ok_or_else(|| {
            GbxError::Cech(format!(
                "lifts are not projective-consistent: product on ({i}, {j}, {k}) is {p:?}, not ±I"
            ))
        })?);
    }
    Ok(Z2Cochain { degree: 2, values })
}

fn triangle_product(nerve: &Nerve, lifts: &LiftAssignment, i: usize, j: usize, k: usize) -> Mat2 {
    let get = |a, b| {
        lifts
            .get(nerve, a, b)
            .expect("triangle edges are in the nerve")
    };
    mat_mul(&mat_mul(&get(i, j), &get(j, k)), &get(k, i))
}

fn classify_center(p: &Mat2) -> Option<u8> {
    if max_dist(p, &IDENTITY) < CENTER_TOLERANCE {
        Some(0)
    } else if max_dist(p, &negate(&IDENTITY)) < CENTER_TOLERANCE {
        Some(1)
    } else {
        None
    }
}

/// `δz = 0` on every listed tetrahedron.
pub fn check_cocycle(z: &Z2Cochain, nerve: &Nerve) -> bool {
    if z.degree != 2 || z.values.len() != nerve.triangles.len() {
        return false;
    }
    nerve.tetrahedra.iter().all(|&t| {
        tetra_faces(t)
            .iter()
            .map(|f| z.values[nerve.triangle_position(*f).expect("face present")])
            .fold(0, |a, b| a ^ b)
            == 0
    })
}

/// Bitset row of a GF(2) system with a record of which equations produced it.
#[derive(Clone)]
struct Row {
    coeffs: Vec<u64>,
    rhs: u8,
    combo: Vec<u64>,
}

fn bit(v: &[u64], k: usize) -> bool {
    v[k / 64] >> (k % 64) & 1 == 1
}

fn set_bit(v: &mut [u64], k: usize) {
    v[k / 64] |= 1 << (k % 64);
}

fn xor_into(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

enum Solution {
    Solved(Vec<u8>),
    /// Indices of equations whose sum reads `0 = 1`.
    Inconsistent(Vec<usize>),
}

/// Gaussian elimination over GF(2) for `Σ_{e ∈ eq} u_e = rhs`.
fn solve_gf2(n_vars: usize, equations: &[(Vec<usize>, u8)]) -> Solution {
    let w = n_vars.div_ceil(64).max(1);
    let cw = equations.len().div_ceil(64).max(1);
    let mut rows: Vec<Row> = equations
        .iter()
        .enumerate()
        .map(|(r, (vars, rhs))| {
            let mut coeffs = vec![0u64; w];
            for &v in vars {
                coeffs[v / 64] ^= 1 << (v % 64);
            }
            let mut combo = vec![0u64; cw];
            set_bit(&mut combo, r);
            Row {
                coeffs,
                rhs: *rhs,
                combo,
            }
        })
        .collect();
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..n_vars {
        let Some(p) = (next..rows.len()).find(|&r| bit(&rows[r].coeffs, col)) else {
            continue;
        };
        rows.swap(next, p);
        let pivot = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && bit(&row.coeffs, col) {
                xor_into(&mut row.coeffs, &pivot.coeffs);
                xor_into(&mut row.combo, &pivot.combo);
                row.rhs ^= pivot.rhs;
            }
        }
        pivots.push(col);
        next += 1;
    }
    if let Some(bad) = rows[next..].iter().find(|r| r.rhs == 1) {
        let used = (0..equations.len())
            .filter(|&k| bit(&bad.combo, k))
            .collect();
        return Solution::Inconsistent(used);
    }
    let mut u = vec![0u8; n_vars];
    for (r, &col) in pivots.iter().enumerate() {
        u[col] = rows[r].rhs;
    }
    Solution::Solved(u)
}

fn triangle_equations(nerve: &Nerve, z: &Z2Cochain) -> Vec<(Vec<usize>, u8)> {
    nerve
        .triangles
        .iter()
        .zip(&z.values)
        .map(|(&[i, j, k], &zv)| {
            let e = |a, b| {
                nerve
                    .edge_position(a, b)
                    .expect("triangle edges are in the nerve")
            };
            (vec![e(i, j), e(j, k), e(i, k)], zv)
        })
        .collect()
}

/// `δu` of a 1-cochain, on every triangle.
pub fn coboundary(nerve: &Nerve, u: &Z2Cochain) -> Z2Cochain {
    let values = nerve
        .triangles
        .iter()
        .map(|&[i, j, k]| {
            let e = |a, b| u.values[nerve.edge_position(a, b).expect("edge present")];
            e(i, j) ^ e(j, k) ^ e(i, k)
        })
        .collect();
    Z2Cochain { degree: 2, values }
}

fn require_cocycle(z: &Z2Cochain, nerve: &Nerve) -> Result<()> {
    if z.degree != 2 || z.values.len() != nerve.triangles.len() {
        return Err(GbxError::Cech(
            "cochain does not match the nerve's triangles".into(),
        ));
    }
    if !check_cocycle(z, nerve) {
        return Err(GbxError::Cech(
            "cochain is not a cocycle (δz ≠ 0 on some tetrahedron)".into(),
        ));
    }
    Ok(())
}

/// Some `u` with `δu = z`, or `None` when `z` is not a coboundary.
pub fn solve_coboundary(z: &Z2Cochain, nerve: &Nerve) -> Result<Option<Z2Cochain>> {
    require_cocycle(z, nerve)?;
    Ok(
        match solve_gf2(nerve.edges.len(), &triangle_equations(nerve, z)) {
            Solution::Solved(values) => Some(Z2Cochain { degree: 1, values }),
            Solution::Inconsistent(_) => None,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Obstruction {
    Trivial {
        /// Edges `[i, j]` with `u_ij = 1`.
        witness: Vec<[usize; 2]>,
        /// Sign-corrected lifts per canonical edge, when lifts were supplied.
        #[serde(skip_serializing_if = "Option::is_none")]
        corrected_lifts: Option<Vec<CorrectedLift>>,
        /// Largest entry distance of a corrected triangle product from `I`.
        #[serde(skip_serializing_if = "Option::is_none")]
        max_residual: Option<f64>,
    },
    Nontrivial {
        /// Triangles whose equations are jointly unsatisfiable, minimal under deletion.
        certificate: Vec<[usize; 3]>,
        certificate_xor: u8,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedLift {
    pub i: usize,
    pub j: usize,
    pub matrix: Mat2,
}

impl Obstruction {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Obstruction::Trivial { .. })
    }
}

/// Decides the class of `z`. With lifts, a trivial class also yields the
/// corrected lifts `g̃_ij (-1)^{u_ij}`, re-multiplied around every triangle.
pub fn obstruction_class(
    z: &Z2Cochain,
    nerve: &Nerve,
    lifts: Option<&LiftAssignment>,
) -> Result<Obstruction> {
    require_cocycle(z, nerve)?;
    let equations = triangle_equations(nerve, z);
    match solve_gf2(nerve.edges.len(), &equations) {
        Solution::Solved(u) => {
            let witness = nerve
                .edges
                .iter()
                .zip(&u)
                .filter(|(_, &x)| x == 1)
                .map(|(e, _)| *e)
                .collect();
            let (corrected_lifts, max_residual) = match lifts {
                Some(l) => {
                    let fixed: Vec<Mat2> = l
                        .canonical()
                        .iter()
                        .zip(&u)
                        .map(|(m, &x)| if x == 1 { negate(m) } else { *m })
                        .collect();
                    let fixed = LiftAssignment { lifts: fixed };
                    let residual = nerve
                        .triangles
                        .iter()
                        .map(|&[i, j, k]| {
                            max_dist(&triangle_product(nerve, &fixed, i, j, k), &IDENTITY)
                        })
                        .fold(0.0, f64::max);
                    if residual >= CENTER_TOLERANCE {
                        return Err(GbxError::Cech(format!(
                            "corrected lifts miss the identity by {residual:e}"
                        )));
                    }
                    let out = nerve
                        .edges
                        .iter()
                        .zip(fixed.lifts)
                        .map(|(&[i, j], matrix)| CorrectedLift { i, j, matrix })
                        .collect();
                    (Some(out), Some(residual))
                }
                None => (None, None),
            };
            Ok(Obstruction::Trivial {
                witness,
                corrected_lifts,
                max_residual,
            })
        }
        Solution::Inconsistent(mut used) => {
            // greedy deletion to a minimal unsatisfiable subsystem
            let mut k = 0;
            while k < used.len() {
                let trial: Vec<usize> = used
                    .iter()
                    .enumerate()
                    .filter(|&(x, _)| x != k)
                    .map(|(_, &r)| r)
                    .collect();
                let sub: Vec<(Vec<usize>, u8)> =
                    trial.iter().map(|&r| equations[r].clone()).collect();
                if matches!(
                    solve_gf2(nerve.edges.len(), &sub),
                    Solution::Inconsistent(_)
                ) {
                    used = trial;
                } else {
                    k += 1;
                }
            }
            let certificate: Vec<[usize; 3]> = used.iter().map(|&r| nerve.triangles[r]).collect();
            let certificate_xor = used.iter().fold(0, |a, &r| a ^ z.values[r]);
            Ok(Obstruction::Nontrivial {
                certificate,
                certificate_xor,
            })
        }
    }
}

/// JSON form of a nerve with lifts or with a precomputed cochain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CechDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeEntry>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default)]
    pub tetrahedra: Vec<[usize; 4]>,
    /// Triangle values used instead of lifts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cochain: Option<Vec<CochainEntry>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Mat2>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CochainEntry {
    pub triangle: [usize; 3],
    pub value: u8,
}

/// Result of a Čech run: the cocycle and its class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CechReport {
    pub schema: String,
    pub name: String,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub tetrahedra: usize,
    pub cocycle: BTreeMap<String, u8>,
    pub is_cocycle: bool,
    pub obstruction: Obstruction,
}

impl CechDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Nerve, optional lifts and the degree-2 cochain to classify.
    pub fn load(&self) -> Result<(Nerve, Option<LiftAssignment>, Z2Cochain)> {
        let mut edges: Vec<[usize; 2]> = Vec::new();
        for e in &self.edges {
            let s = if e.i < e.j { [e.i, e.j] } else { [e.j, e.i] };
            if !edges.contains(&s) {
                edges.push(s);
            }
        }
        let nerve = Nerve::new(
            self.vertices.clone(),
            edges,
            self.triangles.clone(),
            self.tetrahedra.clone(),
        )?;
        match &self.cochain {
            Some(entries) => {
                let mut z = Z2Cochain::zero(&nerve, 2);
                for c in entries {
                    if c.value > 1 {
                        return Err(GbxError::Cech(format!(
                            "cochain value {} is not 0 or 1",
                            c.value
                        )));
                    }
                    let pos = nerve.triangle_position(c.triangle).ok_or_else(|| {
                        GbxError::Cech(format!("{:?} is not a triangle", c.triangle))
                    })?;
                    z.values[pos] = c.value;
                }
                Ok((nerve, None, z))
            }
            None => {
                let entries = self
                    .edges
                    .iter()
                    .map(|e| {
                        e.matrix.map(|m| (e.i, e.j, m)).ok_or_else(|| {
                            GbxError::Cech(format!("edge ({}, {}) has no matrix", e.i, e.j))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lifts = LiftAssignment::from_oriented(&nerve, &entries)?;
                let z = build_cocycle(&nerve, &lifts)?;
                Ok((nerve, Some(lifts), z))
            }
        }
    }

    pub fn from_lifts(nerve: &Nerve, lifts: &LiftAssignment) -> Self {
        CechDocument {
            vertices: nerve.vertices.clone(),
            edges: nerve
                .edges
                .iter()
                .zip(lifts.canonical())
                .map(|(&[i, j], m)| EdgeEntry {
                    i,
                    j,
                    matrix: Some(*m),
                })
                .collect(),
            triangles: nerve.triangles.clone(),
            tetrahedra: nerve.tetrahedra.clone(),
            cochain: None,
        }
    }
}

/// Loads a document, builds the cocycle and classifies it.
pub fn run_document(name: &str, doc: &CechDocument) -> Result<CechReport> {
    let (nerve, lifts, z) = doc.load()?;
    let is_cocycle = check_cocycle(&z, &nerve);
    let obstruction = obstruction_class(&z, &nerve, lifts.as_ref())?;
    let cocycle = nerve
        .triangles
        .iter()
        .zip(&z.values)
        .map(|(t, &v)| (format!("{}-{}-{}", t[0], t[1], t[2]), v))
        .collect();
    Ok(CechReport {
        schema: crate::verify::REPORT_SCHEMA.into(),
        name: name.into(),
        vertices: nerve.vertices.len(),
        edges: nerve.edges.len(),
        triangles: nerve.triangles.len(),
        tetrahedra: nerve.tetrahedra.len(),
        cocycle,
        is_cocycle,
        obstruction,
    })
}

/// Lifts `ε_ij R(θ_i - θ_j)`: always projective-consistent.
pub fn rotation_lifts(nerve: &Nerve, theta: &[f64], signs: &[bool]) -> LiftAssignment {
    let lifts = nerve
        .edges
        .iter()
        .zip(signs)
        .map(|(&[i, j], &flip)| {
            let r = rotation(theta[i] - theta[j]);
            if flip {
                negate(&r)
            } else {
                r
            }
        })
        .collect();
    LiftAssignment { lifts }
}

/// Lifts `R(θ_i) J^{c_ij} R(-θ_j)` with `J` the quarter turn, for a mod-2
/// cocycle `c` given by its support. Around a triangle the product is
/// `J^{c_ij + c_jk - c_ik}`, so `z` is 1 exactly where `c_ij = c_jk = 1`,
/// `c_ik = 0`.
pub fn quarter_turn_lifts(nerve: &Nerve, theta: &[f64], support: &[[usize; 2]]) -> LiftAssignment {
    let lifts = nerve
        .edges
        .iter()
        .map(|&[i, j]| {
            let c = if support.contains(&[i, j]) {
                PI / 2.0
            } else {
                0.0
            };
            rotation(theta[i] + c - theta[j])
        })
        .collect();
    LiftAssignment { lifts }
}
