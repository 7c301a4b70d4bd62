//! Magic unitaries that break the symmetry of a shared cat state, behind
//! a numerical validation gate.
//!
//! The literal matrices are not trusted. Each `m` gets a fixed list of
//! candidate transcriptions, and the first one that is unitary and kills
//! the forbidden patterns of the cat state is selected.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Matrix2, Matrix4};
use serde::Serialize;

use super::{QError, QState, C64, GATE_TOL};

/// Largest `m` whose support residue is brute-forced on the engine.
pub const BRUTE_FORCE_MAX: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum MagicMatrix {
    One(Matrix2<C64>),
    Two(Matrix4<C64>),
}

impl MagicMatrix {
    fn defect(&self) -> f64 {
        match self {
            MagicMatrix::One(u) => (u.adjoint() * u - Matrix2::identity())
                .svd(false, false)
                .singular_values
                .max(),
            MagicMatrix::Two(v) => (v.adjoint() * v - Matrix4::identity())
                .svd(false, false)
                .singular_values
                .max(),
        }
    }

    /// Row-major `[re, im]` entries.
    pub fn entries(&self) -> Vec<Vec<[f64; 2]>> {
        let (k, get): (usize, Box<dyn Fn(usize, usize) -> C64>) = match self {
            MagicMatrix::One(u) => (2, Box::new(move |r, c| u[(r, c)])),
            MagicMatrix::Two(v) => (4, Box::new(move |r, c| v[(r, c)])),
        };
        (0..k)
            .map(|r| (0..k).map(|c| get(r, c)).map(|z| [z.re, z.im]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidueMethod {
    BruteForce,
    Analytic,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub tag: String,
    pub unitarity_defect: f64,
    /// Only computed for candidates that pass the unitarity gate.
    pub support_residue: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MagicUnitarySpec {
    pub arity: u8,
    pub m: u32,
    #[serde(skip)]
    pub matrix: MagicMatrix,
    pub entries: Vec<Vec<[f64; 2]>>,
    /// Tag of the selected candidate, `None` when nothing passed.
    pub variant: Option<String>,
    pub unitarity_defect: f64,
    pub support_residue: f64,
    pub residue_method: ResidueMethod,
    pub supported: bool,
    pub candidates: Vec<VariantReport>,
}

impl MagicUnitarySpec {
    /// Same matrix with the supported flag cleared. Used to exercise the
    /// degraded path.
    pub fn as_unsupported(&self) -> Self {
        MagicUnitarySpec {
            supported: false,
            variant: None,
            ..self.clone()
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Candidates for even `m`, in selection order.
fn even_candidates(m: u32) -> Vec<(&'static str, MagicMatrix)> {
    let w = cis(-PI / m as f64);
    let s = c(FRAC_1_SQRT_2, 0.0);
    let one = c(1.0, 0.0);
    let mk = |a: C64, b: C64| MagicMatrix::One(Matrix2::new(one, a, b, one) * s);
    vec![
        ("literal", mk(w, -w)),
        ("conjugate-upper", mk(w.conj(), -w)),
        ("conjugate-lower", mk(w, -w.conj())),
        ("conjugate-both", mk(w.conj(), -w.conj())),
        ("negated-lower", mk(w, w)),
    ]
}

fn v_matrix(m: u32, norm: f64, conj: bool) -> MagicMatrix {
    let n = m as f64;
    let l = (PI / n).cos();
    let i_n = (PI / n).sin();
    let l2 = (PI / (2.0 * n)).cos();
    let sl = l.sqrt();
    let r2 = FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let e = cis(PI / n);
    let centre = cis(-PI / (2.0 * n)) * i_n / (c(0.0, 1.0) * (2f64.sqrt() * l2));
    let mut v = Matrix4::new(
        c(r2, 0.0),
        z,
        c(sl, 0.0),
        e * r2,
        c(r2, 0.0),
        z,
        -e.conj() * sl,
        e.conj() * r2,
        c(sl, 0.0),
        z,
        centre,
        c(-sl, 0.0),
        z,
        c((l + 1.0).sqrt(), 0.0),
        z,
        z,
    ) / c(norm.sqrt(), 0.0);
    if conj {
        v = v.map(|x| x.conj());
    }
    MagicMatrix::Two(v)
}

/// Candidates for odd `m`: both readings of the normalization, each
/// taken literally and complex-conjugated.
fn odd_candidates(m: u32) -> Vec<(&'static str, MagicMatrix)> {
    let n = m as f64;
    let l_next = (PI / (n + 1.0)).cos();
    let l_plus = (PI / n).cos() + 1.0;
    vec![
        ("literal-norm-l(m+1)", v_matrix(m, l_next, false)),
        ("literal-norm-l(m)+1", v_matrix(m, l_plus, false)),
        ("conjugate-norm-l(m+1)", v_matrix(m, l_next, true)),
        ("conjugate-norm-l(m)+1", v_matrix(m, l_plus, true)),
    ]
}

/// Forbidden per-party patterns: `[0], [1]` for even, `[a, b]` pairs for odd.
fn forbidden(m: u32) -> Vec<Vec<u8>> {
    if m.is_multiple_of(2) {
        vec![vec![0], vec![1]]
    } else {
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
    }
}

/// Residue by running the candidate on an `m`-party cat state.
fn brute_force_residue(m: u32, matrix: &MagicMatrix) -> Result<f64, QError> {
    let mut s = QState::new();
    let qs = s.alloc(0, m as usize)?;
    s.apply_h(qs[0])?;
    for q in &qs[1..] {
        s.apply_cnot(qs[0], *q)?;
    }
    let mut measured = Vec::new();
    for q in &qs {
        match matrix {
            MagicMatrix::One(u) => {
                s.apply_1q(*q, u)?;
                measured.push(*q);
            }
            MagicMatrix::Two(v) => {
                let a = s.alloc(0, 1)?[0];
                s.apply_cnot(*q, a)?;
                s.apply_2q(*q, a, v)?;
                measured.push(*q);
                measured.push(a);
            }
        }
    }
    let patterns: Vec<Vec<u8>> = forbidden(m)
        .into_iter()
        .map(|p| p.iter().copied().cycle().take(p.len() * m as usize).collect())
        .collect();
    s.support_probability(&measured, &patterns)
}

/// Residue from matrix entries: after the optional CNOT, each party holds
/// the column-0 or column-3 (odd) / column-0 or column-1 (even) input, so
/// the amplitude of a uniform pattern `p^m` is `(M[p][a]^m + M[p][b]^m)/sqrt 2`.
fn analytic_residue(m: u32, matrix: &MagicMatrix) -> f64 {
    let k = m as i32;
    let amp = |x: C64, y: C64| (x.powi(k) + y.powi(k)) * FRAC_1_SQRT_2;
    match matrix {
        MagicMatrix::One(u) => (0..2).map(|r| amp(u[(r, 0)], u[(r, 1)]).norm_sqr()).sum(),
        MagicMatrix::Two(v) => (0..4).map(|r| amp(v[(r, 0)], v[(r, 3)]).norm_sqr()).sum(),
    }
}

/// Builds and validates the magic unitary for `m` parties.
pub fn build_magic(m: u32) -> Result<MagicUnitarySpec, QError> {
    if m < 2 {
        return Err(QError::BadArity(format!("magic parameter m = {m} < 2")));
    }
    let (arity, candidates) = if m.is_multiple_of(2) {
        (1, even_candidates(m))
    } else {
        (2, odd_candidates(m))
    };
    let method = if m <= BRUTE_FORCE_MAX {
        ResidueMethod::BruteForce
    } else {
        ResidueMethod::Analytic
    };
    let mut reports = Vec::new();
    let mut chosen: Option<(String, MagicMatrix, f64, f64)> = None;
    for (tag, matrix) in &candidates {
        let defect = matrix.defect();
        let mut report = VariantReport {
            tag: tag.to_string(),
            unitarity_defect: defect,
            support_residue: None,
            passed: false,
        };
        if defect <= GATE_TOL {
            let residue = match method {
                ResidueMethod::BruteForce => brute_force_residue(m, matrix)?,
                ResidueMethod::Analytic => analytic_residue(m, matrix),
            };
            report.support_residue = Some(residue);
            report.passed = residue <= GATE_TOL;
            if report.passed && chosen.is_none() {
                chosen = Some((tag.to_string(), matrix.clone(), defect, residue));
            }
        }
        reports.push(report);
    }
    Ok(match chosen {
        Some((tag, matrix, defect, residue)) => MagicUnitarySpec {
            arity,
            m,
            entries: matrix.entries(),
            matrix,
            variant: Some(tag),
            unitarity_defect: defect,
            support_residue: residue,
            residue_method: method,
            supported: true,
            candidates: reports,
        },
        None => {
            let first = &reports[0];
            MagicUnitarySpec {
                arity,
                m,
                entries: candidates[0].1.entries(),
                matrix: candidates[0].1.clone(),
                variant: None,
                unitarity_defect: first.unitarity_defect,
                support_residue: first.support_residue.unwrap_or(f64::NAN),
                residue_method: method,
                supported: false,
                candidates: reports,
            }
        }
    })
}

/// Process-wide cache over [`build_magic`].
pub fn magic_cached(m: u32) -> Result<Arc<MagicUnitarySpec>, QError> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<MagicUnitarySpec>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(spec) = cache.lock().expect("magic cache poisoned").get(&m) {
        return Ok(spec.clone());
    }
    let spec = Arc::new(build_magic(m)?);
    cache
        .lock()
        .expect("magic cache poisoned")
        .insert(m, spec.clone());
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_even_matrix_at_two() {
        let (_, literal) = &even_candidates(2)[0];
        let e = literal.entries();
        let s = FRAC_1_SQRT_2;
        assert!((e[0][1][1] + s).abs() < 1e-12, "upper right is -i/sqrt2");
        assert!((e[1][0][1] - s).abs() < 1e-12, "lower left is i/sqrt2");
    }

    #[test]
    fn analytic_and_brute_force_agree_for_small_even() {
        for m in [2, 4, 6] {
            for (_, cand) in even_candidates(m) {
                if cand.defect() > GATE_TOL {
                    continue;
                }
                let a = analytic_residue(m, &cand);
                let b = brute_force_residue(m, &cand).unwrap();
                assert!((a - b).abs() < 1e-9, "m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn analytic_and_brute_force_agree_for_small_odd() {
        for m in [3, 5] {
            for (_, cand) in odd_candidates(m) {
                if cand.defect() > GATE_TOL {
                    continue;
                }
                let a = analytic_residue(m, &cand);
                let b = brute_force_residue(m, &cand).unwrap();
                assert!((a - b).abs() < 1e-9, "m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_m_below_two() {
        assert!(matches!(build_magic(1), Err(QError::BadArity(_))));
    }
}
