//! Index directions and the orthogonal-complement frame.
//!
//! A fitted index is a unit vector `beta` with `beta[0] > 0` (the scale and
//! sign conventions that identify a single-index direction). For the test
//! statistics the covariates are split into the index coordinate
//! `Z = X beta` and the orthogonal coordinates `W = X A`, where the columns
//! of `A` complete `beta` to an orthonormal basis of `R^p`. The checks only
//! use `W` through distances `|W_i - W_j|`, which are invariant to the
//! (arbitrary) rotation of the complement columns; the constructor here is
//! nevertheless fully deterministic so reports are reproducible.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SimCheckError};

/// Cosine threshold above which a canonical seed vector counts as parallel
/// to the direction and is replaced before Gram-Schmidt.
const NEAR_PARALLEL: f64 = 1.0 - 1e-8;

/// A unit index direction with `beta[0] > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    beta: Array1<f64>,
}

impl Direction {
    /// Normalize `v` to unit length and orient it so the first coefficient
    /// is positive. See [`normalize_direction`].
    pub fn new(v: ArrayView1<f64>) -> Result<Self> {
        normalize_direction(v)
    }

    pub fn beta(&self) -> ArrayView1<'_, f64> {
        self.beta.view()
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Angle in radians between this direction and another, in `[0, pi]`.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let dot: f64 = self.beta.dot(&other.beta);
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// Scale `v` to unit norm and flip its sign if needed so `beta[0] > 0`.
///
/// Errors: a zero (or non-finite) vector cannot be normalized, and a vector
/// whose first coefficient is exactly zero cannot be oriented.
pub fn normalize_direction(v: ArrayView1<f64>) -> Result<Direction> {
    if v.is_empty() {
        return Err(SimCheckError::ZeroDirection);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SimCheckError::NonFinite {
            context: "direction vector".to_string(),
        });
    }
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return Err(SimCheckError::ZeroDirection);
    }
    let mut beta = v.to_owned() / norm;
    if beta[0] == 0.0 {
        return Err(SimCheckError::Unidentified);
    }
    if beta[0] < 0.0 {
        beta.mapv_inplace(|x| -x);
    }
    Ok(Direction { beta })
}

/// A direction together with an orthonormal basis of its orthogonal
/// complement (`p x (p-1)`, possibly zero columns when `p = 1`).
#[derive(Debug, Clone)]
pub struct IndexFrame {
    direction: Direction,
    complement: Array2<f64>,
    /// True when a canonical seed vector was nearly parallel to the
    /// direction and had to be replaced; surfaced in reports.
    near_parallel_fallback: bool,
}

impl IndexFrame {
    /// Build the frame for `direction` with the deterministic complement
    /// from [`complement_basis`].
    pub fn new(direction: Direction) -> Self {
        let (complement, near_parallel_fallback) = complement_columns(&direction);
        IndexFrame {
            direction,
            complement,
            near_parallel_fallback,
        }
    }

    /// Build a frame from an externally supplied complement, validating
    /// shapes, orthonormality, and orthogonality to the direction (all
    /// within `1e-10`). Intended for rotation-invariance checks.
    pub fn from_parts(direction: Direction, complement: Array2<f64>) -> Result<Self> {
        let p = direction.dim();
        if complement.nrows() != p || complement.ncols() != p.saturating_sub(1) {
            return Err(SimCheckError::DimensionMismatch {
                context: "complement shape",
                expected: p * p.saturating_sub(1),
                got: complement.nrows() * complement.ncols(),
            });
        }
        for a in 0..complement.ncols() {
            let col_a = complement.column(a);
            let against_beta: f64 = col_a.dot(&direction.beta());
            if against_beta.abs() > 1e-10 {
                return Err(SimCheckError::InvalidConfig {
                    reason: format!("complement column {} not orthogonal to direction", a + 1),
                });
            }
            for b in a..complement.ncols() {
                let dot: f64 = col_a.dot(&complement.column(b));
                let target = if a == b { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-10 {
                    return Err(SimCheckError::InvalidConfig {
                        reason: format!("complement columns {} and {} not orthonormal", a + 1, b + 1),
                    });
                }
            }
        }
        Ok(IndexFrame {
            direction,
            complement,
            near_parallel_fallback: false,
        })
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn complement(&self) -> ArrayView2<'_, f64> {
        self.complement.view()
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn near_parallel_fallback(&self) -> bool {
        self.near_parallel_fallback
    }
}

/// Deterministic orthonormal basis of the complement of `direction`.
///
/// Canonical basis vectors `e_2, ..., e_p` are orthogonalized against the
/// direction (and each other) by Gram-Schmidt with a second
/// re-orthogonalization pass. If one of them is nearly parallel to the
/// direction (cosine above `1 - 1e-8`) it is replaced by the first unused
/// canonical vector; columns stay ordered by the canonical vector they
/// descend from.
pub fn complement_basis(direction: &Direction) -> Array2<f64> {
    complement_columns(direction).0
}

fn complement_columns(direction: &Direction) -> (Array2<f64>, bool) {
    let p = direction.dim();
    let beta = direction.beta();
    let mut out = Array2::<f64>::zeros((p, p.saturating_sub(1)));
    if p < 2 {
        return (out, false);
    }

    // Seed selection: e_2..e_p, substituting the first unused canonical
    // vector for a seed nearly parallel to the direction. Since the
    // direction is a unit vector, at most one canonical vector can exceed
    // the parallelism threshold.
    let mut seeds: Vec<usize> = (1..p).collect();
    let mut fallback = false;
    for s in seeds.iter_mut() {
        if beta[*s].abs() > NEAR_PARALLEL {
            let used: Vec<usize> = (1..p).filter(|j| beta[*j].abs() <= NEAR_PARALLEL).collect();
            let replacement = (0..p)
                .find(|j| !used.contains(j) && beta[*j].abs() <= NEAR_PARALLEL && *j != *s)
                .expect("a unit vector is nearly parallel to at most one canonical axis");
            *s = replacement;
            fallback = true;
        }
    }
    seeds.sort_unstable();

    // Modified Gram-Schmidt with one re-orthogonalization pass ("twice is
    // enough") against the direction and all previously accepted columns.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(p);
    basis.push(beta.to_owned());
    for (c, &s) in seeds.iter().enumerate() {
        let mut v = Array1::<f64>::zeros(p);
        v[s] = 1.0;
        for _pass in 0..2 {
            for b in &basis {
                let proj = v.dot(b);
                v.scaled_add(-proj, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        v /= norm;
        out.column_mut(c).assign(&v);
        basis.push(v);
    }
    (out, fallback)
}

/// Project covariate rows onto a frame: returns the index coordinate
/// `Z = X beta` (length `n`) and the orthogonal coordinates `W = X A`
/// (`n x (p-1)`).
pub fn project(x: ArrayView2<f64>, frame: &IndexFrame) -> Result<(Array1<f64>, Array2<f64>)> {
    if x.ncols() != frame.dim() {
        return Err(SimCheckError::DimensionMismatch {
            context: "projection covariate columns",
            expected: frame.dim(),
            got: x.ncols(),
        });
    }
    let z = x.dot(&frame.direction().beta());
    let w = x.dot(&frame.complement());
    Ok((z, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn normalizes_and_orients() {
        let d = normalize_direction(array![-3.0, 0.0, 4.0].view()).unwrap();
        assert_abs_diff_eq!(d.beta()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d.beta()[2], -0.8, epsilon = 1e-15);
        let norm: f64 = d.beta().dot(&d.beta());
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_zero_and_unoriented() {
        assert!(matches!(
            normalize_direction(array![0.0, 0.0].view()),
            Err(SimCheckError::ZeroDirection)
        ));
        assert!(matches!(
            normalize_direction(array![0.0, 1.0].view()),
            Err(SimCheckError::Unidentified)
        ));
    }

    #[test]
    fn two_dimensional_complement_is_the_rotated_direction() {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let d = normalize_direction(array![1.0, 1.0].view()).unwrap();
        let a = complement_basis(&d);
        assert_eq!(a.shape(), &[2, 1]);
        assert_abs_diff_eq!(a[[0, 0]], -inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(a[[1, 0]], inv_sqrt2, epsilon = 1e-14);
    }

    #[test]
    fn axis_aligned_direction_keeps_canonical_complement() {
        let d = normalize_direction(array![1.0, 0.0, 0.0].view()).unwrap();
        let a = complement_basis(&d);
        assert_eq!(a, array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn near_parallel_seed_is_replaced() {
        // Direction almost equal to e_2: the seed e_2 degenerates and e_1
        // must take its place.
        let mut v = Array1::zeros(3);
        v[0] = 1e-5;
        v[1] = 1.0;
        let d = normalize_direction(v.view()).unwrap();
        let frame = IndexFrame::new(d.clone());
        assert!(frame.near_parallel_fallback());
        check_orthonormal(&d, frame.complement());
    }

    #[test]
    fn frame_is_orthonormal_within_tight_tolerance() {
        // A handful of fixed directions in several dimensions.
        let cases: Vec<Array1<f64>> = vec![
            array![2.0, -1.0],
            array![1.0, 1.0, 1.0],
            array![0.3, -0.2, 0.9, 0.1],
            array![1.0, -2.0, 3.0, -4.0, 5.0],
        ];
        for v in cases {
            let d = normalize_direction(v.view()).unwrap();
            let frame = IndexFrame::new(d.clone());
            check_orthonormal(&d, frame.complement());
        }
    }

    #[test]
    fn complement_is_bit_reproducible() {
        let d = normalize_direction(array![0.4, -1.3, 0.7].view()).unwrap();
        let a = complement_basis(&d);
        let b = complement_basis(&d);
        assert_eq!(a, b);
    }

    #[test]
    fn projection_shapes_and_values() {
        let d = normalize_direction(array![1.0, 0.0].view()).unwrap();
        let frame = IndexFrame::new(d);
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let (z, w) = project(x.view(), &frame).unwrap();
        assert_eq!(z, array![1.0, 3.0, 5.0]);
        assert_eq!(w.column(0), array![2.0, 4.0, 6.0].view());
    }

    fn check_orthonormal(d: &Direction, a: ArrayView2<f64>) {
        let p = d.dim();
        assert_eq!(a.ncols(), p - 1);
        for i in 0..a.ncols() {
            let against: f64 = a.column(i).dot(&d.beta());
            assert!(against.abs() < 1e-12, "column {i} not orthogonal to direction");
            for j in 0..a.ncols() {
                let dot: f64 = a.column(i).dot(&a.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-12, "columns {i},{j} off");
            }
        }
    }
}
