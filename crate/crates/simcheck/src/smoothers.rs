//! Kernel-smoothed residual fields along a fitted index.
//!
//! The mean check smooths the response differences `y_i - y_k`; the law
//! check smooths indicator differences on the rank scale, producing one
//! step function per observation. Both fields share the same structure: a
//! leave-one-out kernel average over the index coordinate `Z`, scaled by
//! `1/((n-1) g)`.
//!
//! Row sums use a fixed pairwise reduction (see [`crate::sums`]) and each
//! row is computed independently, so the fields are reproducible bit for
//! bit regardless of parallelism.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Result, SimCheckError};
use crate::kernel::{gaussian, KernelFamily, KernelSpec};
use crate::sums::pairwise_sum;

/// Denominator floor below which a leave-one-out smoother falls back to the
/// leave-one-out sample mean.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

/// Cell count of the quantization grid used with a fixed (known) response
/// CDF instead of the empirical one.
pub const FIXED_PHI_CELLS: usize = 512;

/// Smoothed mean-residual field: `values[i]` estimates how much `y_i`
/// deviates from its neighbours along the index.
#[derive(Debug, Clone)]
pub struct ResidualFieldMean {
    pub values: Array1<f64>,
    pub bandwidth_g: f64,
}

/// Smoothed law-residual field: row `i` of `step_values` is a step function
/// on `[0, 1]`, constant on cells `((m-1)/cells, m/cells]`, whose column `m`
/// holds the value at the right cell edge.
#[derive(Debug, Clone)]
pub struct ResidualFieldLaw {
    step_values: Array2<f64>,
    ranks: Option<Vec<usize>>,
    bandwidth_g: f64,
}

impl ResidualFieldLaw {
    pub fn n(&self) -> usize {
        self.step_values.nrows()
    }

    pub fn cells(&self) -> usize {
        self.step_values.ncols()
    }

    pub fn step_values(&self) -> ArrayView2<'_, f64> {
        self.step_values.view()
    }

    /// Ranks behind the field, absent for the fixed-CDF variant.
    pub fn ranks(&self) -> Option<&[usize]> {
        self.ranks.as_deref()
    }

    pub fn bandwidth_g(&self) -> f64 {
        self.bandwidth_g
    }
}

/// Result of the leave-one-out Nadaraya-Watson smoother.
#[derive(Debug, Clone)]
pub struct NwEstimates {
    pub values: Array1<f64>,
    /// Observations whose kernel denominator fell below
    /// [`DENOMINATOR_FLOOR`] and were replaced by the leave-one-out mean.
    pub fallback_count: usize,
}

/// Ranks of `y` in ascending order, ties broken by original position:
/// a permutation of `1..=n`.
pub fn compute_ranks(y: ArrayView1<f64>) -> Result<Vec<usize>> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(SimCheckError::NonFinite {
            context: format!("rank input, observation {}", i + 1),
        });
    }
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal responses keep their original relative order.
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    Ok(ranks)
}

/// Leave-one-out smoothed response differences along the index coordinate:
/// `values[i] = 1/((n-1) g) * sum_{k != i} (y_i - y_k) L((z_i - z_k)/g)`.
pub fn residual_field_mean(
    y: ArrayView1<f64>,
    z: ArrayView1<f64>,
    g: f64,
    kernel: &KernelSpec,
) -> Result<ResidualFieldMean> {
    let n = check_field_inputs(y, z, g)?;
    let KernelFamily::GaussianDensity = kernel.family;
    let scale = 1.0 / ((n - 1) as f64 * g);
    let y = y.to_owned();
    let z = z.to_owned();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut terms = Vec::with_capacity(n - 1);
            for k in 0..n {
                if k != i {
                    terms.push((y[i] - y[k]) * gaussian((z[i] - z[k]) / g));
                }
            }
            pairwise_sum(&terms) * scale
        })
        .collect();
    Ok(ResidualFieldMean {
        values: Array1::from_vec(rows),
        bandwidth_g: g,
    })
}

/// Leave-one-out smoothed indicator differences on the rank scale.
///
/// With the empirical CDF, `Phi(y_i) = R_i / n`, so on the grid `t = m/n`
/// the field is
///
/// ```text
/// step[i][m] = 1/((n-1) g) * sum_{k != i} (1{R_i <= m} - 1{R_k <= m}) L((z_i - z_k)/g)
/// ```
///
/// computed in `O(n)` per row by bucketing kernel weights by rank and
/// prefix-summing. Column `n` is exactly zero (both indicators are 1).
pub fn residual_field_law(
    ranks: &[usize],
    z: ArrayView1<f64>,
    g: f64,
    kernel: &KernelSpec,
) -> Result<ResidualFieldLaw> {
    let n = z.len();
    if ranks.len() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "law field ranks",
            expected: n,
            got: ranks.len(),
        });
    }
    check_permutation(ranks)?;
    check_field_inputs(z, z, g)?;
    let KernelFamily::GaussianDensity = kernel.family;

    let scale = 1.0 / ((n - 1) as f64 * g);
    let z = z.to_owned();
    let ranks_vec = ranks.to_vec();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // Kernel weight per rank value, then prefix sums: cum[m] =
            // sum of weights of k != i with R_k <= m. The total weight is
            // taken from the same prefix array so that column n cancels
            // exactly.
            let mut by_rank = vec![0.0f64; n + 1];
            for k in 0..n {
                if k != i {
                    by_rank[ranks_vec[k]] = gaussian((z[i] - z[k]) / g);
                }
            }
            let mut cum = vec![0.0f64; n + 1];
            for m in 1..=n {
                cum[m] = cum[m - 1] + by_rank[m];
            }
            let total = cum[n];
            let mut row = vec![0.0f64; n];
            for m in 1..=n {
                let own = if ranks_vec[i] <= m { total } else { 0.0 };
                row[m - 1] = (own - cum[m]) * scale;
            }
            row
        })
        .collect();

    let mut step_values = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        step_values
            .row_mut(i)
            .assign(&Array1::from_vec(row));
    }
    Ok(ResidualFieldLaw {
        step_values,
        ranks: Some(ranks_vec),
        bandwidth_g: g,
    })
}

/// Law residual field for a fixed, known response CDF `phi` instead of the
/// empirical one. The unit interval is quantized on a fixed grid of
/// [`FIXED_PHI_CELLS`] cells; `phi` must map into `[0, 1]`.
pub fn residual_field_law_fixed_phi(
    y: ArrayView1<f64>,
    z: ArrayView1<f64>,
    g: f64,
    kernel: &KernelSpec,
    phi: impl Fn(f64) -> f64,
) -> Result<ResidualFieldLaw> {
    let n = check_field_inputs(y, z, g)?;
    let KernelFamily::GaussianDensity = kernel.family;
    let cells = FIXED_PHI_CELLS;

    // Quantize phi(y_i) to its cell: u lands in cell ceil(u * cells), so
    // 1{u <= m/cells} is 1 exactly when the cell index is <= m.
    let mut cell_of = vec![0usize; n];
    for i in 0..n {
        let u = phi(y[i]);
        if !(0.0..=1.0).contains(&u) {
            return Err(SimCheckError::DataFormat {
                reason: format!(
                    "fixed CDF returned {} for observation {}; values must lie in [0, 1]",
                    u,
                    i + 1
                ),
            });
        }
        cell_of[i] = (u * cells as f64).ceil() as usize;
    }

    let scale = 1.0 / ((n - 1) as f64 * g);
    let z = z.to_owned();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut by_cell = vec![0.0f64; cells + 1];
            for k in 0..n {
                if k != i {
                    by_cell[cell_of[k]] += gaussian((z[i] - z[k]) / g);
                }
            }
            let mut cum = vec![0.0f64; cells + 1];
            for m in 1..=cells {
                cum[m] = cum[m - 1] + by_cell[m] + if m == 1 { by_cell[0] } else { 0.0 };
            }
            let total = cum[cells];
            let mut row = vec![0.0f64; cells];
            for m in 1..=cells {
                let own = if cell_of[i] <= m { total } else { 0.0 };
                row[m - 1] = (own - cum[m]) * scale;
            }
            row
        })
        .collect();

    let mut step_values = Array2::<f64>::zeros((n, cells));
    for (i, row) in rows.into_iter().enumerate() {
        step_values.row_mut(i).assign(&Array1::from_vec(row));
    }
    Ok(ResidualFieldLaw {
        step_values,
        ranks: None,
        bandwidth_g: g,
    })
}

/// Gram matrix of the law field rows in `L2[0, 1]`:
/// `G[i][j] = (1/cells) * sum_m step[i][m] step[j][m]`.
///
/// For the empirical-CDF field this quadrature is exact, because the rows
/// are step functions constant on the grid cells. The result is symmetric
/// and positive semidefinite by construction.
pub fn law_gram(field: &ResidualFieldLaw) -> Array2<f64> {
    let s = field.step_values.view();
    let mut gram = s.dot(&s.t());
    gram /= field.cells() as f64;
    // dot() computes G[i][j] and G[j][i] from the same terms but possibly
    // in different association orders; average to make symmetry exact.
    for i in 0..gram.nrows() {
        for j in (i + 1)..gram.ncols() {
            let v = 0.5 * (gram[[i, j]] + gram[[j, i]]);
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }
    gram
}

/// Leave-one-out Nadaraya-Watson estimate of `E[y | index]` at each
/// observation's own index value. The kernel is applied to raw index
/// differences (any bandwidth is already absorbed into the index scale).
/// Denominators below [`DENOMINATOR_FLOOR`] fall back to the leave-one-out
/// mean of `y` and are counted in `fallback_count`.
pub fn loo_nadaraya_watson(
    y: ArrayView1<f64>,
    index_values: ArrayView1<f64>,
    kernel: &KernelSpec,
) -> Result<NwEstimates> {
    let n = check_field_inputs(y, index_values, 1.0)?;
    let KernelFamily::GaussianDensity = kernel.family;
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];
    for i in 0..n {
        for k in (i + 1)..n {
            let w = gaussian(index_values[i] - index_values[k]);
            num[i] += w * y[k];
            num[k] += w * y[i];
            den[i] += w;
            den[k] += w;
        }
    }
    let y_total = match y.as_slice() {
        Some(s) => pairwise_sum(s),
        None => pairwise_sum(&y.iter().copied().collect::<Vec<f64>>()),
    };
    let mut values = Array1::<f64>::zeros(n);
    let mut fallback_count = 0;
    for i in 0..n {
        if den[i] < DENOMINATOR_FLOOR {
            values[i] = (y_total - y[i]) / (n - 1) as f64;
            fallback_count += 1;
        } else {
            values[i] = num[i] / den[i];
        }
    }
    Ok(NwEstimates {
        values,
        fallback_count,
    })
}

/// Shared validation: equal lengths, `n >= 2`, finite entries, positive
/// finite bandwidth. Returns `n`.
fn check_field_inputs(a: ArrayView1<f64>, b: ArrayView1<f64>, g: f64) -> Result<usize> {
    if a.len() != b.len() {
        return Err(SimCheckError::DimensionMismatch {
            context: "field input lengths",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(SimCheckError::SampleTooSmall { n: a.len(), min: 2 });
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(SimCheckError::InvalidBandwidth { value: g });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(SimCheckError::NonFinite {
            context: "field input".to_string(),
        });
    }
    Ok(a.len())
}

fn check_permutation(ranks: &[usize]) -> Result<()> {
    let n = ranks.len();
    let mut seen = vec![false; n + 1];
    for &r in ranks {
        if r < 1 || r > n || seen[r] {
            return Err(SimCheckError::DataFormat {
                reason: "ranks are not a permutation of 1..=n".to_string(),
            });
        }
        seen[r] = true;
    }
    Ok(())
}
