//! Statistics kernel: least squares by Householder QR, Pearson correlation,
//! Student-t and F tail probabilities, and Benjamini–Hochberg adjustment.
//!
//! Tail probabilities go through the regularized incomplete beta function
//! `I_x(a, b)`, evaluated by the modified Lentz continued fraction:
//!
//! ```text
//! P(T_ν > t)      = ½ · I_{ν/(ν+t²)}(ν/2, ½)          (t ≥ 0)
//! P(F_{d1,d2} > f) = I_{d2/(d2+d1·f)}(d2/2, d1/2)
//! ```

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need more observations than parameters (n = {n}, k = {k})")]
    Underdetermined { n: usize, k: usize },
    #[error("design column {column} is linearly dependent on earlier columns")]
    RankDeficient { column: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("input {which} is constant")]
    Constant { which: &'static str },
    #[error("p-value {value} at position {index} is outside [0, 1]")]
    InvalidPValue { index: usize, value: f64 },
    #[error("non-finite input")]
    NonFinite,
}

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// One entry per design column; dropped columns (lenient fits only) hold 0.
    pub coefficients: Vec<f64>,
    /// Standard errors of the coefficients; `NaN` for dropped columns or when
    /// no residual degrees of freedom remain.
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// `1 − RSS/TSS` against the intercept-only baseline; 0 for a constant response.
    pub r_squared: f64,
    pub n_obs: usize,
    /// Number of columns actually used (the numerical rank).
    pub n_params: usize,
    /// Design columns dropped as dependent (always empty for [`ols`]).
    pub dropped: Vec<usize>,
}

impl OlsFit {
    pub fn residual_df(&self) -> usize {
        self.n_obs.saturating_sub(self.n_params)
    }
}

/// Column-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(n_rows: usize) -> Self {
        Self { n_rows, columns: Vec::new() }
    }

    /// Design with a leading column of ones.
    pub fn with_intercept(n_rows: usize) -> Self {
        let mut d = Self::new(n_rows);
        d.push(vec![1.0; n_rows]);
        d
    }

    pub fn push(&mut self, column: Vec<f64>) {
        assert_eq!(column.len(), self.n_rows, "design column length");
        self.columns.push(column);
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Row-major construction, mostly for tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut d = Self::new(n);
        for j in 0..k {
            d.push(rows.iter().map(|r| r[j]).collect());
        }
        d
    }

    pub fn predict(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (col, b) in self.columns.iter().zip(coefficients) {
            for (o, x) in out.iter_mut().zip(col) {
                *o += b * x;
            }
        }
        out
    }
}

/// Relative norm below which a column counts as dependent.
const RANK_TOL: f64 = 1e-9;

/// Strict least squares: any dependent column is an error.
pub fn ols(design: &Design, response: &[f64]) -> Result<OlsFit, StatsError> {
    fit(design, response, false)
}

/// Least squares that drops dependent columns (their coefficient is 0).
/// Used by forecasters so that degenerate histories such as a constant
/// series still produce a fit.
pub fn ols_lenient(design: &Design, response: &[f64]) -> Result<OlsFit, StatsError> {
    fit(design, response, true)
}

fn fit(design: &Design, response: &[f64], drop_dependent: bool) -> Result<OlsFit, StatsError> {
    let n = design.n_rows();
    let k = design.n_cols();
    if response.len() != n {
        return Err(StatsError::LengthMismatch(n, response.len()));
    }
    if !drop_dependent && n <= k {
        return Err(StatsError::Underdetermined { n, k });
    }
    if response.iter().any(|v| !v.is_finite()) || design.columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let mut a: Vec<Vec<f64>> = design.columns.clone();
    let mut qty = response.to_vec();
    // Accepted columns and their Householder vectors, in order.
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    let mut rank = 0usize;

    for j in 0..k {
        let orig_norm = design.columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = a[j][rank..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if rank >= n || norm <= RANK_TOL * orig_norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
            if drop_dependent {
                dropped.push(j);
                continue;
            }
            return Err(StatsError::RankDeficient { column: j });
        }
        // Householder vector v with v[0] = x[0] + sign(x[0])·‖x‖.
        let alpha = if a[j][rank] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][rank..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            let reflect = |col: &mut [f64]| {
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                let s = 2.0 * dot / vnorm2;
                for (c, vi) in col.iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            };
            for col in a.iter_mut().skip(j + 1) {
                reflect(&mut col[rank..]);
            }
            reflect(&mut qty[rank..]);
        }
        a[j][rank] = alpha;
        for x in a[j][rank + 1..].iter_mut() {
            *x = 0.0;
        }
        kept.push(j);
        rank += 1;
    }

    if drop_dependent && n <= rank {
        return Err(StatsError::Underdetermined { n, k: rank });
    }

    // Back substitution on the rank×rank upper triangle R[i][c] = a[kept[c]][i].
    let r = |i: usize, c: usize| a[kept[c]][i];
    let mut beta_kept = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = qty[i];
        for c in i + 1..rank {
            s -= r(i, c) * beta_kept[c];
        }
        beta_kept[i] = s / r(i, i);
    }
    let mut coefficients = vec![0.0; k];
    for (c, &j) in kept.iter().enumerate() {
        coefficients[j] = beta_kept[c];
    }

    let fitted = design.predict(&coefficients);
    let residuals: Vec<f64> = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = response.iter().sum::<f64>() / n as f64;
    let tss: f64 = response.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };

    // SE_j = σ̂ · ‖row j of R⁻¹‖.
    let df = n - rank;
    let sigma2 = rss / df as f64;
    let mut rinv = vec![vec![0.0; rank]; rank];
    for col in 0..rank {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for m in i + 1..=col {
                s -= r(i, m) * rinv[m][col];
            }
            rinv[i][col] = s / r(i, i);
        }
    }
    let mut std_errors = vec![f64::NAN; k];
    for (c, &j) in kept.iter().enumerate() {
        let row_norm2: f64 = rinv[c].iter().map(|x| x * x).sum();
        std_errors[j] = (sigma2 * row_norm2).sqrt();
    }

    Ok(OlsFit {
        coefficients,
        std_errors,
        residuals,
        rss,
        r_squared,
        n_obs: n,
        n_params: rank,
        dropped,
    })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { min: 3, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(StatsError::Constant { which: "x" });
    }
    if !(syy > 0.0) {
        return Err(StatsError::Constant { which: "y" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `t = ρ·√((n−2)/(1−ρ²))` and its two-sided p-value on `n − 2` degrees of freedom.
pub fn correlation_t_test(rho: f64, n: usize) -> (f64, f64) {
    let df = n as f64 - 2.0;
    let denom = 1.0 - rho * rho;
    let t = if denom <= 0.0 {
        f64::INFINITY.copysign(rho)
    } else {
        rho * (df / denom).sqrt()
    };
    (t, two_sided_t_p(t, df))
}

pub fn two_sided_t_p(t: f64, df: f64) -> f64 {
    (2.0 * t_sf(t.abs(), df)).min(1.0)
}

/// Lanczos approximation (g = 7, 9 terms) of ln Γ(z) for z > 0.
pub fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// One-sided survival `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * incomplete_beta(x, 0.5 * df, 0.5);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Survival `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f == f64::INFINITY {
        return 0.0;
    }
    incomplete_beta(d2 / (d2 + d1 * f), 0.5 * d2, 0.5 * d1)
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>, StatsError> {
    for (index, &value) in pvals.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(StatsError::InvalidPValue { index, value });
        }
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        let candidate = pvals[i] * (m as f64 / (rank + 1) as f64);
        running = running.min(candidate);
        adjusted[i] = running.min(1.0);
    }
    Ok(adjusted)
}

/// Population mean and variance (divisor `n`).
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simple_design(x: &[f64]) -> Design {
        let mut d = Design::with_intercept(x.len());
        d.push(x.to_vec());
        d
    }

    #[test]
    fn ols_exact_fit() {
        let fit = ols(&simple_design(&[1.0, 2.0, 3.0]), &[2.0, 4.0, 6.0]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.rss < 1e-24);
    }

    #[test]
    fn ols_constant_response() {
        let fit = ols(&simple_design(&[1.0, 5.0, 2.0, 7.0]), &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn ols_textbook_example() {
        // Normal equations by hand: Sxx = 5, Sxy = 4.7, slope 0.94, intercept 2.5 − 0.94·2.5.
        let fit = ols(&simple_design(&[1.0, 2.0, 3.0, 4.0]), &[1.1, 1.9, 3.2, 3.8]).unwrap();
        assert!((fit.coefficients[1] - 0.94).abs() < 1e-12);
        assert!((fit.coefficients[0] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn ols_standard_errors_match_closed_form() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.1, 1.9, 3.2, 3.8];
        let fit = ols(&simple_design(&x), &y).unwrap();
        // SE(slope) = sqrt(σ² / Sxx)
        let sigma2 = fit.rss / 2.0;
        assert!((fit.std_errors[1] - (sigma2 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ols_rank_deficiency_names_column() {
        let mut d = simple_design(&[1.0, 2.0, 3.0, 4.0]);
        d.push(vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(ols(&d, &[1.0, 2.0, 2.0, 3.0]), Err(StatsError::RankDeficient { column: 2 }));
        let lenient = ols_lenient(&d, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(lenient.dropped, vec![2]);
        assert_eq!(lenient.coefficients[2], 0.0);
        assert!(ols(&simple_design(&[1.0, 2.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::Constant { which: "x" }));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn t_sf_examples() {
        for df in [1.0, 3.5, 10.0, 1000.0] {
            assert_eq!(t_sf(0.0, df), 0.5);
        }
        assert!((t_sf(1.0, 1.0) - 0.25).abs() < 1e-12);
        assert!((t_sf(2.228, 10.0) - 0.025).abs() < 1e-3);
        assert!((t_sf(-1.0, 1.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cauchy_closed_form() {
        // P(T_1 > t) = 1/2 − atan(t)/π
        for i in 0..50 {
            let t = -10.0 + 0.4 * i as f64;
            let exact = 0.5 - t.atan() / std::f64::consts::PI;
            assert!((t_sf(t, 1.0) - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn f_sf_examples() {
        assert_eq!(f_sf(0.0, 3.0, 7.0), 1.0);
        for d in [1.0, 2.0, 7.0, 50.0, 500.0] {
            assert!((f_sf(1.0, d, d) - 0.5).abs() < 1e-12);
        }
        assert!((f_sf(4.96, 1.0, 10.0) - 0.05).abs() < 2e-3);
        // F(2, d2) has the closed form (1 + 2f/d2)^(−d2/2).
        for d2 in [1.0_f64, 4.0, 30.0] {
            for f in [0.1, 1.0, 3.0, 12.0] {
                let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
                assert!((f_sf(f, 2.0, d2) - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().abs().max(1.0));
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn bh_examples() {
        let adj = bh_adjust(&[0.01, 0.02, 0.04]).unwrap();
        for (a, b) in adj.iter().zip([0.03, 0.03, 0.04]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(bh_adjust(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(bh_adjust(&[0.2; 4]).unwrap(), vec![0.2; 4]);
        assert_eq!(bh_adjust(&[0.9, 0.95]).unwrap(), vec![0.95, 0.95]);
        assert!(matches!(bh_adjust(&[0.1, 1.2]), Err(StatsError::InvalidPValue { index: 1, .. })));
        assert!(bh_adjust(&[]).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn tails_are_monotone(df in 1.0f64..1000.0, a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (p_lo, p_hi) = (t_sf(lo, df), t_sf(hi, df));
            prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
            prop_assert!(p_hi <= p_lo + 1e-15);
            let (fl, fh) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
            prop_assert!(f_sf(fh, df, df.sqrt()) <= f_sf(fl, df, df.sqrt()) + 1e-15);
        }

        #[test]
        fn bh_permutation_and_monotonicity(p in prop::collection::vec(0.0f64..=1.0, 1..30), rot in 0usize..30) {
            let adj = bh_adjust(&p).unwrap();
            for (a, r) in adj.iter().zip(&p) {
                prop_assert!(a >= r);
            }
            let k = rot % p.len();
            let mut rotated = p.clone();
            rotated.rotate_left(k);
            let mut adj_rot = bh_adjust(&rotated).unwrap();
            adj_rot.rotate_right(k);
            prop_assert_eq!(&adj_rot, &adj);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if p[i] <= p[j] {
                        prop_assert!(adj[i] <= adj[j]);
                    }
                }
            }
        }

        #[test]
        fn ols_residuals_orthogonal(
            rows in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 8..40)
        ) {
            let mut d = Design::with_intercept(rows.len());
            d.push(rows.iter().map(|r| r.0).collect());
            d.push(rows.iter().map(|r| r.1).collect());
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            if let Ok(fit) = ols(&d, &y) {
                prop_assert!(fit.rss >= 0.0);
                prop_assert!((0.0..=1.0).contains(&fit.r_squared));
                let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                for j in 0..d.n_cols() {
                    let col = d.column(j);
                    let cn = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
                    prop_assert!(dot.abs() <= 1e-8 * cn * scale);
                }
            }
        }
    }
}
