//! Synthetic panels with known signed causal structure.
//!
//! * Unidirectionally coupled logistic maps `X1 → X2 → X3`:
//!   `X_j(t) = r·X_j(t−1)·(1 − X_j(t−1)) + α·X_{j−1}(t−1)`, clamped to `[0, 1]`.
//! * Multivariate Ornstein–Uhlenbeck networks `dX = C·X dt + σ dW` with a
//!   sparse random `C`, integrated by Euler–Maruyama.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{rng_uniform, MultiSeries, Seed, SeriesError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator parameter: {0}")]
    InvalidSpec(String),
    #[error("no connectivity matrix with spectral abscissa < {threshold} after {attempts} draws")]
    Unstable { attempts: usize, threshold: f64 },
    #[error("simulation diverged at step {step} (|x| > {limit})")]
    Diverged { step: usize, limit: f64 },
    #[error("Lyapunov system is singular")]
    Singular,
    #[error("graph edge {source_node}->{target} is invalid for {n_nodes} nodes")]
    BadEdge { source_node: usize, target: usize, n_nodes: usize },
    #[error("graph csv line {line}: {msg}")]
    GraphCsv { line: usize, msg: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Excitatory (+1) or inhibitory (−1) influence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    /// `+1` for non-negative values (zero breaks towards excitatory).
    pub fn of(value: f64) -> Sign {
        if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            1 => Some(Sign::Positive),
            -1 => Some(Sign::Negative),
            _ => None,
        }
    }
}

/// Signed directed graph without self-loops, at most one edge per ordered pair.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CausalGraph {
    n_nodes: usize,
    edges: BTreeMap<(usize, usize), Sign>,
}

impl CausalGraph {
    pub fn new(n_nodes: usize) -> Self {
        Self { n_nodes, edges: BTreeMap::new() }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Inserts or replaces the edge `source → target`.
    pub fn add_edge(&mut self, source: usize, target: usize, sign: Sign) -> Result<(), SynthError> {
        if source == target || source >= self.n_nodes || target >= self.n_nodes {
            return Err(SynthError::BadEdge { source_node: source, target, n_nodes: self.n_nodes });
        }
        self.edges.insert((source, target), sign);
        Ok(())
    }

    pub fn edge(&self, source: usize, target: usize) -> Option<Sign> {
        self.edges.get(&(source, target)).copied()
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.edges.contains_key(&(source, target))
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges sorted by `(source, target)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Sign)> + '_ {
        self.edges.iter().map(|(&(s, t), &sign)| (s, t, sign))
    }

    /// Sidecar CSV: `source,target,sign` with node names.
    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<(), SynthError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["source", "target", "sign"])?;
        for (s, t, sign) in self.edges() {
            wtr.write_record([names[s].as_str(), names[t].as_str(), &sign.as_i8().to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(names: &[String], reader: R) -> Result<Self, SynthError> {
        let mut graph = CausalGraph::new(names.len());
        let index = |name: &str, line: usize| {
            names.iter().position(|n| n == name).ok_or_else(|| SynthError::GraphCsv {
                line,
                msg: format!("unknown node '{name}'"),
            })
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 3 {
                return Err(SynthError::GraphCsv { line, msg: "expected source,target,sign".into() });
            }
            let s = index(&rec[0], line)?;
            let t = index(&rec[1], line)?;
            let sign = rec[2]
                .parse::<i8>()
                .ok()
                .and_then(Sign::from_i8)
                .ok_or_else(|| SynthError::GraphCsv { line, msg: format!("bad sign '{}'", &rec[2]) })?;
            graph.add_edge(s, t, sign)?;
        }
        Ok(graph)
    }
}

/// Three unidirectionally coupled logistic maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSpec {
    pub r: f64,
    pub alpha: f64,
    pub n: usize,
    pub seed: Seed,
    pub base_inits: [f64; 3],
    /// Half-width of the uniform jitter added to each initial condition; 0 disables it.
    pub noise_halfwidth: f64,
}

impl LogisticSpec {
    pub fn new(alpha: f64, n: usize, seed: Seed) -> Self {
        Self { r: 3.8, alpha, n, seed, base_inits: [0.1, 0.2, 0.3], noise_halfwidth: 0.01 }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n < 2 {
            return Err(SynthError::InvalidSpec(format!("logistic length {} < 2", self.n)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SynthError::InvalidSpec(format!("coupling {} outside [0, 1]", self.alpha)));
        }
        if !(self.r > 0.0 && self.r <= 4.0) {
            return Err(SynthError::InvalidSpec(format!("growth rate {} outside (0, 4]", self.r)));
        }
        if !(self.noise_halfwidth >= 0.0) {
            return Err(SynthError::InvalidSpec("negative jitter half-width".into()));
        }
        Ok(())
    }
}

/// Generates the coupled chain. Row 0 holds the (jittered) initial conditions.
pub fn gen_logistic(spec: &LogisticSpec) -> Result<(MultiSeries, CausalGraph), SynthError> {
    spec.validate()?;
    let jitter = if spec.noise_halfwidth > 0.0 {
        rng_uniform(spec.seed, -spec.noise_halfwidth, spec.noise_halfwidth, 3)?
    } else {
        vec![0.0; 3]
    };
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(spec.n)).collect();
    for j in 0..3 {
        cols[j].push((spec.base_inits[j] + jitter[j]).clamp(0.0, 1.0));
    }
    for t in 1..spec.n {
        for j in 0..3 {
            let prev = cols[j][t - 1];
            let drive = if j == 0 { 0.0 } else { spec.alpha * cols[j - 1][t - 1] };
            let next = spec.r * prev * (1.0 - prev) + drive;
            cols[j].push(next.clamp(0.0, 1.0));
        }
    }
    let mut truth = CausalGraph::new(3);
    if spec.alpha > 0.0 {
        truth.add_edge(0, 1, Sign::Positive)?;
        truth.add_edge(1, 2, Sign::Positive)?;
    }
    Ok((MultiSeries::from_columns(cols)?, truth))
}

/// How the diagonal of the connectivity matrix is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagonal {
    /// `C_ii = −leak`; only off-diagonals are sampled.
    Leak(f64),
    /// Diagonal entries are sampled like off-diagonal ones and stability
    /// must come from the draw itself.
    Sampled,
}

impl Default for Diagonal {
    fn default() -> Self {
        Diagonal::Leak(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MouSpec {
    pub n_nodes: usize,
    pub density: f64,
    pub sigma2: f64,
    pub t_points: usize,
    pub dt: f64,
    pub burn_in: usize,
    pub diagonal: Diagonal,
    pub seed: Seed,
}

impl MouSpec {
    pub fn new(n_nodes: usize, density: f64, seed: Seed) -> Self {
        Self {
            n_nodes,
            density,
            sigma2: 0.2,
            t_points: 100,
            dt: 0.1,
            burn_in: 200,
            diagonal: Diagonal::default(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_nodes < 2 {
            return Err(SynthError::InvalidSpec("need at least 2 nodes".into()));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(SynthError::InvalidSpec(format!("density {} outside (0, 1)", self.density)));
        }
        if !(self.sigma2 >= 0.0) || !(self.dt > 0.0) || self.t_points < 2 {
            return Err(SynthError::InvalidSpec("need sigma2 >= 0, dt > 0, t_points >= 2".into()));
        }
        Ok(())
    }
}

/// Stability margin demanded of sampled connectivity matrices.
pub const STABILITY_MARGIN: f64 = -0.05;
const MAX_RESAMPLES: usize = 100;
const DIVERGENCE_LIMIT: f64 = 1e6;

// Stream numbers under a trial seed.
const STREAM_CONNECTIVITY: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Sparse random connectivity: each ordered off-diagonal pair is present with
/// probability `density`, with weight `U(−1/(N·d), 1/(N·d))`. The whole matrix
/// is redrawn until its spectral abscissa is below [`STABILITY_MARGIN`].
/// Edge `j → i` carries the sign of `C[i, j]`.
pub fn gen_mou_connectivity(
    n_nodes: usize,
    density: f64,
    diagonal: Diagonal,
    seed: Seed,
) -> Result<(DMatrix<f64>, CausalGraph), SynthError> {
    if n_nodes < 2 || !(density > 0.0 && density < 1.0) {
        return Err(SynthError::InvalidSpec(format!("n_nodes={n_nodes}, density={density}")));
    }
    let bound = 1.0 / (n_nodes as f64 * density);
    let mut rng = seed.stream(STREAM_CONNECTIVITY);
    for _ in 0..MAX_RESAMPLES {
        let mut c = DMatrix::<f64>::zeros(n_nodes, n_nodes);
        for i in 0..n_nodes {
            for j in 0..n_nodes {
                if i == j {
                    if let Diagonal::Leak(leak) = diagonal {
                        c[(i, j)] = -leak;
                        continue;
                    }
                }
                if rng.random::<f64>() < density {
                    let mut w = 0.0;
                    while w == 0.0 {
                        w = rng.random_range(-bound..bound);
                    }
                    c[(i, j)] = w;
                }
            }
        }
        if spectral_abscissa(&c) < STABILITY_MARGIN {
            let mut graph = CausalGraph::new(n_nodes);
            for i in 0..n_nodes {
                for j in 0..n_nodes {
                    if i != j && c[(i, j)] != 0.0 {
                        graph.add_edge(j, i, Sign::of(c[(i, j)]))?;
                    }
                }
            }
            return Ok((c, graph));
        }
    }
    Err(SynthError::Unstable { attempts: MAX_RESAMPLES, threshold: STABILITY_MARGIN })
}

/// Euler–Maruyama: `X_{k+1} = X_k + C·X_k·dt + √(σ²·dt)·ξ_k`, `X_0 = 0`.
/// The first `burn_in` states are discarded and the next `t_points` recorded.
pub fn simulate_mou(
    c: &DMatrix<f64>,
    sigma2: f64,
    dt: f64,
    t_points: usize,
    burn_in: usize,
    seed: Seed,
) -> Result<MultiSeries, SynthError> {
    simulate_mou_from(c, &vec![0.0; c.nrows()], sigma2, dt, t_points, burn_in, seed)
}

/// [`simulate_mou`] started from an arbitrary state `x0`.
pub fn simulate_mou_from(
    c: &DMatrix<f64>,
    x0: &[f64],
    sigma2: f64,
    dt: f64,
    t_points: usize,
    burn_in: usize,
    seed: Seed,
) -> Result<MultiSeries, SynthError> {
    let n = c.nrows();
    if c.ncols() != n || n == 0 || x0.len() != n {
        return Err(SynthError::InvalidSpec("connectivity must be square, non-empty and match x0".into()));
    }
    let mut rng = seed.stream(STREAM_NOISE);
    let noise_scale = (sigma2 * dt).sqrt();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(t_points)).collect();
    for step in 1..=burn_in + t_points {
        for i in 0..n {
            let mut drift = 0.0;
            for j in 0..n {
                drift += c[(i, j)] * x[j];
            }
            let xi: f64 = rng.sample(StandardNormal);
            next[i] = x[i] + drift * dt + noise_scale * xi;
        }
        std::mem::swap(&mut x, &mut next);
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(SynthError::Diverged { step, limit: DIVERGENCE_LIMIT });
        }
        if step > burn_in {
            for (col, v) in cols.iter_mut().zip(&x) {
                col.push(*v);
            }
        }
    }
    Ok(MultiSeries::from_columns(cols)?)
}

/// Connectivity draw plus simulation for one MOU trial.
pub fn gen_mou(spec: &MouSpec) -> Result<(MultiSeries, CausalGraph, DMatrix<f64>), SynthError> {
    spec.validate()?;
    let (c, graph) = gen_mou_connectivity(spec.n_nodes, spec.density, spec.diagonal, spec.seed)?;
    let panel = simulate_mou(&c, spec.sigma2, spec.dt, spec.t_points, spec.burn_in, spec.seed)?;
    Ok((panel, graph, c))
}

/// Stationary covariance `Σ₀` solving `C·Σ₀ + Σ₀·Cᵀ + Σ = 0`, via the
/// vectorized system `(I ⊗ C + C ⊗ I)·vec(Σ₀) = −vec(Σ)`.
pub fn lyapunov_stationary_cov(c: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, SynthError> {
    let n = c.nrows();
    if c.ncols() != n || sigma.nrows() != n || sigma.ncols() != n {
        return Err(SynthError::InvalidSpec("Lyapunov operands must be square and conformant".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(c) + c.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, sigma.as_slice());
    let solution = system.lu().solve(&rhs).ok_or(SynthError::Singular)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(SynthError::Singular);
    }
    let cov = DMatrix::from_column_slice(n, n, solution.as_slice());
    // Symmetrize away round-off.
    Ok((&cov + cov.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_first_step_without_jitter() {
        let mut spec = LogisticSpec::new(0.1, 5, Seed(0));
        spec.noise_halfwidth = 0.0;
        let (panel, truth) = gen_logistic(&spec).unwrap();
        let expected = [0.342, 0.618, 0.818];
        for (j, e) in expected.iter().enumerate() {
            assert!((panel.column(j)[1] - e).abs() < 1e-12, "series {j}");
        }
        assert!(truth.has_edge(0, 1) && truth.has_edge(1, 2));
        assert!(!truth.has_edge(0, 2));
        assert_eq!(truth.n_edges(), 2);
    }

    #[test]
    fn logistic_uncoupled_is_independent() {
        let mut spec = LogisticSpec::new(0.0, 50, Seed(3));
        spec.noise_halfwidth = 0.0;
        let (panel, truth) = gen_logistic(&spec).unwrap();
        assert_eq!(truth.n_edges(), 0);
        for (j, init) in [0.1, 0.2, 0.3].iter().enumerate() {
            let mut x: f64 = *init;
            for t in 1..50 {
                x = 3.8 * x * (1.0 - x);
                assert!((panel.column(j)[t] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_stays_in_unit_interval() {
        for alpha in [0.1, 0.5, 0.9, 1.0] {
            for seed in 0..5 {
                let spec = LogisticSpec { r: 4.0, ..LogisticSpec::new(alpha, 300, Seed(seed)) };
                let (panel, _) = gen_logistic(&spec).unwrap();
                assert!(panel.columns().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn logistic_rejects_bad_spec() {
        assert!(gen_logistic(&LogisticSpec::new(1.5, 10, Seed(0))).is_err());
        assert!(gen_logistic(&LogisticSpec::new(0.5, 1, Seed(0))).is_err());
        assert!(gen_logistic(&LogisticSpec { r: 4.5, ..LogisticSpec::new(0.5, 10, Seed(0)) }).is_err());
    }

    #[test]
    fn connectivity_bounds_and_signs() {
        for seed in 0..20 {
            let (c, g) = gen_mou_connectivity(10, 0.5, Diagonal::default(), Seed(seed)).unwrap();
            assert!(spectral_abscissa(&c) < STABILITY_MARGIN);
            for i in 0..10 {
                assert_eq!(c[(i, i)], -1.0);
                for j in 0..10 {
                    if i != j {
                        assert!(c[(i, j)].abs() <= 0.2);
                        assert_eq!(g.edge(j, i), (c[(i, j)] != 0.0).then(|| Sign::of(c[(i, j)])));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_diagonal_cannot_be_stabilized() {
        // A zero-trace matrix always has an eigenvalue with non-negative real part.
        let r = gen_mou_connectivity(4, 0.5, Diagonal::Leak(0.0), Seed(1));
        assert!(matches!(r, Err(SynthError::Unstable { .. })));
    }

    #[test]
    fn deterministic_leak_decay() {
        let c = -DMatrix::<f64>::identity(2, 2);
        let panel = simulate_mou(&c, 0.0, 0.1, 10, 0, Seed(0)).unwrap();
        assert!(panel.columns().iter().flatten().all(|v| *v == 0.0));
        // Without noise the recursion is x_{k+1} = (1 − dt)·x_k.
        let panel = simulate_mou_from(&c, &[1.0, -2.0], 0.0, 0.1, 10, 0, Seed(0)).unwrap();
        for k in 0..10 {
            let decay = 0.9f64.powi(k as i32 + 1);
            assert!((panel.column(0)[k] - decay).abs() < 1e-14);
            assert!((panel.column(1)[k] + 2.0 * decay).abs() < 1e-14);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let c = DMatrix::<f64>::identity(2, 2) * 5.0;
        let r = simulate_mou(&c, 0.2, 0.5, 200, 0, Seed(0));
        assert!(matches!(r, Err(SynthError::Diverged { .. })));
    }

    #[test]
    fn lyapunov_examples() {
        let c = -DMatrix::<f64>::identity(2, 2);
        let s0 = lyapunov_stationary_cov(&c, &(DMatrix::identity(2, 2) * 0.2)).unwrap();
        assert!((s0 - DMatrix::identity(2, 2) * 0.1).norm() < 1e-14);
        let zero = lyapunov_stationary_cov(&c, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(zero.norm(), 0.0);
        for seed in 0..5 {
            let (c, _) = gen_mou_connectivity(6, 0.5, Diagonal::default(), Seed(seed)).unwrap();
            let q = DMatrix::identity(6, 6) * 0.2;
            let s = lyapunov_stationary_cov(&c, &q).unwrap();
            let resid = &c * &s + &s * c.transpose() + &q;
            assert!(resid.norm() < 1e-10);
        }
        assert!(matches!(
            lyapunov_stationary_cov(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)),
            Err(SynthError::Singular)
        ));
    }

    #[test]
    fn graph_csv_round_trip() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut g = CausalGraph::new(3);
        g.add_edge(0, 1, Sign::Positive).unwrap();
        g.add_edge(2, 0, Sign::Negative).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&names, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "source,target,sign\na,b,1\nc,a,-1\n");
        assert_eq!(CausalGraph::read_csv(&names, buf.as_slice()).unwrap(), g);
        assert!(g.clone().add_edge(1, 1, Sign::Positive).is_err());
    }
}
