//! Two-spin ¹³C–¹H relaxation model in the secular approximation.
//!
//! The fifteen coherence coordinates split into four blocks (populations and
//! the three coherence orders). Each block is specified by the rate matrix as
//! it is usually tabulated, with positive rate entries and `±πJ` couplings.
//! The symmetric part becomes the relaxation matrix (applied with the
//! contracting sign `ẋ = −R(x − x_eq)`), the antisymmetric part becomes the
//! Hamiltonian generator of `(πJ/2) ZZ`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{lindblad_to_bloch, AffineGenerator, GeneratorOptions};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::pauli::{CMatrix, PauliBasis};

/// Relaxation rates `r1..r14` (1/s), scalar coupling `J` (Hz) and the
/// equilibrium polarizations in ε-units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub r: [f64; 14],
    #[serde(rename = "J_hz")]
    pub j_hz: f64,
    #[serde(rename = "eps_C")]
    pub eps_c: f64,
    #[serde(rename = "eps_H")]
    pub eps_h: f64,
}

impl Default for RateSet {
    fn default() -> Self {
        Self {
            r: [
                0.0532, 0.0918, 0.0798, 0.0212, 0.0000, 0.0022, 3.495, 6.536, 0.0100, 2.955, 6.118, 0.030, 9.523,
                0.008,
            ],
            j_hz: 214.5,
            eps_c: 1.0,
            eps_h: 4.0,
        }
    }
}

/// Indices (0-based) of the auto-relaxation rates, which must be positive.
const AUTO_RATES: [usize; 8] = [0, 1, 2, 6, 7, 9, 10, 12];

/// One of the four secular blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Population,
    CarbonCoherence,
    ProtonCoherence,
    ZeroDoubleQuantum,
}

impl Block {
    pub const ALL: [Block; 4] =
        [Block::Population, Block::CarbonCoherence, Block::ProtonCoherence, Block::ZeroDoubleQuantum];

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Block::Population => &["ZI", "IZ", "ZZ"],
            Block::CarbonCoherence => &["XI", "YI", "XZ", "YZ"],
            Block::ProtonCoherence => &["IX", "IY", "ZX", "ZY"],
            Block::ZeroDoubleQuantum => &["XY", "YX", "XX", "YY"],
        }
    }

    /// Indices into [`RateSet::r`] of the rates this block depends on.
    pub fn rate_indices(self) -> &'static [usize] {
        match self {
            Block::Population => &[0, 1, 2, 3, 4, 5],
            Block::CarbonCoherence => &[6, 7, 8],
            Block::ProtonCoherence => &[9, 10, 11],
            Block::ZeroDoubleQuantum => &[12, 13],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Population => "population",
            Block::CarbonCoherence => "carbon-coherence",
            Block::ProtonCoherence => "proton-coherence",
            Block::ZeroDoubleQuantum => "zero-double-quantum",
        }
    }
}

impl std::str::FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "population" | "pop" => Ok(Block::Population),
            "carbon-coherence" | "c" | "carbon" => Ok(Block::CarbonCoherence),
            "proton-coherence" | "h" | "proton" => Ok(Block::ProtonCoherence),
            "zero-double-quantum" | "zq-dq" | "zqdq" | "mq" => Ok(Block::ZeroDoubleQuantum),
            other => Err(Error::Validation(format!("unknown block '{other}'"))),
        }
    }
}

/// A block with its coordinate labels and positions in the coherence vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularBlock {
    pub block: Block,
    pub labels: Vec<String>,
    pub coords: Vec<usize>,
}

/// The four blocks of the two-qubit coherence vector.
pub fn secular_blocks() -> Vec<SecularBlock> {
    let basis = PauliBasis::new(2).expect("two qubits");
    Block::ALL
        .iter()
        .map(|&block| SecularBlock {
            block,
            labels: block.labels().iter().map(|s| s.to_string()).collect(),
            coords: block.labels().iter().map(|l| basis.coord_of(l).expect("valid label")).collect(),
        })
        .collect()
}

impl RateSet {
    pub fn pi_j(&self) -> f64 {
        PI * self.j_hz
    }

    /// Equilibrium on the population block `(ZI, IZ, ZZ)`.
    pub fn population_equilibrium(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.eps_c, self.eps_h, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("rate r{} is not finite", k + 1)));
        }
        if let Some(&k) = AUTO_RATES.iter().find(|&&k| self.r[k] <= 0.0) {
            return Err(Error::Validation(format!("auto-relaxation rate r{} must be positive", k + 1)));
        }
        for (name, v) in [("J_hz", self.j_hz), ("eps_C", self.eps_c), ("eps_H", self.eps_h)] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// The block's rate matrix in tabulated form. The population block is
    /// 4×4 and acts on `(1/4, ZI, IZ, ZZ)`; the others act on their four
    /// coordinates.
    pub fn literal_block_matrix(&self, block: Block) -> DMatrix<f64> {
        let r = |k: usize| self.r[k - 1];
        let pj = self.pi_j();
        match block {
            Block::Population => {
                let (ec, eh) = (self.eps_c, self.eps_h);
                DMatrix::from_row_slice(4, 4, &[
                    0.0, 0.0, 0.0, 0.0,
                    -4.0 * (r(1) * ec + r(4) * eh), r(1), r(4), r(5),
                    -4.0 * (r(4) * ec + r(2) * eh), r(4), r(2), r(6),
                    -4.0 * (r(5) * ec + r(6) * eh), r(5), r(6), r(3),
                ])
            }
            Block::CarbonCoherence => coherence_block(r(7), r(8), r(9), pj),
            Block::ProtonCoherence => coherence_block(r(10), r(11), r(12), pj),
            Block::ZeroDoubleQuantum => DMatrix::from_row_slice(4, 4, &[
                r(13), -r(14), 0.0, 0.0,
                -r(14), r(13), 0.0, 0.0,
                0.0, 0.0, r(13), r(14),
                0.0, 0.0, r(14), r(13),
            ]),
        }
    }

    /// Symmetric (relaxation) part of a block on its own coordinates.
    pub fn relaxation_block(&self, block: Block) -> DMatrix<f64> {
        let m = self.block_core(block);
        (&m + m.transpose()) * 0.5
    }

    /// Antisymmetric (coherent) part of a block on its own coordinates.
    pub fn hamiltonian_block(&self, block: Block) -> DMatrix<f64> {
        let m = self.block_core(block);
        (&m - m.transpose()) * 0.5
    }

    fn block_core(&self, block: Block) -> DMatrix<f64> {
        let m = self.literal_block_matrix(block);
        match block {
            Block::Population => m.view((1, 1), (3, 3)).into_owned(),
            _ => m,
        }
    }

    /// Assembles the 15-dimensional generator.
    pub fn assemble(&self) -> Result<AffineGenerator> {
        self.validate()?;
        let d = 15;
        let mut h = DMatrix::zeros(d, d);
        let mut r = DMatrix::zeros(d, d);
        for sb in secular_blocks() {
            let rb = self.relaxation_block(sb.block);
            let hb = self.hamiltonian_block(sb.block);
            for (i, &ci) in sb.coords.iter().enumerate() {
                for (j, &cj) in sb.coords.iter().enumerate() {
                    r[(ci, cj)] = rb[(i, j)];
                    h[(ci, cj)] = hb[(i, j)];
                }
            }
        }

        // The tabulated constant column must be consistent with the equilibrium.
        let lit = self.literal_block_matrix(Block::Population);
        let x_eq = self.population_equilibrium();
        let drive = -lit.view((1, 0), (3, 1)).into_owned() * 0.25;
        let residual = (drive.column(0) - self.relaxation_block(Block::Population) * &x_eq).amax();
        if residual > 1e-9 * (1.0 + drive.amax()) {
            return Err(Error::InputInconsistency(format!(
                "population drive inconsistent with equilibrium (residual {residual:.3e})"
            )));
        }

        let coupling = zz_coupling_generator(self.j_hz)?;
        let mismatch = (&h - coupling.h()).amax();
        if mismatch > 1e-9 * (1.0 + self.pi_j()) {
            return Err(Error::InputInconsistency(format!(
                "coherent block entries disagree with the J-coupling Hamiltonian (mismatch {mismatch:.3e})"
            )));
        }

        let basis = PauliBasis::new(2)?;
        let mut r_eq = DVector::zeros(d);
        for (label, value) in [("ZI", self.eps_c), ("IZ", self.eps_h)] {
            r_eq[basis.coord_of(label).expect("label")] = value;
        }
        AffineGenerator::new(2, h, r, r_eq, GeneratorOptions::default())
    }

    pub fn to_json_string(&self) -> String {
        crate::io::to_json_string(self)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let rates: RateSet = serde_json::from_str(text)?;
        rates.validate()?;
        Ok(rates)
    }
}

#[rustfmt::skip]
fn coherence_block(auto_in: f64, auto_anti: f64, cross: f64, pj: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, &[
        auto_in, 0.0, cross, -pj,
        0.0, auto_in, pj, cross,
        cross, -pj, auto_anti, 0.0,
        pj, cross, 0.0, auto_anti,
    ])
}

/// Generator of `H = (πJ/2) ZZ` alone (no relaxation).
pub fn zz_coupling_generator(j_hz: f64) -> Result<AffineGenerator> {
    let basis = PauliBasis::new(2)?;
    let zz = basis.element(basis.index_of("ZZ").expect("label")).to_matrix();
    let h = zz * Complex64::new(PI * j_hz / 2.0, 0.0);
    let zero = |m: &CMatrix| CMatrix::zeros(m.nrows(), m.ncols());
    lindblad_to_bloch(&basis, &h, zero, GeneratorOptions { allow_unital: true })
}

/// Observed expectation values over time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// One row per time, one column per label.
    pub values: Vec<Vec<f64>>,
    /// Known initial state on the block coordinates; the first row is used
    /// when absent.
    pub initial: Option<Vec<f64>>,
}

impl TrajectorySample {
    pub fn new(times: Vec<f64>, labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self { times, labels, values, initial: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let basis = PauliBasis::new(2)?;
        for l in &self.labels {
            if basis.coord_of(l).is_none() {
                return Err(Error::Validation(format!("unknown observable label '{l}'")));
            }
        }
        if self.values.len() != self.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), got: self.values.len() });
        }
        if let Some(row) = self.values.iter().find(|row| row.len() != self.labels.len()) {
            return Err(Error::DimensionMismatch { expected: self.labels.len(), got: row.len() });
        }
        if self.times.iter().chain(self.values.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Validation("trajectory contains non-finite values".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("trajectory times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Column of observable `label`.
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| l == label)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    /// Reads `t,<label>,...` CSV.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::Validation("trajectory CSV must start with a 't' column".into()));
        }
        let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let parsed = parsed.map_err(|e| Error::Validation(format!("bad number in trajectory CSV: {e}")))?;
            if parsed.len() != labels.len() + 1 {
                return Err(Error::DimensionMismatch { expected: labels.len() + 1, got: parsed.len() });
            }
            times.push(parsed[0]);
            values.push(parsed[1..].to_vec());
        }
        Self::new(times, labels, values)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![crate::io::fmt_f64(*t)];
            rec.extend(row.iter().map(|v| crate::io::fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Copy with i.i.d. Gaussian noise of standard deviation
    /// `relative · max|value|` added to every observation. The known initial
    /// state, if any, is kept noise free.
    pub fn with_noise<R: Rng + ?Sized>(&self, relative: f64, rng: &mut R) -> Result<Self> {
        if !(relative.is_finite() && relative >= 0.0) {
            return Err(Error::Validation(format!("noise level must be finite and >= 0, got {relative}")));
        }
        let peak = self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let normal = Normal::new(0.0, relative * peak).map_err(|e| Error::Validation(e.to_string()))?;
        let mut noisy = self.clone();
        for v in noisy.values.iter_mut().flatten() {
            *v += normal.sample(rng);
        }
        Ok(noisy)
    }
}

/// Evolution restricted to one block, `ẋ = (H_b − R_b) x + R_b x*_b`.
#[derive(Debug, Clone)]
struct BlockModel {
    a: DMatrix<f64>,
    fixed: DVector<f64>,
}

impl BlockModel {
    fn new(rates: &RateSet, block: Block) -> Self {
        let a = rates.hamiltonian_block(block) - rates.relaxation_block(block);
        let fixed = match block {
            Block::Population => rates.population_equilibrium(),
            _ => DVector::zeros(4),
        };
        Self { a, fixed }
    }

    /// States at `times`, starting from `x0` at `times[0]`.
    fn trajectory(&self, x0: &DVector<f64>, times: &[f64]) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(times.len());
        let mut dev = x0 - &self.fixed;
        let mut cached: Option<(f64, DMatrix<f64>)> = None;
        out.push(x0.clone());
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            let step = match &cached {
                Some((h, m)) if (h - dt).abs() <= 1e-12 * dt.abs() => m.clone(),
                _ => {
                    let m = (&self.a * dt).exp();
                    cached = Some((dt, m.clone()));
                    m
                }
            };
            dev = step * dev;
            out.push(&dev + &self.fixed);
        }
        out
    }
}

/// Synthetic block trajectory from `rates`, using the full 15-dimensional
/// generator.
pub fn synthesize(rates: &RateSet, block: Block, initial: &[f64], times: &[f64]) -> Result<TrajectorySample> {
    let labels = block.labels();
    if initial.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: initial.len() });
    }
    let gen = rates.assemble()?;
    let basis = PauliBasis::new(2)?;
    let coords: Vec<usize> = labels.iter().map(|l| basis.coord_of(l).expect("label")).collect();
    // other blocks sit at equilibrium; the blocks are decoupled
    let mut r0 = gen.r_eq().clone();
    for (&c, &v) in coords.iter().zip(initial) {
        r0[c] = v;
    }
    let t0 = times.first().copied().unwrap_or(0.0);
    let values = times
        .iter()
        .map(|&t| {
            let r = gen.propagator(t - t0)?.apply(&r0);
            Ok(coords.iter().map(|&c| r[c]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut sample = TrajectorySample::new(times.to_vec(), labels.iter().map(|s| s.to_string()).collect(), values)?;
    sample.initial = Some(initial.to_vec());
    Ok(sample)
}

/// Options for [`fit_rates`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub optimizer: NelderMeadOptions,
    /// Relative perturbations of the initial guess used as extra starts.
    pub start_factors: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { optimizer: NelderMeadOptions::default(), start_factors: vec![1.0, 0.7, 1.4] }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub rates: RateSet,
    pub block: Block,
    /// Sum of squared residuals.
    pub objective: f64,
    pub rms: f64,
    pub samples: usize,
    pub evaluations: usize,
}

struct PreparedTrajectory {
    times: Vec<f64>,
    initial: DVector<f64>,
    /// `(row, block coordinate)` → observed value
    observed: Vec<Vec<f64>>,
}

fn prepare(trajs: &[TrajectorySample], block: Block) -> Result<(Vec<PreparedTrajectory>, usize)> {
    let labels = block.labels();
    let mut prepared = Vec::with_capacity(trajs.len());
    let mut samples = 0;
    for traj in trajs {
        traj.validate()?;
        let cols: Vec<usize> = labels
            .iter()
            .map(|l| {
                traj.labels.iter().position(|x| x == l).ok_or_else(|| {
                    Error::Validation(format!("trajectory is missing observable '{l}' of the {} block", block.name()))
                })
            })
            .collect::<Result<_>>()?;
        let observed: Vec<Vec<f64>> = traj.values.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
        let params = block.rate_indices().len();
        if traj.times.len() < 3 {
            return Err(Error::RankDeficient { samples: traj.times.len() * labels.len(), params });
        }
        let initial = match &traj.initial {
            Some(x0) if x0.len() == labels.len() => DVector::from_column_slice(x0),
            Some(x0) => return Err(Error::DimensionMismatch { expected: labels.len(), got: x0.len() }),
            None => DVector::from_column_slice(&observed[0]),
        };
        // when the initial state is taken from the data the first row carries no information
        let informative_rows = if traj.initial.is_some() { traj.times.len() } else { traj.times.len() - 1 };
        samples += informative_rows * labels.len();
        prepared.push(PreparedTrajectory { times: traj.times.clone(), initial, observed });
    }
    Ok((prepared, samples))
}

fn block_objective(rates: &RateSet, block: Block, trajs: &[PreparedTrajectory]) -> f64 {
    let model = BlockModel::new(rates, block);
    let mut total = 0.0;
    for traj in trajs {
        let sim = model.trajectory(&traj.initial, &traj.times);
        for (x, obs) in sim.iter().zip(&traj.observed) {
            total += x.iter().zip(obs).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
    }
    if total.is_finite() {
        total
    } else {
        f64::MAX
    }
}

/// Least-squares fit of one block's rates to observed trajectories.
///
/// Rates outside the block are copied from `init`.
pub fn fit_rates(trajs: &[TrajectorySample], block: Block, init: &RateSet, opts: &FitOptions) -> Result<FitResult> {
    init.validate()?;
    let idx = block.rate_indices();
    if trajs.is_empty() {
        return Err(Error::RankDeficient { samples: 0, params: idx.len() });
    }
    let (prepared, samples) = prepare(trajs, block)?;
    if samples < idx.len() {
        return Err(Error::RankDeficient { samples, params: idx.len() });
    }

    let block_scale = idx.iter().map(|&k| init.r[k].abs()).fold(0.0, f64::max).max(1e-12);
    let scale: Vec<f64> = idx.iter().map(|&k| init.r[k].abs().max(1e-3 * block_scale)).collect();
    let to_rates = |theta: &[f64]| {
        let mut rates = init.clone();
        for ((&k, &t), &s) in idx.iter().zip(theta).zip(&scale) {
            rates.r[k] = t * s;
        }
        rates
    };
    let objective = |theta: &[f64]| {
        let rates = to_rates(theta);
        if AUTO_RATES.iter().any(|&k| rates.r[k] <= 0.0) {
            return f64::MAX;
        }
        block_objective(&rates, block, &prepared)
    };

    let base: Vec<f64> = idx.iter().zip(&scale).map(|(&k, s)| init.r[k] / s).collect();
    let edge = vec![0.1; idx.len()];
    let runs: Vec<_> = opts
        .start_factors
        .par_iter()
        .map(|&f| {
            let start: Vec<f64> = base.iter().map(|b| b * f).collect();
            nelder_mead(objective, &start, &edge, &opts.optimizer)
        })
        .collect();
    let evaluations = runs.iter().map(|m| m.evals).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(Error::RankDeficient { samples, params: idx.len() })?;
    let rates = to_rates(&best.x);
    let total_points: usize = prepared.iter().map(|t| t.times.len() * block.labels().len()).sum();
    Ok(FitResult {
        rates,
        block,
        objective: best.value,
        rms: (best.value / total_points as f64).sqrt(),
        samples,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve;
    use crate::oracles::rk4_evolve;
    use crate::pauli::CoherenceVector;

    #[test]
    fn default_rates_and_equilibrium() {
        let rates = RateSet::default();
        assert_eq!(rates.r[0], 0.0532);
        assert_eq!(rates.r[13], 0.008);
        let gen = rates.assemble().unwrap();
        let basis = PauliBasis::new(2).unwrap();
        let expected = CoherenceVector::from_labels(&basis, &[("ZI", 1.0), ("IZ", 4.0)]).unwrap();
        assert_eq!(gen.r_eq(), expected.as_vector());
        assert!(gen.is_strictly_contractive());
    }

    #[test]
    fn population_drive_matches_equilibrium() {
        // tabulated first column is −(4 r1 + 16 r4) ε etc. for ε_C = 1, ε_H = 4
        let rates = RateSet::default();
        let lit = rates.literal_block_matrix(Block::Population);
        let r = &rates.r;
        assert!((lit[(1, 0)] + (4.0 * r[0] + 16.0 * r[3])).abs() < 1e-15);
        assert!((lit[(2, 0)] + (4.0 * r[3] + 16.0 * r[1])).abs() < 1e-15);
        assert!((lit[(3, 0)] + (4.0 * r[4] + 16.0 * r[5])).abs() < 1e-15);
        let x_eq = rates.population_equilibrium();
        let steady = lit.view((1, 0), (3, 1)) * 0.25 + rates.relaxation_block(Block::Population) * &x_eq;
        assert!(steady.amax() < 1e-12);
    }

    #[test]
    fn hamiltonian_part_is_j_coupling() {
        let rates = RateSet::default();
        let gen = rates.assemble().unwrap();
        let coupling = zz_coupling_generator(rates.j_hz).unwrap();
        assert!((gen.h() - coupling.h()).amax() < 1e-9);
        let basis = PauliBasis::new(2).unwrap();
        let c = |l: &str| basis.coord_of(l).unwrap();
        let pj = PI * 214.5;
        assert_eq!(gen.h()[(c("YZ"), c("XI"))], pj);
        assert_eq!(gen.h()[(c("XI"), c("YZ"))], -pj);
        assert_eq!(gen.h()[(c("ZY"), c("IX"))], pj);
        assert_eq!(gen.h()[(c("XY"), c("YX"))], 0.0);
    }

    #[test]
    fn structure_is_exact() {
        let gen = RateSet::default().assemble().unwrap();
        assert!((gen.r() - gen.r().transpose()).amax() < 1e-12);
        assert!((gen.h() + gen.h().transpose()).amax() < 1e-12);
    }

    #[test]
    fn blocks_partition_coordinates() {
        let blocks = secular_blocks();
        let mut all: Vec<usize> = blocks.iter().flat_map(|b| b.coords.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..15).collect::<Vec<_>>());
        let gen = RateSet::default().assemble().unwrap();
        let owner = |k: usize| blocks.iter().position(|b| b.coords.contains(&k)).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                if owner(i) != owner(j) {
                    assert_eq!(gen.r()[(i, j)], 0.0);
                    assert_eq!(gen.h()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn coherence_block_is_positive_definite() {
        let rates = RateSet::default();
        let eig = rates.relaxation_block(Block::CarbonCoherence).symmetric_eigenvalues();
        // 2×2 pair [[r7, r9], [r9, r8]] appears twice
        let (a, b, c) = (3.495, 6.536, 0.0100);
        let mean = (a + b) / 2.0;
        let half = (((a - b) / 2.0f64).powi(2) + c * c).sqrt();
        let mut sorted: Vec<f64> = eig.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        for (got, want) in sorted.iter().zip([mean - half, mean - half, mean + half, mean + half]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(sorted[0] > 0.0);
    }

    #[test]
    fn zero_cross_rates_give_diagonal_relaxation() {
        let mut rates = RateSet::default();
        for k in [4, 5, 6, 9, 12, 14] {
            rates.r[k - 1] = 0.0;
        }
        let gen = rates.assemble().unwrap();
        let r = gen.r();
        for i in 0..15 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..15 {
                if i != j {
                    assert_eq!(r[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        let mut rates = RateSet::default();
        rates.r[0] = -0.1;
        assert!(matches!(rates.assemble(), Err(Error::Validation(_))));
        let mut rates = RateSet::default();
        rates.r[3] = 0.2; // cross rate larger than the autos breaks definiteness
        assert!(matches!(rates.assemble(), Err(Error::ContractivityViolation { .. })));
        let mut rates = RateSet::default();
        rates.r[8] = f64::NAN;
        assert!(rates.assemble().is_err());
    }

    #[test]
    fn free_evolution_reaches_equilibrium() {
        let gen = RateSet::default().assemble().unwrap();
        let out = evolve(&gen, &CoherenceVector::zeros(2), 800.0).unwrap();
        assert!((out.as_vector() - gen.r_eq()).amax() < 1e-9);
    }

    #[test]
    fn distance_to_equilibrium_decreases() {
        let gen = RateSet::default().assemble().unwrap();
        let basis = PauliBasis::new(2).unwrap();
        let r0 = CoherenceVector::from_labels(&basis, &[("XI", 1.0), ("ZZ", -2.0), ("IZ", -4.0)]).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let r = evolve(&gen, &r0, k as f64 * 0.5).unwrap();
            let d = (r.as_vector() - gen.r_eq()).norm();
            assert!(d < last);
            last = d;
        }
        let rk = rk4_evolve(&gen, r0.as_vector(), 0.05, 5000);
        assert!((evolve(&gen, &r0, 0.05).unwrap().as_vector() - rk).amax() < 1e-9);
    }

    #[test]
    fn rates_json_round_trip() {
        let rates = RateSet::default();
        let text = rates.to_json_string();
        assert!(text.contains("\"J_hz\"") && text.contains("\"eps_C\""));
        assert_eq!(RateSet::from_json_str(&text).unwrap(), rates);
        assert!(RateSet::from_json_str(r#"{"r":[1,2],"J_hz":1,"eps_C":1,"eps_H":4}"#).is_err());
    }

    #[test]
    fn block_model_matches_full_generator() {
        let rates = RateSet::default();
        for block in Block::ALL {
            let init: Vec<f64> = (0..block.labels().len()).map(|i| 0.5 - i as f64 * 0.3).collect();
            let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.037).collect();
            let synth = synthesize(&rates, block, &init, &times).unwrap();
            let model = BlockModel::new(&rates, block);
            let sim = model.trajectory(&DVector::from_column_slice(&init), &times);
            for (row, x) in synth.values.iter().zip(&sim) {
                for (a, b) in row.iter().zip(x.iter()) {
                    assert!((a - b).abs() < 1e-10, "{block:?}");
                }
            }
        }
    }

    #[test]
    fn single_time_point_is_rank_deficient() {
        let rates = RateSet::default();
        let synth = synthesize(&rates, Block::Population, &[0.0, 0.0, 0.0], &[0.0]).unwrap();
        let err = fit_rates(&[synth], Block::Population, &rates, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        let err = fit_rates(&[], Block::Population, &rates, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn trajectory_validation() {
        let bad = TrajectorySample::new(vec![0.0, 0.0], vec!["ZI".into()], vec![vec![1.0], vec![2.0]]);
        assert!(matches!(bad, Err(Error::Validation(_))));
        let bad = TrajectorySample::new(vec![0.0], vec!["QQ".into()], vec![vec![1.0]]);
        assert!(matches!(bad, Err(Error::Validation(_))));
        let synth = synthesize(&RateSet::default(), Block::CarbonCoherence, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.1, 0.2])
            .unwrap();
        let err = fit_rates(&[synth], Block::Population, &RateSet::default(), &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn csv_round_trip() {
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.25).collect();
        let synth = synthesize(&RateSet::default(), Block::Population, &[-1.0, 4.0, 0.0], &times).unwrap();
        let mut buf = Vec::new();
        synth.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,ZI,IZ,ZZ\n"));
        let back = TrajectorySample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, synth.times);
        assert_eq!(back.values, synth.values);
    }
}
