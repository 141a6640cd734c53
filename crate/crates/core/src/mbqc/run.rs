use super::oracle::remove_frame;
use super::pattern::{ByproductFrame, GraphPattern};
use crate::encoding::{apo_set, combine_samples, logical_state, pure_tomography, LogicalState};
use crate::error::{QspError, Result};
use crate::fock::{apply, conjugate, CMatrix, DensityMatrix, FockSpace, QGrid, StateVector};
use crate::gates::{cphase, parity_rotation};
use crate::measurement::{measure_xy, measure_xy_pure, xy_branch, Basis, MeasurementRecord};
use crate::par::{try_map_indexed, Execution};
use crate::rng::RandomStream;
use crate::states::{coherent_amplitudes, displaced_thermal, ThermalParams, TAIL_MASS_LIMIT};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Modes the dense backend will hold.
pub const MAX_DENSE_MODES: usize = 2;
/// Amplitudes per trajectory state vector (`D^N`).
pub const MAX_TRAJECTORY_AMPLITUDES: usize = 1 << 22;
pub const DEFAULT_TRAJECTORIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dense,
    Trajectory { trajectories: usize },
}

/// Lazily generated trajectory ensemble of a graph state: member `i` is the
/// graph built from coherent states whose offsets are drawn from stream `i`.
#[derive(Debug, Clone)]
pub struct ClusterSampler {
    pattern: GraphPattern,
    params: ThermalParams,
    space: FockSpace,
    root: RandomStream,
    trajectories: usize,
}

impl ClusterSampler {
    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Member `i` together with its truncated tail mass.
    pub fn member(&self, i: usize) -> Result<(StateVector, f64)> {
        let mut rng = self.root.split(i as u64);
        self.member_with(&mut rng)
    }

    fn member_with(&self, rng: &mut RandomStream) -> Result<(StateVector, f64)> {
        let sigma = (self.params.n_bar / 2.0).sqrt();
        let alpha = self.params.alpha();
        let mut state: Option<StateVector> = None;
        let mut lost_total = 0.0;
        for v in &self.pattern.vertices {
            let beta = if self.params.n_bar > 0.0 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(sigma * re, sigma * im)
            } else {
                Complex64::new(0.0, 0.0)
            };
            let (amps, lost) = coherent_amplitudes(alpha + beta, self.space.cutoff());
            lost_total += lost;
            let mut one = StateVector::new(self.space, vec![v.id], amps)?;
            if let Some(phi) = v.prep_rotation {
                let r = parity_rotation(-phi / 2.0, self.space).on_mode(v.id)?;
                one = apply(&r, &one)?;
            }
            state = Some(match state {
                None => one,
                Some(s) => s.tensor(&one)?,
            });
        }
        let mut psi = state.expect("validated pattern has vertices");
        for [a, b] in &self.pattern.edges {
            psi = apply(&cphase(self.space, (*a, *b))?, &psi)?;
        }
        Ok((psi, lost_total))
    }
}

#[derive(Debug, Clone)]
pub enum ClusterState {
    Dense(DensityMatrix),
    Trajectory(ClusterSampler),
}

/// Prepares every vertex as a displaced thermal `|+_L>` (optionally rotated)
/// on the mode named by its id and applies CPhase on every edge.
pub fn build_cluster(
    pattern: &GraphPattern,
    params: &ThermalParams,
    space: FockSpace,
    backend: Backend,
    rng: &mut RandomStream,
) -> Result<ClusterState> {
    pattern.validate()?;
    params.validate()?;
    let n = pattern.vertices.len();
    match backend {
        Backend::Dense => {
            if n > MAX_DENSE_MODES {
                return Err(QspError::BudgetExceeded(format!(
                    "dense backend holds at most {MAX_DENSE_MODES} modes, pattern has {n}"
                )));
            }
            let single = displaced_thermal(params, space)?;
            let mut rho: Option<DensityMatrix> = None;
            for v in &pattern.vertices {
                let mut one = single.clone().with_modes(vec![v.id])?;
                if let Some(phi) = v.prep_rotation {
                    let r = parity_rotation(-phi / 2.0, space).on_mode(v.id)?;
                    one = conjugate(&r, &one)?;
                }
                rho = Some(match rho {
                    None => one,
                    Some(r) => r.tensor(&one)?,
                });
            }
            let mut rho = rho.expect("validated pattern has vertices");
            for [a, b] in &pattern.edges {
                rho = conjugate(&cphase(space, (*a, *b))?, &rho)?;
            }
            Ok(ClusterState::Dense(rho))
        }
        Backend::Trajectory { trajectories } => {
            if trajectories == 0 {
                return Err(QspError::InvalidParameter("zero trajectories".into()));
            }
            let amps = space.cutoff().checked_pow(n as u32).unwrap_or(usize::MAX);
            if amps > MAX_TRAJECTORY_AMPLITUDES {
                return Err(QspError::BudgetExceeded(format!(
                    "{n} modes at cutoff {} need {amps} amplitudes per trajectory, limit {MAX_TRAJECTORY_AMPLITUDES}",
                    space.cutoff()
                )));
            }
            Ok(ClusterState::Trajectory(ClusterSampler {
                pattern: pattern.clone(),
                params: *params,
                space,
                root: rng.fork(),
                trajectories,
            }))
        }
    }
}

/// How the dense backend picks measurement branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenseSelection {
    /// One branch drawn with its Born probability.
    Sample,
    /// The branch with these outcome bits (schedule order).
    PostSelect(Vec<u8>),
    /// Every branch, mixed with its probability after frame removal.
    Enumerate,
}

/// Outcomes of one trajectory or one dense branch.
#[derive(Debug, Clone, Serialize)]
pub struct Shot {
    pub records: Vec<MeasurementRecord>,
    pub frame: ByproductFrame,
    /// Probability of the branch (dense) or `1/count` (trajectory).
    pub weight: f64,
}

impl Shot {
    pub fn bits(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.bit()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternRun {
    pub shots: Vec<Shot>,
    /// Output state with the byproduct frame removed.
    pub output: LogicalState,
    /// Output state as measured; only meaningful for a single dense branch.
    pub raw_output: Option<LogicalState>,
}

/// Executes the schedule with adapted angles and returns the tomographic
/// output state with byproducts removed at the logical level.
///
/// `selection` is used by the dense backend only; trajectories always sample.
pub fn run_pattern(
    state: &ClusterState,
    pattern: &GraphPattern,
    selection: &DenseSelection,
    rng: &mut RandomStream,
    exec: Execution,
) -> Result<PatternRun> {
    pattern.validate()?;
    match state {
        ClusterState::Dense(rho) => run_dense(rho, pattern, selection, rng),
        ClusterState::Trajectory(sampler) => {
            if &sampler.pattern != pattern {
                return Err(QspError::InvalidPattern(
                    "state was built from a different pattern".into(),
                ));
            }
            run_trajectories(sampler, exec)
        }
    }
}

fn record_for(step_vertex: usize, theta: f64, bit: u8, weight: f64) -> MeasurementRecord {
    MeasurementRecord {
        mode: step_vertex,
        basis: if theta == 0.0 {
            Basis::X
        } else {
            Basis::XY(theta)
        },
        raw_x: None,
        logical_bit: if bit == 0 { 1 } else { -1 },
        weight,
    }
}

/// Follows one branch; `choose` picks the outcome bit at each step.
fn dense_branch(
    rho: &DensityMatrix,
    pattern: &GraphPattern,
    mut choose: impl FnMut(usize, &DensityMatrix, f64) -> Result<(MeasurementRecord, DensityMatrix)>,
) -> Result<(Vec<MeasurementRecord>, DensityMatrix, f64)> {
    let mut current = rho.clone();
    let mut records = Vec::new();
    let mut bits = Vec::new();
    let mut prob = 1.0;
    for i in 0..pattern.schedule.len() {
        let theta = pattern.adapted_angle(i, &bits);
        let (rec, next) = choose(i, &current, theta)?;
        prob *= rec.weight;
        bits.push(rec.bit());
        records.push(rec);
        current = next;
    }
    Ok((records, current, prob))
}

fn run_dense(
    rho: &DensityMatrix,
    pattern: &GraphPattern,
    selection: &DenseSelection,
    rng: &mut RandomStream,
) -> Result<PatternRun> {
    let flow = pattern.flow()?;
    let m = pattern.schedule.len();
    let fixed = |bits: Vec<u8>| {
        move |i: usize, cur: &DensityMatrix, theta: f64| {
            let v = pattern.schedule[i].vertex;
            let outcome = if bits[i] == 0 { 1 } else { -1 };
            let (next, w) = xy_branch(cur, v, theta, outcome)?;
            Ok((record_for(v, theta, bits[i], w), next))
        }
    };
    let branches: Vec<Vec<u8>> = match selection {
        DenseSelection::Sample => Vec::new(),
        DenseSelection::PostSelect(bits) => {
            if bits.len() != m {
                return Err(QspError::InvalidParameter(format!(
                    "post-selection needs {m} outcome bits, got {}",
                    bits.len()
                )));
            }
            vec![bits.clone()]
        }
        DenseSelection::Enumerate => (0..1usize << m)
            .map(|code| (0..m).map(|i| ((code >> (m - 1 - i)) & 1) as u8).collect())
            .collect(),
    };
    let mut results = Vec::new();
    if branches.is_empty() {
        results.push(dense_branch(rho, pattern, |i, cur, theta| {
            let v = pattern.schedule[i].vertex;
            measure_xy(cur, v, theta, rng)
        })?);
    } else {
        for bits in branches {
            match dense_branch(rho, pattern, fixed(bits)) {
                Ok(r) => results.push(r),
                // enumeration skips branches that cannot occur
                Err(QspError::ZeroProbabilityBranch(_))
                    if *selection == DenseSelection::Enumerate => {}
                Err(e) => return Err(e),
            }
        }
    }
    let dim = 1 << pattern.outputs.len();
    let mut mixture = CMatrix::zeros(dim, dim);
    let mut shots = Vec::new();
    let mut raw_output = None;
    let mut last_corrected = None;
    for (records, rest, prob) in results {
        let bits: Vec<u8> = records.iter().map(|r| r.bit()).collect();
        let frame = pattern.frame(&flow, &bits);
        let raw = logical_state(&rest, &pattern.outputs)?;
        let corrected = remove_frame(&raw, &frame)?;
        mixture += corrected.matrix() * Complex64::new(prob, 0.0);
        shots.push(Shot {
            records,
            frame,
            weight: prob,
        });
        raw_output = Some(raw);
        last_corrected = Some(corrected);
    }
    let total: f64 = shots.iter().map(|s| s.weight).sum();
    let output = if shots.len() == 1 {
        last_corrected.expect("one branch")
    } else {
        raw_output = None;
        LogicalState::from_matrix(mixture / Complex64::new(total, 0.0))?
            .with_modes(pattern.outputs.clone())?
    };
    Ok(PatternRun {
        shots,
        output,
        raw_output,
    })
}

fn run_trajectories(sampler: &ClusterSampler, exec: Execution) -> Result<PatternRun> {
    let pattern = &sampler.pattern;
    let flow = pattern.flow()?;
    let space = sampler.space;
    let apo = apo_set(space)?;
    let grid = QGrid::default_for(space);
    let count = sampler.trajectories;
    let per = try_map_indexed(exec, count, |i| {
        let mut rng = sampler.root.split(i as u64);
        let (mut psi, lost) = sampler.member_with(&mut rng)?;
        let mut records = Vec::with_capacity(pattern.schedule.len());
        let mut bits = Vec::with_capacity(pattern.schedule.len());
        for (k, step) in pattern.schedule.iter().enumerate() {
            let theta = pattern.adapted_angle(k, &bits);
            let (rec, rest) = measure_xy_pure(&psi, step.vertex, theta, &mut rng, &grid)?;
            bits.push(rec.bit());
            records.push(rec);
            psi = rest.expect("outputs remain after every measurement");
        }
        let frame = pattern.frame(&flow, &bits);
        let mut tomo = pure_tomography(&psi, &pattern.outputs, &apo)?;
        let n_out = pattern.outputs.len();
        let mut digits = vec![0usize; n_out];
        for (mu, e) in tomo.expectations.iter_mut().enumerate() {
            let mut rem = mu;
            for k in (0..n_out).rev() {
                digits[k] = rem % 4;
                rem /= 4;
            }
            *e *= frame.pauli_sign(&digits);
        }
        Ok((
            tomo,
            Shot {
                records,
                frame,
                weight: 1.0 / count as f64,
            },
            lost,
        ))
    })?;
    let mean_lost = per.iter().map(|(_, _, l)| l).sum::<f64>() / count as f64;
    if mean_lost > TAIL_MASS_LIMIT {
        return Err(QspError::CutoffTooSmall {
            what: "coherent ensemble tail mass",
            defect: mean_lost,
            limit: TAIL_MASS_LIMIT,
        });
    }
    let mut samples = Vec::with_capacity(count);
    let mut shots = Vec::with_capacity(count);
    for (t, s, _) in per {
        samples.push(t);
        shots.push(s);
    }
    let output = combine_samples(&samples, &vec![1.0; count], &pattern.outputs)?;
    Ok(PatternRun {
        shots,
        output,
        raw_output: None,
    })
}
