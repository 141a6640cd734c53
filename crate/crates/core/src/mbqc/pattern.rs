use crate::error::{QspError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Largest graph accepted by [`GraphPattern::validate`]; the qubit-level
/// oracle is exponential in this.
pub const MAX_VERTICES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    #[default]
    #[serde(alias = "aux")]
    Auxiliary,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    /// Also the mode index of the qumode carrying this qubit.
    pub id: usize,
    #[serde(default)]
    pub role: Role,
    /// Prepares `(|0> + e^{i phi}|1>)/sqrt 2` instead of `|+>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep_rotation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adapt {
    /// Outcomes that flip the sign of the angle.
    #[serde(default)]
    pub s_domain: Vec<usize>,
    /// Outcomes that add `pi` to the angle.
    #[serde(default)]
    pub t_domain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub vertex: usize,
    /// `X`-`Y` plane angle; `0` is an `X` measurement.
    pub theta: f64,
    #[serde(default)]
    pub adapt: Adapt,
}

/// Graph state plus adaptive measurement schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPattern {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<[usize; 2]>,
    pub schedule: Vec<Step>,
    pub outputs: Vec<usize>,
}

/// Causal flow: `successor[v]` receives the `X` correction for `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flow {
    pub successor: BTreeMap<usize, usize>,
    /// Distance from the outputs; larger layers are measured first.
    pub layer: BTreeMap<usize, usize>,
}

fn invalid(msg: impl Into<String>) -> QspError {
    QspError::InvalidPattern(msg.into())
}

impl GraphPattern {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }

    /// Input vertex `0`, output vertex `1`, one edge; vertex 0 measured at `theta`.
    pub fn wire(theta: f64) -> Self {
        Self {
            vertices: vec![
                Vertex {
                    id: 0,
                    role: Role::Input,
                    prep_rotation: None,
                },
                Vertex {
                    id: 1,
                    role: Role::Output,
                    prep_rotation: None,
                },
            ],
            edges: vec![[0, 1]],
            schedule: vec![Step {
                vertex: 0,
                theta,
                adapt: Adapt::default(),
            }],
            outputs: vec![1],
        }
    }

    /// Two-qubit cluster with both vertices kept as outputs.
    pub fn cluster_pair() -> Self {
        let v = |id| Vertex {
            id,
            role: Role::Output,
            prep_rotation: None,
        };
        Self {
            vertices: vec![v(0), v(1)],
            edges: vec![[0, 1]],
            schedule: Vec::new(),
            outputs: vec![0, 1],
        }
    }

    /// Linear cluster `0 - 1 - ... - (n-1)` measuring all but the last vertex at
    /// `thetas`, with domains from the flow.
    pub fn linear(thetas: &[f64]) -> Result<Self> {
        let n = thetas.len() + 1;
        let vertices = (0..n)
            .map(|id| Vertex {
                id,
                role: if id == 0 {
                    Role::Input
                } else if id == n - 1 {
                    Role::Output
                } else {
                    Role::Auxiliary
                },
                prep_rotation: None,
            })
            .collect();
        let p = Self {
            vertices,
            edges: (0..n - 1).map(|i| [i, i + 1]).collect(),
            schedule: thetas
                .iter()
                .enumerate()
                .map(|(i, t)| Step {
                    vertex: i,
                    theta: *t,
                    adapt: Adapt::default(),
                })
                .collect(),
            outputs: vec![n - 1],
        };
        p.with_flow_domains()
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        self.vertices.iter().map(|v| v.id).collect()
    }

    /// Index of each vertex id in `vertices`.
    pub fn positions(&self) -> BTreeMap<usize, usize> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id, i))
            .collect()
    }

    pub fn neighbours(&self, v: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter_map(|[a, b]| {
                if *a == v {
                    Some(*b)
                } else if *b == v {
                    Some(*a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Vertices that are not prepared in `|+>`; they cannot absorb corrections.
    pub fn inputs(&self) -> BTreeSet<usize> {
        self.vertices
            .iter()
            .filter(|v| v.role == Role::Input || v.prep_rotation.is_some())
            .map(|v| v.id)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(invalid("no vertices"));
        }
        if n > MAX_VERTICES {
            return Err(invalid(format!(
                "{n} vertices exceeds the limit {MAX_VERTICES}"
            )));
        }
        let ids: BTreeSet<usize> = self.vertex_ids().into_iter().collect();
        if ids.len() != n {
            return Err(invalid("duplicate vertex id"));
        }
        for v in &self.vertices {
            if let Some(phi) = v.prep_rotation {
                if !phi.is_finite() {
                    return Err(invalid(format!(
                        "vertex {}: prep rotation not finite",
                        v.id
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for [a, b] in &self.edges {
            if a == b {
                return Err(invalid(format!("self-loop on {a}")));
            }
            if !ids.contains(a) || !ids.contains(b) {
                return Err(invalid(format!("edge [{a}, {b}] names an unknown vertex")));
            }
            if !seen.insert((*a.min(b), *a.max(b))) {
                return Err(invalid(format!("duplicate edge [{a}, {b}]")));
            }
        }
        if self.outputs.is_empty() {
            return Err(invalid("no output vertices"));
        }
        let outputs: BTreeSet<usize> = self.outputs.iter().copied().collect();
        if outputs.len() != self.outputs.len() {
            return Err(invalid("duplicate output"));
        }
        if let Some(o) = outputs.iter().find(|o| !ids.contains(o)) {
            return Err(invalid(format!("output {o} is not a vertex")));
        }
        for v in &self.vertices {
            if v.role == Role::Output && !outputs.contains(&v.id) {
                return Err(invalid(format!(
                    "vertex {} has role output but is not listed",
                    v.id
                )));
            }
        }
        let mut measured = BTreeSet::new();
        for step in &self.schedule {
            if !ids.contains(&step.vertex) {
                return Err(invalid(format!(
                    "schedule names unknown vertex {}",
                    step.vertex
                )));
            }
            if outputs.contains(&step.vertex) {
                return Err(invalid(format!(
                    "output {} is scheduled for measurement",
                    step.vertex
                )));
            }
            if !step.theta.is_finite() {
                return Err(invalid(format!("vertex {}: angle not finite", step.vertex)));
            }
            for d in step.adapt.s_domain.iter().chain(&step.adapt.t_domain) {
                if !measured.contains(d) {
                    return Err(invalid(format!(
                        "vertex {} adapts on {d}, which is not measured earlier",
                        step.vertex
                    )));
                }
            }
            if !measured.insert(step.vertex) {
                return Err(invalid(format!("vertex {} measured twice", step.vertex)));
            }
        }
        if let Some(v) = ids
            .iter()
            .find(|v| !outputs.contains(v) && !measured.contains(v))
        {
            return Err(invalid(format!(
                "vertex {v} is neither measured nor an output"
            )));
        }
        Ok(())
    }

    /// Maximally delayed causal flow (Mhalla-Perdrix), or an error if the open
    /// graph has none.
    pub fn flow(&self) -> Result<Flow> {
        self.validate()?;
        let all: BTreeSet<usize> = self.vertex_ids().into_iter().collect();
        let inputs = self.inputs();
        let mut processed: BTreeSet<usize> = self.outputs.iter().copied().collect();
        let mut candidates: BTreeSet<usize> = processed.difference(&inputs).copied().collect();
        let mut successor = BTreeMap::new();
        let mut layer: BTreeMap<usize, usize> = processed.iter().map(|v| (*v, 0)).collect();
        let mut k = 1;
        loop {
            let mut found = BTreeSet::new();
            let mut used = BTreeSet::new();
            for &c in &candidates {
                let open: Vec<usize> = self
                    .neighbours(c)
                    .into_iter()
                    .filter(|u| !processed.contains(u))
                    .collect();
                if let [u] = open[..] {
                    if found.insert(u) {
                        successor.insert(u, c);
                        layer.insert(u, k);
                        used.insert(c);
                    }
                }
            }
            if found.is_empty() {
                if processed == all {
                    return Ok(Flow { successor, layer });
                }
                return Err(invalid(
                    "graph has no causal flow for these inputs and outputs",
                ));
            }
            processed.extend(found.iter().copied());
            candidates = candidates
                .difference(&used)
                .copied()
                .chain(found.difference(&inputs).copied())
                .collect();
            k += 1;
        }
    }

    /// Copy with every `s_domain` and `t_domain` derived from the flow. Fails
    /// if the schedule order is not compatible with the flow.
    pub fn with_flow_domains(&self) -> Result<Self> {
        let flow = self.flow()?;
        let order: BTreeMap<usize, usize> = self
            .schedule
            .iter()
            .enumerate()
            .map(|(i, s)| (s.vertex, i))
            .collect();
        let later = |a: usize, b: usize| -> bool {
            // b happens after a; outputs are never measured
            match (order.get(&a), order.get(&b)) {
                (Some(x), Some(y)) => y > x,
                (Some(_), None) => true,
                _ => false,
            }
        };
        for (&v, &f) in &flow.successor {
            if !later(v, f) {
                return Err(invalid(format!("vertex {f} must be measured after {v}")));
            }
            for u in self.neighbours(f) {
                if u != v && !later(v, u) {
                    return Err(invalid(format!("vertex {u} must be measured after {v}")));
                }
            }
        }
        let mut out = self.clone();
        for step in &mut out.schedule {
            let w = step.vertex;
            step.adapt.s_domain = flow
                .successor
                .iter()
                .filter(|(_, f)| **f == w)
                .map(|(v, _)| *v)
                .collect();
            step.adapt.t_domain = flow
                .successor
                .iter()
                .filter(|(v, f)| **v != w && self.neighbours(**f).contains(&w))
                .map(|(v, _)| *v)
                .collect();
            sort_by_schedule(&mut step.adapt.s_domain, &order);
            sort_by_schedule(&mut step.adapt.t_domain, &order);
        }
        out.validate()?;
        Ok(out)
    }

    /// Angle actually measured at schedule position `index` given the bits of
    /// the earlier outcomes (`outcomes[i]` belongs to `schedule[i]`).
    pub fn adapted_angle(&self, index: usize, outcomes: &[u8]) -> f64 {
        let step = &self.schedule[index];
        let bit = |v: &usize| -> u8 {
            let pos = self
                .schedule
                .iter()
                .position(|s| s.vertex == *v)
                .expect("validated domain");
            outcomes[pos]
        };
        let s = step.adapt.s_domain.iter().map(bit).fold(0, |a, b| a ^ b);
        let t = step.adapt.t_domain.iter().map(bit).fold(0, |a, b| a ^ b);
        let base = if s == 1 { -step.theta } else { step.theta };
        if t == 1 {
            base + std::f64::consts::PI
        } else {
            base
        }
    }

    /// Byproduct on the outputs after the schedule produced `outcomes`.
    pub fn frame(&self, flow: &Flow, outcomes: &[u8]) -> ByproductFrame {
        let mut frame = ByproductFrame::identity(&self.outputs);
        for (step, bit) in self.schedule.iter().zip(outcomes) {
            if *bit == 0 {
                continue;
            }
            let v = step.vertex;
            let Some(&f) = flow.successor.get(&v) else {
                continue;
            };
            frame.toggle(f, 1, 0);
            for u in self.neighbours(f) {
                if u != v {
                    frame.toggle(u, 0, 1);
                }
            }
        }
        frame
    }
}

fn sort_by_schedule(domain: &mut [usize], order: &BTreeMap<usize, usize>) {
    domain.sort_by_key(|v| order.get(v).copied().unwrap_or(usize::MAX));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameEntry {
    pub vertex: usize,
    pub x: u8,
    pub z: u8,
}

/// Pauli byproduct `X^x Z^z` per output qubit: the produced state is
/// `B rho_ideal B^dagger` with `B = prod X^x Z^z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ByproductFrame {
    pub entries: Vec<FrameEntry>,
}

impl ByproductFrame {
    pub fn identity(outputs: &[usize]) -> Self {
        Self {
            entries: outputs
                .iter()
                .map(|&vertex| FrameEntry { vertex, x: 0, z: 0 })
                .collect(),
        }
    }

    /// XORs bits into the entry of `vertex`; vertices that are not outputs
    /// are ignored.
    pub fn toggle(&mut self, vertex: usize, x: u8, z: u8) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.vertex == vertex) {
            e.x ^= x & 1;
            e.z ^= z & 1;
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.entries.len() != other.entries.len()
            || self
                .entries
                .iter()
                .zip(&other.entries)
                .any(|(a, b)| a.vertex != b.vertex)
        {
            return Err(QspError::DimensionMismatch(
                "frames over different outputs".into(),
            ));
        }
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            e.x ^= o.x;
            e.z ^= o.z;
        }
        Ok(out)
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|e| e.x == 0 && e.z == 0)
    }

    /// Sign picked up by the Pauli string `mu` (`[I, X, Y, Z]` digits) under
    /// `P -> B P B^dagger`.
    pub fn pauli_sign(&self, mu: &[usize]) -> f64 {
        let mut flips = 0u8;
        for (e, &m) in self.entries.iter().zip(mu) {
            if e.x == 1 && (m == 2 || m == 3) {
                flips ^= 1;
            }
            if e.z == 1 && (m == 1 || m == 2) {
                flips ^= 1;
            }
        }
        if flips == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// `B` as a `2^N` matrix, qubit 0 most significant.
    pub fn operator(&self) -> crate::fock::CMatrix {
        let [i, x, _, z] = crate::qubit::paulis();
        let ms: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                let mut m = i.clone();
                if e.x == 1 {
                    m = &m * &x;
                }
                if e.z == 1 {
                    m = &m * &z;
                }
                m
            })
            .collect();
        crate::qubit::kron_all(&ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_json() {
        let text = r#"{
            "vertices": [{"id": 0, "role": "input"}, {"id": 1, "role": "output"}],
            "edges": [[0, 1]],
            "schedule": [{"vertex": 0, "theta": 0.5, "adapt": {"s_domain": [], "t_domain": []}}],
            "outputs": [1]
        }"#;
        let p = GraphPattern::from_json(text).unwrap();
        assert_eq!(p, GraphPattern::wire(0.5));
        let back = GraphPattern::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_malformed_graphs() {
        let mut p = GraphPattern::wire(0.0);
        p.edges.push([1, 0]);
        assert!(matches!(p.validate(), Err(QspError::InvalidPattern(_))));
        let mut p = GraphPattern::wire(0.0);
        p.edges = vec![[1, 1]];
        assert!(p.validate().is_err());
        let mut p = GraphPattern::wire(0.0);
        p.schedule.clear();
        assert!(p.validate().is_err());
        let mut p = GraphPattern::wire(0.0);
        p.schedule[0].adapt.s_domain = vec![0];
        assert!(p.validate().is_err());
        let mut p = GraphPattern::wire(0.0);
        p.schedule[0].vertex = 1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn linear_cluster_flow_domains() {
        let p = GraphPattern::linear(&[0.1, 0.2, 0.3]).unwrap();
        let flow = p.flow().unwrap();
        for v in 0..3 {
            assert_eq!(flow.successor[&v], v + 1);
        }
        assert_eq!(p.schedule[0].adapt, Adapt::default());
        assert_eq!(p.schedule[1].adapt.s_domain, vec![0]);
        assert!(p.schedule[1].adapt.t_domain.is_empty());
        assert_eq!(p.schedule[2].adapt.s_domain, vec![1]);
        assert_eq!(p.schedule[2].adapt.t_domain, vec![0]);
    }

    #[test]
    fn triangle_has_no_flow() {
        let mut p = GraphPattern::wire(0.0);
        p.vertices.push(Vertex {
            id: 2,
            role: Role::Input,
            prep_rotation: None,
        });
        p.edges = vec![[0, 1], [1, 2], [0, 2]];
        p.schedule.push(Step {
            vertex: 2,
            theta: 0.0,
            adapt: Adapt::default(),
        });
        assert!(p.flow().is_err());
    }

    #[test]
    fn schedule_against_flow_is_rejected() {
        let mut p = GraphPattern::linear(&[0.0, 0.0]).unwrap();
        p.schedule.swap(0, 1);
        for s in &mut p.schedule {
            s.adapt = Adapt::default();
        }
        assert!(p.with_flow_domains().is_err());
    }

    #[test]
    fn adapted_angle_rules() {
        let p = GraphPattern::linear(&[0.0, 0.7, 0.4]).unwrap();
        assert_eq!(p.adapted_angle(1, &[0]), 0.7);
        assert_eq!(p.adapted_angle(1, &[1]), -0.7);
        let pi = std::f64::consts::PI;
        assert!((p.adapted_angle(2, &[1, 0]) - (0.4 + pi)).abs() < 1e-15);
        assert!((p.adapted_angle(2, &[1, 1]) - (-0.4 + pi)).abs() < 1e-15);
    }

    #[test]
    fn frame_is_a_group() {
        let mut a = ByproductFrame::identity(&[3, 5]);
        a.toggle(3, 1, 0);
        a.toggle(5, 1, 1);
        let twice = a.compose(&a).unwrap();
        assert!(twice.is_identity());
        let b = a.operator();
        let id = &b * b.adjoint();
        assert!(crate::qubit::max_abs(&(id - crate::fock::CMatrix::identity(4, 4))) < 1e-15);
        // X flips Z, Z flips X, XZ flips both but not Y
        assert_eq!(a.pauli_sign(&[3, 0]), -1.0);
        assert_eq!(a.pauli_sign(&[1, 0]), 1.0);
        assert_eq!(a.pauli_sign(&[0, 2]), 1.0);
        assert_eq!(a.pauli_sign(&[0, 1]), -1.0);
    }
}
