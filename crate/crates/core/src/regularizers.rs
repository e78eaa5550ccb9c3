//! Penalty functions, their exact proximal operators, and the k-term
//! approximation error.
//!
//! Mixing-weight conventions differ between families and are kept exactly:
//!
//! * Elastic net: `μ‖z‖₁ + (1−μ)‖z‖₂²` (μ sits on the ℓ1 term).
//! * CLOT: `(1−μ)‖z‖₁ + μ‖z‖₂` (μ sits on the ℓ2 term, which is not squared).
//! * Sparse group LASSO: `Σᵢ (1−μ)‖z_{Gᵢ}‖₁ + μ‖z_{Gᵢ}‖₂`, so CLOT is the
//!   single-group case and group LASSO is μ = 1.
//!
//! Group terms are not divided by group size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, l1_norm, l2_norm};

/// A disjoint covering of `{0, …, n−1}` by nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        Partition::new(r.groups, r.n)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr {
            groups: p.groups,
            n: p.n,
        }
    }
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidPartition("at least one group is required".into()));
        }
        let mut seen = vec![false; n];
        for (gi, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidPartition(format!("group {gi} is empty")));
            }
            for &i in g {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} in group {gi} is out of range for n = {n}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} is not covered")));
        }
        Ok(Partition { groups, n })
    }

    /// One group holding every index.
    pub fn single(n: usize) -> Result<Self> {
        Partition::new(vec![(0..n).collect()], n)
    }

    /// Consecutive groups with the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            groups.push((start..start + s).collect());
            start += s;
        }
        Partition::new(groups, start)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of groups.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Index of the group containing each coordinate.
    pub fn membership(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (gi, g) in self.groups.iter().enumerate() {
            for &i in g {
                out[i] = gi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegularizerKind {
    #[serde(rename = "l1", alias = "lasso")]
    L1,
    #[serde(rename = "l2sq", alias = "ridge")]
    L2Sq,
    #[serde(rename = "en", alias = "elastic_net")]
    ElasticNet,
    #[serde(rename = "clot")]
    Clot,
    #[serde(rename = "gl", alias = "group_lasso")]
    GroupLasso,
    #[serde(rename = "sgl", alias = "sparse_group_lasso")]
    SparseGroupLasso,
}

impl RegularizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::L1 => "l1",
            RegularizerKind::L2Sq => "l2sq",
            RegularizerKind::ElasticNet => "en",
            RegularizerKind::Clot => "clot",
            RegularizerKind::GroupLasso => "gl",
            RegularizerKind::SparseGroupLasso => "sgl",
        }
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "l1" | "lasso" => RegularizerKind::L1,
            "l2sq" | "ridge" => RegularizerKind::L2Sq,
            "en" | "elastic_net" | "elasticnet" => RegularizerKind::ElasticNet,
            "clot" => RegularizerKind::Clot,
            "gl" | "group_lasso" => RegularizerKind::GroupLasso,
            "sgl" | "sparse_group_lasso" => RegularizerKind::SparseGroupLasso,
            other => return Err(Error::InvalidParameter(format!("unknown regularizer '{other}'"))),
        })
    }
}

/// Which penalty to use, its mixing weight, and the group structure when the
/// penalty needs one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    #[serde(default)]
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
}

/// Norm used by [`sparsity_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SparsityNorm {
    L1,
    L2,
}

/// Groups visited by the SGL-family penalties, with their (ℓ1, ℓ2) weights.
enum Blocks<'a> {
    Whole(usize),
    Groups(&'a [Vec<usize>]),
}

impl RegularizerSpec {
    pub fn l1() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::L1,
            mu: 0.0,
            partition: None,
        }
    }

    pub fn ridge() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::L2Sq,
            mu: 0.0,
            partition: None,
        }
    }

    pub fn elastic_net(mu: f64) -> Self {
        RegularizerSpec {
            kind: RegularizerKind::ElasticNet,
            mu,
            partition: None,
        }
    }

    pub fn clot(mu: f64) -> Self {
        RegularizerSpec {
            kind: RegularizerKind::Clot,
            mu,
            partition: None,
        }
    }

    pub fn group_lasso(partition: Partition) -> Self {
        RegularizerSpec {
            kind: RegularizerKind::GroupLasso,
            mu: 1.0,
            partition: Some(partition),
        }
    }

    pub fn sparse_group_lasso(mu: f64, partition: Partition) -> Self {
        RegularizerSpec {
            kind: RegularizerKind::SparseGroupLasso,
            mu,
            partition: Some(partition),
        }
    }

    /// Degree-one homogeneous penalties (the norms).
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.kind, RegularizerKind::L2Sq | RegularizerKind::ElasticNet)
    }

    /// Number of groups seen by the penalty (1 for non-group penalties).
    pub fn group_count(&self) -> usize {
        match (&self.kind, &self.partition) {
            (RegularizerKind::GroupLasso | RegularizerKind::SparseGroupLasso, Some(p)) => p.len(),
            _ => 1,
        }
    }

    /// Checks μ and the partition against a vector length.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            RegularizerKind::ElasticNet | RegularizerKind::Clot | RegularizerKind::SparseGroupLasso
                if !(0.0..=1.0).contains(&self.mu) || !self.mu.is_finite() =>
            {
                return Err(Error::InvalidParameter(format!(
                    "mu must lie in [0, 1], got {}",
                    self.mu
                )));
            }
            _ => {}
        }
        match self.kind {
            RegularizerKind::GroupLasso | RegularizerKind::SparseGroupLasso => match &self.partition {
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "{} requires a partition",
                        self.kind.name()
                    )))
                }
                Some(p) if p.n() != n => {
                    return Err(Error::DimensionMismatch {
                        what: "partition",
                        expected: p.n(),
                        found: n,
                    })
                }
                _ => {}
            },
            _ => {}
        }
        Ok(())
    }

    fn blocks(&self, n: usize) -> Option<(Blocks<'_>, f64, f64)> {
        match self.kind {
            RegularizerKind::Clot => Some((Blocks::Whole(n), 1.0 - self.mu, self.mu)),
            RegularizerKind::GroupLasso => {
                Some((Blocks::Groups(self.partition.as_ref()?.groups()), 0.0, 1.0))
            }
            RegularizerKind::SparseGroupLasso => Some((
                Blocks::Groups(self.partition.as_ref()?.groups()),
                1.0 - self.mu,
                self.mu,
            )),
            _ => None,
        }
    }

    /// Penalty value at `z`.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        self.validate(z.len())?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> f64 {
        match self.kind {
            RegularizerKind::L1 => l1_norm(z),
            RegularizerKind::L2Sq => z.iter().map(|v| v * v).sum(),
            RegularizerKind::ElasticNet => {
                self.mu * l1_norm(z) + (1.0 - self.mu) * z.iter().map(|v| v * v).sum::<f64>()
            }
            _ => {
                let (blocks, w1, w2) = self.blocks(z.len()).expect("validated");
                match blocks {
                    Blocks::Whole(_) => w1 * l1_norm(z) + w2 * l2_norm(z),
                    Blocks::Groups(groups) => groups
                        .iter()
                        .map(|g| {
                            let (mut s1, mut s2) = (0.0, 0.0);
                            for &i in g {
                                s1 += z[i].abs();
                                s2 += z[i] * z[i];
                            }
                            w1 * s1 + w2 * s2.sqrt()
                        })
                        .sum(),
                }
            }
        }
    }

    /// The minimizer of `step·R(z) + ½‖z − v‖₂²`.
    pub fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!("prox step must be positive, got {step}")));
        }
        self.validate(v.len())?;
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step);
        Ok(out)
    }

    pub(crate) fn prox_in_place(&self, v: &mut [f64], step: f64) {
        match self.kind {
            RegularizerKind::L1 => v.iter_mut().for_each(|x| *x = soft_threshold(*x, step)),
            RegularizerKind::L2Sq => {
                let scale = 1.0 / (1.0 + 2.0 * step);
                v.iter_mut().for_each(|x| *x *= scale);
            }
            RegularizerKind::ElasticNet => {
                let thr = step * self.mu;
                let scale = 1.0 / (1.0 + 2.0 * step * (1.0 - self.mu));
                v.iter_mut().for_each(|x| *x = soft_threshold(*x, thr) * scale);
            }
            _ => {
                let (blocks, w1, w2) = self.blocks(v.len()).expect("validated");
                let (thr1, thr2) = (step * w1, step * w2);
                match blocks {
                    Blocks::Whole(_) => {
                        v.iter_mut().for_each(|x| *x = soft_threshold(*x, thr1));
                        let nrm = l2_norm(v);
                        let scale = block_scale(nrm, thr2);
                        v.iter_mut().for_each(|x| *x *= scale);
                    }
                    Blocks::Groups(groups) => {
                        for g in groups {
                            let mut sq = 0.0;
                            for &i in g {
                                v[i] = soft_threshold(v[i], thr1);
                                sq += v[i] * v[i];
                            }
                            let scale = block_scale(sq.sqrt(), thr2);
                            for &i in g {
                                v[i] *= scale;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Smallest `s ≥ 0` with `q ∈ s·∂R(0)`; infinite when no such `s` exists.
    ///
    /// For a norm this is the dual norm of `q`. With `q = 2·Aᵀy` it is the
    /// penalty weight at and above which zero solves the regularized
    /// least-squares problem.
    pub fn zero_gauge(&self, q: &[f64]) -> f64 {
        let qmax = inf_norm(q);
        match self.kind {
            RegularizerKind::L1 => qmax,
            RegularizerKind::L2Sq => {
                if qmax == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegularizerKind::ElasticNet => {
                if qmax == 0.0 {
                    0.0
                } else if self.mu == 0.0 {
                    f64::INFINITY
                } else {
                    qmax / self.mu
                }
            }
            _ => {
                let (blocks, w1, w2) = self.blocks(q.len()).expect("validated");
                match blocks {
                    Blocks::Whole(_) => group_gauge(q, w1, w2),
                    Blocks::Groups(groups) => groups
                        .iter()
                        .map(|g| {
                            let sub: Vec<f64> = g.iter().map(|&i| q[i]).collect();
                            group_gauge(&sub, w1, w2)
                        })
                        .fold(0.0, f64::max),
                }
            }
        }
    }

    pub(crate) fn block_view(&self, n: usize) -> Option<(Vec<Vec<usize>>, f64, f64)> {
        let (blocks, w1, w2) = self.blocks(n)?;
        let groups = match blocks {
            Blocks::Whole(n) => vec![(0..n).collect()],
            Blocks::Groups(g) => g.to_vec(),
        };
        Some((groups, w1, w2))
    }
}

pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

fn block_scale(norm: f64, threshold: f64) -> f64 {
    if norm <= threshold || norm == 0.0 {
        0.0
    } else {
        1.0 - threshold / norm
    }
}

/// Smallest `s` with `‖soft(q, s·w1)‖₂ ≤ s·w2`.
fn group_gauge(q: &[f64], w1: f64, w2: f64) -> f64 {
    let qinf = inf_norm(q);
    if qinf == 0.0 {
        return 0.0;
    }
    if w2 == 0.0 {
        return qinf / w1;
    }
    let q2 = l2_norm(q);
    if w1 == 0.0 {
        return q2 / w2;
    }
    let excess = |s: f64| {
        let t = s * w1;
        q.iter()
            .map(|x| {
                let r = soft_threshold(*x, t);
                r * r
            })
            .sum::<f64>()
            .sqrt()
            - s * w2
    };
    let (mut lo, mut hi) = (0.0, (qinf / w1).min(q2 / w2));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `σ_k(x)`: norm of `x` after zeroing its `k` largest-magnitude entries.
///
/// Ties are broken towards the lower index; the value does not depend on it.
pub fn sparsity_index(x: &[f64], k: usize, norm: SparsityNorm) -> Result<f64> {
    if k > x.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the dimension {}",
            x.len()
        )));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let tail = order[k..].iter().map(|&i| x[i]);
    Ok(match norm {
        SparsityNorm::L1 => tail.map(f64::abs).sum(),
        SparsityNorm::L2 => tail.map(|v| v * v).sum::<f64>().sqrt(),
    })
}
