//! Leader-follower communication graph and the algebra built on it.
//!
//! Followers are indexed `0..n`. `adjacency[i][j] = 1` means follower `i`
//! receives from follower `j`; `leader_links[i] = 1` means follower `i`
//! receives from the leader.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::DenseMatrix;

/// Margin added to the lower bound on the auxiliary weight `ϖ` when the
/// decay-rate diagnostics are evaluated.
pub const VARPI_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("topology has no followers")]
    Empty,
    #[error("adjacency must be {n}x{n}; row {row} has {len} entries")]
    Ragged { n: usize, row: usize, len: usize },
    #[error("leader_links has {got} entries, expected {n}")]
    LeaderLinksLength { n: usize, got: usize },
    #[error("entry {what}[{index}] = {value} is not 0 or 1")]
    NotBinary {
        what: &'static str,
        index: String,
        value: u8,
    },
    #[error("self loop at follower {0}")]
    SelfLoop(usize),
    #[error("edge ({from}, {to}) is out of range for {n} followers (leader is 0)")]
    EdgeOutOfRange { from: usize, to: usize, n: usize },
    #[error(
        "no spanning tree rooted at the leader; unreachable followers (1-based): {unreachable:?}"
    )]
    NoSpanningTree { unreachable: Vec<usize> },
    #[error("L + B is singular")]
    Singular,
    #[error("h[{index}] = {value} is not positive")]
    NonPositiveH { index: usize, value: f64 },
    #[error("p[{index}] = {value} is not positive")]
    NonPositiveP { index: usize, value: f64 },
    #[error("Q is not positive definite: smallest eigenvalue {0}")]
    IndefiniteQ(f64),
    #[error("gain `{name}` must be finite and strictly positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("kappa must exceed 1, got {0}")]
    KappaTooSmall(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Vec<Vec<u8>>,
    leader_links: Vec<u8>,
}

impl Topology {
    pub fn new(adjacency: Vec<Vec<u8>>, leader_links: Vec<u8>) -> Result<Self, NetworkError> {
        let n = adjacency.len();
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(NetworkError::Ragged {
                    n,
                    row: i,
                    len: row.len(),
                });
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 {
                    return Err(NetworkError::NotBinary {
                        what: "adjacency",
                        index: format!("{i}][{j}"),
                        value: a,
                    });
                }
            }
            if row[i] != 0 {
                return Err(NetworkError::SelfLoop(i));
            }
        }
        if leader_links.len() != n {
            return Err(NetworkError::LeaderLinksLength {
                n,
                got: leader_links.len(),
            });
        }
        if let Some((i, &b)) = leader_links.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(NetworkError::NotBinary {
                what: "leader_links",
                index: i.to_string(),
                value: b,
            });
        }
        Ok(Topology {
            adjacency,
            leader_links,
        })
    }

    /// Builds from directed edges `(from, to)` where node `0` is the leader
    /// and followers are `1..=n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        let mut adjacency = vec![vec![0u8; n]; n];
        let mut leader_links = vec![0u8; n];
        for &(from, to) in edges {
            if to == 0 || to > n || from > n {
                return Err(NetworkError::EdgeOutOfRange { from, to, n });
            }
            if from == 0 {
                leader_links[to - 1] = 1;
            } else {
                adjacency[to - 1][from - 1] = 1;
            }
        }
        Self::new(adjacency, leader_links)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn leader_links(&self) -> &[u8] {
        &self.leader_links
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        f64::from(self.adjacency[i][j])
    }

    pub fn b(&self, i: usize) -> f64 {
        f64::from(self.leader_links[i])
    }

    /// Followers `j` with `a_ij = 1`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1)
            .map(|(j, _)| j)
    }

    /// The same graph with follower `k` relabelled `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Topology {
        let n = self.len();
        let mut adjacency = vec![vec![0u8; n]; n];
        let mut leader_links = vec![0u8; n];
        for i in 0..n {
            leader_links[perm[i]] = self.leader_links[i];
            for j in 0..n {
                adjacency[perm[i]][perm[j]] = self.adjacency[i][j];
            }
        }
        Topology {
            adjacency,
            leader_links,
        }
    }

    /// Followers (0-based) that the leader cannot reach.
    pub fn unreachable_from_leader(&self) -> Vec<usize> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.leader_links[i] == 1).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(j) = queue.pop_front() {
            // j → i whenever a_ij = 1
            for i in 0..n {
                if !seen[i] && self.adjacency[i][j] == 1 {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        (0..n).filter(|&i| !seen[i]).collect()
    }
}

pub fn laplacian(top: &Topology) -> DenseMatrix {
    let n = top.len();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[(i, j)] = -top.a(i, j);
                l[(i, i)] += top.a(i, j);
            }
        }
    }
    l
}

pub fn leader_matrix(top: &Topology) -> DenseMatrix {
    let diag: Vec<f64> = (0..top.len()).map(|i| top.b(i)).collect();
    DenseMatrix::from_diagonal(&diag)
}

/// `L + B`.
pub fn pinned_laplacian(top: &Topology) -> DenseMatrix {
    &laplacian(top) + &leader_matrix(top)
}

/// Every follower is reachable from the leader along directed edges.
pub fn has_spanning_tree(top: &Topology) -> bool {
    top.unreachable_from_leader().is_empty()
}

/// The diagonal scaling that makes `P(L+B) + (L+B)ᵀP` positive definite,
/// with the spectral quantities the gain condition needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PqCertificate {
    pub laplacian: DenseMatrix,
    /// `H = (L + B)⁻¹ 1`.
    pub h: Vec<f64>,
    /// Diagonal of `P = diag(1 / hᵢ)`.
    pub p_diag: Vec<f64>,
    /// `Q = P(L + B) + (L + B)ᵀ P`.
    pub q: DenseMatrix,
    pub lambda_min_q: f64,
    pub lambda_max_p: f64,
    /// Largest singular value of `L + B`.
    pub sigma_max_lb: f64,
}

pub fn pq_certificate(top: &Topology) -> Result<PqCertificate, NetworkError> {
    certificate_with(top, |_, h| h.iter().map(|v| 1.0 / v).collect())
}

/// Alternative scaling `P = diag(wᵢ / hᵢ)` with `w = (L + B)⁻ᵀ 1`.
///
/// Then `Q h = P 1 + 1 > 0` and `Q` is a symmetric Z-matrix, hence
/// positive definite on every graph with a spanning tree. The scaling
/// `P = diag(1 / hᵢ)` of [`pq_certificate`] only guarantees this when the
/// column sums of `L + B` are non-negative.
pub fn pq_certificate_two_sided(top: &Topology) -> Result<PqCertificate, NetworkError> {
    certificate_with(top, |lb, h| {
        let w = lb
            .transpose()
            .solve(&vec![1.0; h.len()])
            .unwrap_or_else(|| vec![f64::NAN; h.len()]);
        w.iter().zip(h).map(|(w, h)| w / h).collect()
    })
}

fn certificate_with(
    top: &Topology,
    scaling: impl Fn(&DenseMatrix, &[f64]) -> Vec<f64>,
) -> Result<PqCertificate, NetworkError> {
    let unreachable = top.unreachable_from_leader();
    if !unreachable.is_empty() {
        return Err(NetworkError::NoSpanningTree {
            unreachable: unreachable.iter().map(|i| i + 1).collect(),
        });
    }
    let l = laplacian(top);
    let lb = &l + &leader_matrix(top);
    let n = top.len();
    let h = lb.solve(&vec![1.0; n]).ok_or(NetworkError::Singular)?;
    if let Some((index, &value)) = h.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(NetworkError::NonPositiveH { index, value });
    }
    let p_diag = scaling(&lb, &h);
    if let Some((index, &value)) = p_diag.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(NetworkError::NonPositiveP { index, value });
    }
    let p = DenseMatrix::from_diagonal(&p_diag);
    let pl = &p * &lb;
    let q = &pl + &pl.transpose();
    let lambda_min_q = q.sym_eigenvalues()[0];
    if !(lambda_min_q > 0.0) {
        return Err(NetworkError::IndefiniteQ(lambda_min_q));
    }
    let lambda_max_p = p_diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PqCertificate {
        laplacian: l,
        h,
        p_diag,
        q,
        lambda_min_q,
        lambda_max_p,
        sigma_max_lb: lb.max_singular_value(),
    })
}

/// Observer and controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSet {
    pub ko1: f64,
    pub ko2: f64,
    pub kc1: f64,
    pub kc2: f64,
    pub kc3: f64,
    pub kappa: f64,
    /// Bound on the leader's acceleration in transformed coordinates.
    pub zbar0: f64,
}

impl GainSet {
    /// Observer `(3, 5)`, controller `(5, 6, 3)`, `κ = 2`, `z̄₀ = 1`.
    pub const REFERENCE: GainSet = GainSet {
        ko1: 3.0,
        ko2: 5.0,
        kc1: 5.0,
        kc2: 6.0,
        kc3: 3.0,
        kappa: 2.0,
        zbar0: 1.0,
    };

    pub fn validate(&self) -> Result<(), NetworkError> {
        for (name, value) in [
            ("ko1", self.ko1),
            ("ko2", self.ko2),
            ("kc1", self.kc1),
            ("kc2", self.kc2),
            ("kc3", self.kc3),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(NetworkError::NonPositiveGain { name, value });
            }
        }
        if !(self.zbar0.is_finite() && self.zbar0 >= 0.0) {
            return Err(NetworkError::NonPositiveGain {
                name: "zbar0",
                value: self.zbar0,
            });
        }
        if !(self.kappa > 1.0) {
            return Err(NetworkError::KappaTooSmall(self.kappa));
        }
        Ok(())
    }
}

/// Feasibility of the controller gains against the sufficient conditions
/// for exponential tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    pub kc2: f64,
    pub kc2_bound: f64,
    pub kc2_ok: bool,
    pub kc3: f64,
    pub kc3_bound: f64,
    pub kc3_ok: bool,
    pub varpi: f64,
    pub alpha: [f64; 4],
}

impl GainReport {
    pub fn passed(&self) -> bool {
        self.kc2_ok && self.kc3_ok
    }
}

pub fn gain_bounds(cert: &PqCertificate, gains: &GainSet) -> Result<GainReport, NetworkError> {
    let kappa = gains.kappa;
    if !(kappa > 1.0) {
        return Err(NetworkError::KappaTooSmall(kappa));
    }
    let lp = cert.lambda_max_p;
    let lq = cert.lambda_min_q;
    let cross = (gains.kc1 - gains.ko2).abs() * lp * cert.sigma_max_lb;
    let varpi_floor = kappa * kappa * lp / (2.0 * (kappa - 1.0));
    let kc2_bound = (3.0 * kappa * lp + kappa * kappa * lp + varpi_floor + cross) / lq;
    let varpi = varpi_floor + VARPI_MARGIN;
    let alpha = [
        0.5 * (gains.kc2 * lq - 3.0 * kappa * lp - kappa * kappa * lp - varpi - cross),
        varpi * kappa - varpi - 0.5 * kappa * kappa * lp,
        0.5 * kappa * lp + 0.5 * varpi,
        0.5 * cross,
    ];
    Ok(GainReport {
        kc2: gains.kc2,
        kc2_bound,
        kc2_ok: gains.kc2 > kc2_bound,
        kc3: gains.kc3,
        kc3_bound: gains.zbar0,
        kc3_ok: gains.kc3 > gains.zbar0,
        varpi,
        alpha,
    })
}

impl Serialize for DenseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn figure_one() -> Topology {
        Topology::from_edges(4, &[(0, 1), (1, 2), (3, 1), (2, 4), (4, 3)]).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let empty = Topology::new(vec![vec![0; 3]; 3], vec![0; 3]).unwrap();
        assert_eq!(laplacian(&empty), DenseMatrix::zeros(3, 3));

        let l = laplacian(&figure_one());
        let want = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, -1.0, 0.0],
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0],
            vec![0.0, -1.0, 0.0, 1.0],
        ]);
        assert_eq!(l, want);

        let pair = Topology::new(vec![vec![0, 1], vec![1, 0]], vec![1, 0]).unwrap();
        assert_eq!(
            laplacian(&pair).to_rows(),
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]]
        );
    }

    #[test]
    fn spanning_tree_examples() {
        assert!(has_spanning_tree(&figure_one()));
        let cut = Topology::new(figure_one().adjacency().to_vec(), vec![0; 4]).unwrap();
        assert!(!has_spanning_tree(&cut));
        let star = Topology::new(vec![vec![0; 3]; 3], vec![1; 3]).unwrap();
        assert!(has_spanning_tree(&star));
    }

    #[test]
    fn scalar_certificate() {
        let top = Topology::new(vec![vec![0]], vec![1]).unwrap();
        let c = pq_certificate(&top).unwrap();
        assert_eq!(c.h, vec![1.0]);
        assert_eq!(c.p_diag, vec![1.0]);
        assert_eq!(c.q.to_rows(), vec![vec![2.0]]);
        assert_eq!(c.lambda_min_q, 2.0);
    }

    #[test]
    fn inverse_h_scaling_can_fail_on_digraphs() {
        let top = Topology::new(
            vec![vec![0, 1, 1], vec![1, 0, 1], vec![0, 1, 0]],
            vec![1, 0, 0],
        )
        .unwrap();
        assert!(has_spanning_tree(&top));
        match pq_certificate(&top) {
            Err(NetworkError::IndefiniteQ(l)) => {
                assert!((l + 5.795_126_688_339e-4).abs() < 1e-12, "{l}")
            }
            other => panic!("{other:?}"),
        }
        let c = pq_certificate_two_sided(&top).unwrap();
        for (a, b) in c.h.iter().zip([6.0, 8.0, 9.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((c.lambda_min_q - 0.254_138_293_855_517_7).abs() < 1e-12);
    }

    #[test]
    fn two_sided_scaling_on_figure_one() {
        let c = pq_certificate_two_sided(&figure_one()).unwrap();
        assert!(c.lambda_min_q > 0.0);
        assert!(c.p_diag.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn certificate_rejects_unreachable() {
        let top = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            pq_certificate(&top),
            Err(NetworkError::NoSpanningTree {
                unreachable: vec![3]
            })
        );
    }

    #[test]
    fn relabelling_permutes_h() {
        let top = figure_one();
        let perm = [2, 0, 3, 1];
        let a = pq_certificate(&top).unwrap();
        let b = pq_certificate(&top.permuted(&perm)).unwrap();
        for i in 0..4 {
            assert!((a.h[i] - b.h[perm[i]]).abs() < 1e-14);
        }
    }

    #[test]
    fn topology_validation() {
        assert_eq!(Topology::new(vec![], vec![]), Err(NetworkError::Empty));
        assert!(matches!(
            Topology::new(vec![vec![1]], vec![1]),
            Err(NetworkError::SelfLoop(0))
        ));
        assert!(matches!(
            Topology::new(vec![vec![0, 2], vec![0, 0]], vec![1, 0]),
            Err(NetworkError::NotBinary { .. })
        ));
        assert!(matches!(
            Topology::new(vec![vec![0, 1], vec![0]], vec![1, 0]),
            Err(NetworkError::Ragged { .. })
        ));
        assert!(matches!(
            Topology::new(vec![vec![0]], vec![1, 0]),
            Err(NetworkError::LeaderLinksLength { .. })
        ));
    }

    #[test]
    fn strict_kc3_condition() {
        let cert = pq_certificate(&figure_one()).unwrap();
        let gains = GainSet {
            kc3: 1.0,
            zbar0: 1.0,
            ..GainSet::REFERENCE
        };
        let r = gain_bounds(&cert, &gains).unwrap();
        assert!(!r.kc3_ok);
        let r = gain_bounds(&cert, &GainSet { kc3: 0.5, ..gains }).unwrap();
        assert!(!r.kc3_ok && !r.passed());
    }

    #[test]
    fn kappa_must_exceed_one() {
        let cert = pq_certificate(&figure_one()).unwrap();
        let gains = GainSet {
            kappa: 1.0,
            ..GainSet::REFERENCE
        };
        assert_eq!(
            gain_bounds(&cert, &gains),
            Err(NetworkError::KappaTooSmall(1.0))
        );
        assert!(gains.validate().is_err());
    }

    #[test]
    fn bound_is_homogeneous_in_p_scale() {
        let cert = pq_certificate(&figure_one()).unwrap();
        let mut doubled = cert.clone();
        doubled.lambda_max_p *= 2.0;
        let a = gain_bounds(&cert, &GainSet::REFERENCE).unwrap();
        let b = gain_bounds(&doubled, &GainSet::REFERENCE).unwrap();
        assert!((b.kc2_bound - 2.0 * a.kc2_bound).abs() < 1e-12 * a.kc2_bound);
    }
}
