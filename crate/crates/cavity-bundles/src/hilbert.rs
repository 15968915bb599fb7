//! Truncated composite Hilbert space — one bosonic mode (photon cutoff `N_c`)
//! tensor three two-level atoms — and the elementary operators embedded in it.
//!
//! Basis ordering: the cavity index varies slowest, then atoms 1→3, atom 3
//! fastest. Index of `(n, s₁, s₂, s₃)` is `((n·2 + s₁)·2 + s₂)·2 + s₃` with
//! `s = 1` for the excited state.

use crate::error::{Error, Result};
use crate::sparse::CsMat;
use num_complex::Complex64 as C64;

/// Tolerance for asserting hermiticity of a constructed operator.
pub const HERM_TOL: f64 = 1e-14;

/// Configuration of the truncated cavity ⊗ three-atom space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceConfig {
    n_c: usize,
}

pub const ATOM_COUNT: usize = 3;
const SPIN_DIM: usize = 1 << ATOM_COUNT; // 8

impl SpaceConfig {
    /// `n_c` is the largest retained photon number. The library accepts any
    /// cutoff ≥ 1 (small spaces serve as brute-force cross-check targets);
    /// production entry points enforce
    /// [`PRODUCTION_MIN_CUTOFF`](Self::PRODUCTION_MIN_CUTOFF).
    pub fn new(n_c: usize) -> Result<Self> {
        if n_c < 1 {
            return Err(Error::Invalid("cavity cutoff must be at least 1".into()));
        }
        Ok(SpaceConfig { n_c })
    }

    /// Smallest cutoff production runs accept: three-photon observables need
    /// at least this much headroom (and must still pass a convergence scan).
    pub const PRODUCTION_MIN_CUTOFF: usize = 3;

    pub fn cavity_cutoff(&self) -> usize {
        self.n_c
    }

    pub fn dimension(&self) -> usize {
        (self.n_c + 1) * SPIN_DIM
    }

    /// Basis index of `(n, s₁, s₂, s₃)`; `excited[j-1]` is atom j's state.
    pub fn encode(&self, n: usize, excited: [bool; 3]) -> usize {
        debug_assert!(n <= self.n_c);
        let spin = ((excited[0] as usize) << 2) | ((excited[1] as usize) << 1) | (excited[2] as usize);
        n * SPIN_DIM + spin
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, idx: usize) -> (usize, [bool; 3]) {
        let n = idx / SPIN_DIM;
        let spin = idx % SPIN_DIM;
        (n, [(spin >> 2) & 1 == 1, (spin >> 1) & 1 == 1, spin & 1 == 1])
    }

    /// Total excitation count (photons + excited atoms) of basis state `idx`.
    pub fn excitation_count(&self, idx: usize) -> usize {
        let (n, e) = self.decode(idx);
        n + e.iter().filter(|&&x| x).count()
    }
}

/// A complex sparse operator on a [`SpaceConfig`], carrying an asserted
/// (measured, not assumed) hermiticity flag.
#[derive(Clone, Debug)]
pub struct Operator {
    dim: usize,
    mat: CsMat,
    hermitian: bool,
}

impl Operator {
    /// Wrap a matrix; the hermitian flag is set by measuring ‖O − O†‖_max.
    pub fn from_mat(mat: CsMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let hermitian = mat.hermiticity_defect() < HERM_TOL;
        Ok(Operator {
            dim: mat.nrows(),
            mat,
            hermitian,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn mat(&self) -> &CsMat {
        &self.mat
    }

    pub fn dagger(&self) -> Self {
        Operator {
            dim: self.dim,
            mat: self.mat.dagger(),
            hermitian: self.hermitian,
        }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        Operator::from_mat(self.mat.matmul(&other.mat)?)
    }

    pub fn add_scaled(&self, beta: C64, other: &Operator) -> Result<Self> {
        Operator::from_mat(self.mat.add_scaled(beta, &other.mat)?)
    }

    pub fn scale(&self, alpha: C64) -> Result<Self> {
        Operator::from_mat(self.mat.scale(alpha))
    }
}

/// Pauli/ladder axis selector for single-atom operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Cavity annihilation operator: ⟨n−1|â|n⟩ = √n on the mode, identity on atoms.
pub fn annihilation(space: &SpaceConfig) -> Operator {
    let nc = space.cavity_cutoff();
    let mut trips = Vec::with_capacity(nc);
    for n in 1..=nc {
        trips.push((n - 1, n, C64::new((n as f64).sqrt(), 0.0)));
    }
    let mode = CsMat::from_triplets(nc + 1, nc + 1, &trips).expect("in-bounds by construction");
    let full = mode.kron(&CsMat::identity(SPIN_DIM));
    Operator::from_mat(full).expect("square by construction")
}

/// Cavity creation operator â†.
pub fn creation(space: &SpaceConfig) -> Operator {
    annihilation(space).dagger()
}

/// Photon-number operator â†â (diagonal).
pub fn photon_number(space: &SpaceConfig) -> Operator {
    let d = space.dimension();
    let diag: Vec<C64> = (0..d)
        .map(|i| C64::new(space.decode(i).0 as f64, 0.0))
        .collect();
    Operator::from_mat(CsMat::from_diag(&diag)).expect("square")
}

/// Single-atom Pauli or ladder operator embedded at atom slot `j ∈ {1,2,3}`:
/// σ⁺ = |e⟩⟨g|, σ⁻ = |g⟩⟨e|, σᶻ = |e⟩⟨e| − |g⟩⟨g|.
pub fn pauli(space: &SpaceConfig, j: usize, axis: Axis) -> Result<Operator> {
    if !(1..=ATOM_COUNT).contains(&j) {
        return Err(Error::Invalid(format!("atom index must be 1..=3, got {j}")));
    }
    // 2x2 blocks in the (g=0, e=1) basis.
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let entries: [[C64; 2]; 2] = match axis {
        // rows/cols indexed by (g, e)
        Axis::X => [[o, l], [l, o]],
        Axis::Y => [[o, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), o]],
        Axis::Z => [[-l, o], [o, l]],
        Axis::Plus => [[o, o], [l, o]],  // |e⟩⟨g|
        Axis::Minus => [[o, l], [o, o]], // |g⟩⟨e|
    };
    let mut trips = Vec::new();
    for r in 0..2 {
        for c in 0..2 {
            if entries[r][c] != o {
                trips.push((r, c, entries[r][c]));
            }
        }
    }
    let p2 = CsMat::from_triplets(2, 2, &trips)?;
    let left = CsMat::identity(1 << (j - 1));
    let right = CsMat::identity(1 << (ATOM_COUNT - j));
    let spin = left.kron(&p2).kron(&right);
    let full = CsMat::identity(space.cavity_cutoff() + 1).kron(&spin);
    Operator::from_mat(full)
}

/// Total excitation number N̂ = â†â + Σⱼ σⱼ⁺σⱼ⁻ (diagonal).
pub fn excitation_number(space: &SpaceConfig) -> Operator {
    let d = space.dimension();
    let diag: Vec<C64> = (0..d)
        .map(|i| C64::new(space.excitation_count(i) as f64, 0.0))
        .collect();
    Operator::from_mat(CsMat::from_diag(&diag)).expect("square")
}
