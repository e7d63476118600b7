//! Bundled problem instances with their reference solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, check_shape, IsadError, Result};
use crate::objective::{
    HalfSquaredNorm, IrlPenalty, LogSquaredNorm, NegLogSquaredNorm, ObjectiveModel, Quadratic, SquaredOffset,
    TikhonovPenalty, ZeroSmooth,
};
use crate::penalty::ApoKind;
use crate::rng::{domain, stream};
use crate::sampling::{min_eig_gram, DistributionKind, MatrixDistribution};

/// Default `μ` in `φ = (μ/2)‖x‖²` for the singular-value problem. `ln‖x‖²`
/// has curvature `−2/‖x‖²` along `x`, and with `μ = 1` the x-surrogate of
/// the first rounds has no critical point near a unit start.
pub const MAX_SV_PHI_SCALE: f64 = 10.0;

/// `λ_min(E[M]ᵀE[M])` must exceed this for an instance to be built.
pub const FULL_RANK_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Tikhonov,
    MaxSv,
    Irl,
    Quadratic,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Tikhonov,
        ProblemKind::MaxSv,
        ProblemKind::Irl,
        ProblemKind::Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Tikhonov => "tikhonov",
            ProblemKind::MaxSv => "max_sv",
            ProblemKind::Irl => "irl",
            ProblemKind::Quadratic => "quadratic",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ProblemKind::Tikhonov => "deblurring: min ‖Γf‖² + ‖E[H]f − g‖² (bounded Hessian)",
            ProblemKind::MaxSv => "largest singular value: min ln‖x‖² − ln‖E[A]x‖² (general)",
            ProblemKind::Irl => "inverse RL toy: min (1/N)Σ|Gθ₁ − E[F⁻¹]| with θ₂ = −1 (general)",
            ProblemKind::Quadratic => "½xᵀQx + bᵀx + ‖Mx − g‖² with deterministic M (bounded Hessian)",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = IsadError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| IsadError::Config(format!("unknown problem.kind '{s}' (tikhonov|max_sv|irl|quadratic)")))
    }
}

/// What is known about the solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// A unique minimizer.
    Solution(DVector<f64>),
    /// Largest singular value of `E[A]` and a unit top right-singular vector.
    MaxSingular { value: f64, direction: DVector<f64> },
}

/// A ready-to-run problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub model: ObjectiveModel,
    pub dist: MatrixDistribution,
    pub reference: Reference,
    /// Oracle matching the model: `Bounded` when `γ` is available.
    pub apo: ApoKind,
    /// Default starting point (needed where `x = 0` is outside the domain).
    pub x0: Option<DVector<f64>>,
}

impl ProblemInstance {
    /// Objective `h(x) + P(E[M]x)`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.model.objective(x, &(self.dist.base_mean() * x))
    }

    /// Relative distance to the reference: `‖x − x*‖/‖x*‖` for a known
    /// solution, `|‖E[A]x‖/‖x‖ − σ_max|/σ_max` for the singular value.
    pub fn reference_error(&self, x: &DVector<f64>) -> f64 {
        match &self.reference {
            Reference::Solution(s) => (x - s).norm() / s.norm().max(f64::MIN_POSITIVE),
            Reference::MaxSingular { value, .. } => {
                let ratio = (self.dist.base_mean() * x).norm() / x.norm();
                (ratio - value).abs() / value
            }
        }
    }
}

fn full_rank_guard(mean: &DMatrix<f64>) -> Result<()> {
    let sigma = min_eig_gram(mean);
    if sigma > FULL_RANK_FLOOR {
        Ok(())
    } else {
        Err(IsadError::Precondition(format!(
            "E[M] is rank deficient: λ_min(E[M]ᵀE[M]) = {sigma:.3e}"
        )))
    }
}

fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    Cholesky::new(a)
        .map(|c| c.solve(b))
        .ok_or_else(|| IsadError::Singular(format!("{what} is singular")))
}

/// `min ‖Γf‖² + ‖Hf − g‖²` with `H` drawn from `dist`.
///
/// Reference `f* = (HᵀH + ΓᵀΓ)⁻¹Hᵀg` with `H = E[dist]`.
pub fn make_tikhonov(dist: MatrixDistribution, gamma_mat: DMatrix<f64>, g: DVector<f64>) -> Result<ProblemInstance> {
    let n = dist.dim();
    check_shape((n, n), gamma_mat.shape(), "Tikhonov regularizer")?;
    check_len(n, g.len(), "Tikhonov data")?;
    let h = dist.base_mean();
    let normal = h.tr_mul(h) + gamma_mat.tr_mul(&gamma_mat);
    let solution = spd_solve(normal, &h.tr_mul(&g), "HᵀH + ΓᵀΓ")?;
    full_rank_guard(h)?;
    let model = ObjectiveModel::bounded(
        Arc::new(TikhonovPenalty::new(gamma_mat)),
        Arc::new(SquaredOffset::new(g)),
        None,
    )?;
    Ok(ProblemInstance {
        kind: ProblemKind::Tikhonov,
        model,
        dist,
        reference: Reference::Solution(solution),
        apo: ApoKind::Bounded,
        x0: None,
    })
}

/// `min ln‖x‖² − ln‖Ax‖²`, maximizing `‖E[A]x‖/‖x‖`.
pub fn make_max_sv(dist: MatrixDistribution, phi_scale: f64) -> Result<ProblemInstance> {
    let n = dist.dim();
    let mean = dist.base_mean();
    if mean.iter().all(|v| *v == 0.0) {
        return Err(IsadError::Precondition("E[A] is the zero matrix".into()));
    }
    full_rank_guard(mean)?;
    let svd = mean.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let (k, value) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, s)| if s > best.1 { (i, s) } else { best },
        );
    let direction = v_t.row(k).transpose();
    let model = ObjectiveModel::general(
        Arc::new(LogSquaredNorm::new(n)),
        Arc::new(NegLogSquaredNorm::new(n)),
        Arc::new(HalfSquaredNorm::new(n, phi_scale)?),
    )?;
    Ok(ProblemInstance {
        kind: ProblemKind::MaxSv,
        model,
        dist,
        reference: Reference::MaxSingular { value, direction },
        apo: ApoKind::General,
        x0: Some(DVector::from_element(n, 1.0 / (n as f64).sqrt())),
    })
}

/// Operator `[[diag(G), diag(F⁻¹)], [0, I]]` of the IRL toy.
pub fn irl_mean(g_values: &[f64], f_inv: &[f64]) -> Result<DMatrix<f64>> {
    let pairs = g_values.len();
    if pairs == 0 {
        return Err(IsadError::Config("IRL toy needs N ≥ 1".into()));
    }
    check_len(pairs, f_inv.len(), "IRL F⁻¹ entries")?;
    if let Some(i) = g_values.iter().position(|g| *g == 0.0) {
        return Err(IsadError::Precondition(format!("G[{i}] = 0 makes E[M] singular")));
    }
    let mut m = DMatrix::zeros(2 * pairs, 2 * pairs);
    for i in 0..pairs {
        m[(i, i)] = g_values[i];
        m[(i, pairs + i)] = f_inv[i];
        m[(pairs + i, pairs + i)] = 1.0;
    }
    Ok(m)
}

/// IRL toy: `h ≡ 0`, `P` is the ℓ1 fit on the first block plus `θ₂ = −1`.
/// Only the `F⁻¹` entries are random.
///
/// `gamma` switches to the bounded-Hessian variant with `φ = (γ/2)‖x‖²`;
/// without it the general variant with `φ = (phi_scale/2)‖x‖²` is used.
pub fn make_irl_toy(
    g_values: &[f64],
    f_inv: &[f64],
    kind: DistributionKind,
    noise_scale: f64,
    subgaussian: bool,
    phi_scale: f64,
    gamma: Option<f64>,
) -> Result<ProblemInstance> {
    let pairs = g_values.len();
    let mean = irl_mean(g_values, f_inv)?;
    full_rank_guard(&mean)?;
    let n = 2 * pairs;
    let support = DMatrix::from_fn(n, n, |i, j| i < pairs && j == pairs + i);
    let dist = MatrixDistribution::new(kind, mean, noise_scale, subgaussian)?.with_noise_support(support)?;
    let h = Arc::new(ZeroSmooth::new(n));
    let p = Arc::new(IrlPenalty::new(pairs));
    let (model, apo) = match gamma {
        Some(g) => (ObjectiveModel::bounded(h, p, Some(g))?, ApoKind::Bounded),
        None => (
            ObjectiveModel::general(h, p, Arc::new(HalfSquaredNorm::new(n, phi_scale)?))?,
            ApoKind::General,
        ),
    };
    let mut solution = DVector::from_element(n, -1.0);
    for i in 0..pairs {
        solution[i] = f_inv[i] / g_values[i];
    }
    Ok(ProblemInstance {
        kind: ProblemKind::Irl,
        model,
        dist,
        reference: Reference::Solution(solution),
        apo,
        x0: None,
    })
}

/// `½xᵀQx + bᵀx + ‖Mx − g‖²` with a deterministic `M`.
/// Reference solves `(Q + 2MᵀM)x = 2Mᵀg − b`.
pub fn make_quadratic(q: DMatrix<f64>, b: DVector<f64>, m: DMatrix<f64>, g: DVector<f64>) -> Result<ProblemInstance> {
    let n = b.len();
    check_shape((n, n), q.shape(), "quadratic Q")?;
    check_shape((n, n), m.shape(), "quadratic M")?;
    check_len(n, g.len(), "quadratic offset")?;
    full_rank_guard(&m)?;
    let lhs = &q + m.tr_mul(&m) * 2.0;
    let solution = spd_solve(lhs, &(m.tr_mul(&g) * 2.0 - &b), "Q + 2MᵀM")?;
    let model = ObjectiveModel::bounded(Arc::new(Quadratic::half(&q, b)?), Arc::new(SquaredOffset::new(g)), None)?;
    Ok(ProblemInstance {
        kind: ProblemKind::Quadratic,
        model,
        dist: MatrixDistribution::deterministic(m)?,
        reference: Reference::Solution(solution),
        apo: ApoKind::Bounded,
        x0: None,
    })
}

/// Overrides for [`bundled`]. Unset fields take the per-problem defaults.
#[derive(Debug, Clone, Default)]
pub struct ProblemOptions {
    pub dim: Option<usize>,
    pub mean: Option<DMatrix<f64>>,
    pub dist_kind: Option<DistributionKind>,
    pub noise_scale: Option<f64>,
    pub subgaussian: Option<bool>,
    pub phi_scale: Option<f64>,
    pub gamma: Option<f64>,
    pub tikhonov_lambda: Option<f64>,
    pub irl_g: Option<Vec<f64>>,
    pub irl_f_inv: Option<Vec<f64>>,
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR of a gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`).
fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric three-tap blur `[0.2, 0.6, 0.2]` with clamped borders.
pub fn blur_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 0.6,
        1 => 0.2,
        _ => 0.0,
    })
}

/// Builds the bundled instance of `kind`, with random data seeded by `seed`.
///
/// | kind | n | E[M] | noise |
/// |---|---|---|---|
/// | tikhonov | 8 | three-tap blur | gaussian 0.05 |
/// | max_sv | 4 | `U diag(3 … 1) Vᵀ`, `U`, `V` random orthogonal | gaussian 0.05 |
/// | irl | 6 (N = 3) | `[[diag G, diag F⁻¹], [0, I]]` | uniform 0.1 on `F⁻¹` |
/// | quadratic | 6 | `I + 0.3·gaussian/√n` | none |
pub fn bundled(kind: ProblemKind, seed: u64, opts: &ProblemOptions) -> Result<ProblemInstance> {
    let mut rng = stream(seed, domain::INSTANCE, kind as u64);
    let phi_scale = opts.phi_scale.unwrap_or(1.0);
    let dist_for = |mean: DMatrix<f64>, default_kind: DistributionKind, default_noise: f64| {
        let kind = opts.dist_kind.unwrap_or(default_kind);
        let subgaussian = opts.subgaussian.unwrap_or_else(|| kind.admits_subgaussian());
        MatrixDistribution::new(kind, mean, opts.noise_scale.unwrap_or(default_noise), subgaussian)
    };
    match kind {
        ProblemKind::Tikhonov => {
            let n = opts.mean.as_ref().map(|m| m.nrows()).or(opts.dim).unwrap_or(8);
            let h = opts.mean.clone().unwrap_or_else(|| blur_matrix(n));
            let truth = gaussian_vector(n, &mut rng);
            let g = &h * truth + gaussian_vector(n, &mut rng) * 0.01;
            let gamma_mat = DMatrix::identity(n, n) * opts.tikhonov_lambda.unwrap_or(0.1);
            make_tikhonov(dist_for(h, DistributionKind::Gaussian, 0.05)?, gamma_mat, g)
        }
        ProblemKind::MaxSv => {
            let n = opts.mean.as_ref().map(|m| m.nrows()).or(opts.dim).unwrap_or(4);
            let mean = opts.mean.clone().unwrap_or_else(|| {
                let spectrum = DVector::from_fn(n, |i, _| 1.0 + 2.0 * (n - 1 - i) as f64 / (n.max(2) - 1) as f64);
                random_orthogonal(n, &mut rng) * DMatrix::from_diagonal(&spectrum) * random_orthogonal(n, &mut rng)
            });
            make_max_sv(
                dist_for(mean, DistributionKind::Gaussian, 0.05)?,
                opts.phi_scale.unwrap_or(MAX_SV_PHI_SCALE),
            )
        }
        ProblemKind::Irl => {
            if opts.mean.is_some() {
                return Err(IsadError::Config(
                    "irl builds E[M] from irl.g and irl.f_inv, not dist.mean".into(),
                ));
            }
            let pairs = opts
                .irl_g
                .as_ref()
                .map(Vec::len)
                .or(opts.dim.map(|n| n / 2))
                .unwrap_or(3);
            let g = opts
                .irl_g
                .clone()
                .unwrap_or_else(|| (0..pairs).map(|_| rng.random_range(0.5..2.0)).collect());
            let f_inv = opts
                .irl_f_inv
                .clone()
                .unwrap_or_else(|| (0..pairs).map(|_| rng.random_range(1.0..3.0)).collect());
            let dist_kind = opts.dist_kind.unwrap_or(DistributionKind::BoundedUniform);
            let subgaussian = opts.subgaussian.unwrap_or_else(|| dist_kind.admits_subgaussian());
            make_irl_toy(
                &g,
                &f_inv,
                dist_kind,
                opts.noise_scale.unwrap_or(0.1),
                subgaussian,
                phi_scale,
                opts.gamma,
            )
        }
        ProblemKind::Quadratic => {
            let n = opts.mean.as_ref().map(|m| m.nrows()).or(opts.dim).unwrap_or(6);
            let a = gaussian_matrix(n, n, &mut rng);
            let q = a.tr_mul(&a) / n as f64;
            let b = gaussian_vector(n, &mut rng);
            let m = opts.mean.clone().unwrap_or_else(|| {
                DMatrix::identity(n, n) + gaussian_matrix(n, n, &mut rng) * (0.3 / (n as f64).sqrt())
            });
            let g = gaussian_vector(n, &mut rng);
            make_quadratic(q, b, m, g)
        }
    }
}
