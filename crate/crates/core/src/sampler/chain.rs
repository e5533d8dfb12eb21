//! One MCMC chain. Each iteration runs, in order:
//!
//! 1. latent draws `z_ik` from univariate truncated normals with the
//!    conditional moments given the other coordinates of `Z_i`;
//! 2. per-tree backfitting against the pseudo-response (or a conjugate
//!    coefficient draw for linear means);
//! 3. a Metropolis-Hastings step for `(R, D)` with an inverse-Wishart
//!    proposal centred on the current `Σ = D^{1/2} R D^{1/2}`.
//!
//! Step 3 is skipped when `R` is fixed to the identity.

use nalgebra::DMatrix;

use super::config::{MeanModelSpec, Mode, ModelConfig};
use super::draws::{Diagnostics, Draw, MeanDraw, PosteriorDraws};
use super::linear::{check_full_rank, draw_linear_coefficients, LinearBasisSpec};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::forward_substitute;
use crate::rng::RngStream;
use crate::stats::{
    decompose_to_correlation, log_inverse_wishart_density, log_prior_rd, sample_inverse_wishart,
    sample_truncated_normal, ConditionalWeights, CorrelationMatrix, CorrelationPriorConfig, ScaleDecomposition, Side,
};
use crate::trees::{
    draw_leaf_values, leaf_marginal_loglik, propose_move, Forest, LeafStats, MoveProposal,
};

#[derive(Clone, Debug)]
pub enum MeanState {
    Trees(Forest),
    Linear {
        basis: LinearBasisSpec,
        design: DMatrix<f64>,
        coefficients: DMatrix<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct ChainState {
    /// Latent matrix, N×q; `sign(z_ik)` always matches `y_ik`.
    pub z: DMatrix<f64>,
    pub mean: MeanState,
    pub dec: ScaleDecomposition,
    /// Fitted latent means, N×q, kept in sync with `mean`.
    pub g: DMatrix<f64>,
    pub iteration: usize,
}

/// `Σ_i log MVN(Z_i; G_i, R)`, including the `2π` constant.
pub fn log_residual_loglik(z: &DMatrix<f64>, g: &DMatrix<f64>, r: &CorrelationMatrix) -> Result<f64> {
    let q = r.dim();
    if z.shape() != g.shape() || z.ncols() != q {
        return Err(Error::DimensionMismatch("Z, G and R disagree".into()));
    }
    let n = z.nrows();
    let l = r.cholesky_lower();
    let mut e = vec![0.0; q];
    let mut quad = 0.0;
    for i in 0..n {
        for k in 0..q {
            e[k] = z[(i, k)] - g[(i, k)];
        }
        forward_substitute(l, &mut e);
        quad += e.iter().map(|v| v * v).sum::<f64>();
    }
    let nq = (n * q) as f64;
    Ok(-0.5 * nq * (2.0 * std::f64::consts::PI).ln() - 0.5 * n as f64 * r.log_det() - 0.5 * quad)
}

/// Log acceptance ratio of the correlation Metropolis-Hastings step for
/// moving from `current` to `proposed`.
pub fn correlation_log_acceptance(
    z: &DMatrix<f64>,
    g: &DMatrix<f64>,
    current: &ScaleDecomposition,
    proposed: &ScaleDecomposition,
    prior: &CorrelationPriorConfig,
) -> Result<f64> {
    let q = current.r.dim() as f64;
    let sigma = current.sigma();
    let sigma_star = proposed.sigma();
    let wp = prior.wp;
    // density of the proposal over (R', D'): IW density times the Jacobian |D'|^{(q-1)/2}
    let forward = log_inverse_wishart_density(&sigma_star, wp, &(&sigma * wp))? + 0.5 * (q - 1.0) * proposed.log_det_d();
    let reverse = log_inverse_wishart_density(&sigma, wp, &(&sigma_star * wp))? + 0.5 * (q - 1.0) * current.log_det_d();
    Ok(log_residual_loglik(z, g, &proposed.r)? - log_residual_loglik(z, g, &current.r)?
        + log_prior_rd(proposed, prior)?
        - log_prior_rd(current, prior)?
        + reverse
        - forward)
}

/// Log acceptance ratio of a structural tree move given leaf statistics of
/// the pseudo-response under the current and proposed trees.
pub fn tree_log_acceptance(
    current: &[LeafStats],
    proposal: &MoveProposal,
    proposed: &[LeafStats],
    phi: f64,
    sigma_mu2: f64,
) -> Result<f64> {
    let mut new = 0.0;
    for s in proposed {
        new += leaf_marginal_loglik(*s, phi, sigma_mu2)?;
    }
    let mut old = 0.0;
    for s in current {
        old += leaf_marginal_loglik(*s, phi, sigma_mu2)?;
    }
    Ok(new - old + proposal.log_prior_ratio + proposal.log_proposal_ratio)
}

pub struct Sampler<'a> {
    data: &'a Dataset,
    config: ModelConfig,
    state: ChainState,
    weights: ConditionalWeights,
    rng: RngStream,
    tree_proposals: u64,
    tree_accepts: u64,
    r_proposals: u64,
    r_accepts: u64,
    loglik_trace: Vec<f64>,
}

impl<'a> Sampler<'a> {
    /// Start from all-zero means, `R = D = I`, and latents drawn from
    /// `N(0, 1)` truncated to the side given by each label.
    pub fn new(data: &'a Dataset, config: ModelConfig, mut rng: RngStream) -> Result<Self> {
        let (n, q, p) = (data.n_rows(), data.n_labels(), data.n_features());
        if n < 2 {
            return Err(invalid("need at least two training rows"));
        }
        if q == 0 {
            return Err(invalid("need at least one label"));
        }
        config.validate(q)?;
        if let Some(v) = data.y.iter().find(|&&v| v > 1) {
            return Err(invalid(format!("label value {v} is not 0/1")));
        }
        for k in 0..q {
            let ones = data.y.column(k).iter().filter(|&&v| v == 1).count();
            if ones == 0 || ones == n {
                log::warn!("label '{}' is constant in the training data", data.label_names[k]);
            }
        }
        let mean = match &config.mean_model {
            MeanModelSpec::SumOfTrees => MeanState::Trees(Forest::zeros(q, config.trees_per_label(), p)),
            MeanModelSpec::LinearBasis(basis) => {
                let design = basis.design(&data.x)?;
                check_full_rank(&design)?;
                MeanState::Linear {
                    basis: basis.clone(),
                    coefficients: DMatrix::zeros(design.ncols(), q),
                    design,
                }
            }
        };
        let mut z = DMatrix::zeros(n, q);
        for k in 0..q {
            for i in 0..n {
                z[(i, k)] = sample_truncated_normal(0.0, 1.0, Side::from_label(data.y[(i, k)]), &mut rng)?;
            }
        }
        let dec = ScaleDecomposition::identity(q);
        let weights = ConditionalWeights::new(&dec.r)?;
        Ok(Self {
            data,
            state: ChainState {
                z,
                mean,
                dec,
                g: DMatrix::zeros(n, q),
                iteration: 0,
            },
            weights,
            rng,
            config,
            tree_proposals: 0,
            tree_accepts: 0,
            r_proposals: 0,
            r_accepts: 0,
            loglik_trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Replace `(R, D)`; used to seed a chain or in tests.
    pub fn set_decomposition(&mut self, dec: ScaleDecomposition) -> Result<()> {
        if dec.r.dim() != self.data.n_labels() {
            return Err(Error::DimensionMismatch("decomposition size".into()));
        }
        self.weights = ConditionalWeights::new(&dec.r)?;
        self.state.dec = dec;
        Ok(())
    }

    /// Replace the latent matrix. Every entry must agree in sign with its label.
    pub fn set_latents(&mut self, z: DMatrix<f64>) -> Result<()> {
        if z.shape() != self.state.z.shape() {
            return Err(Error::DimensionMismatch("latent matrix shape".into()));
        }
        self.state.z = z;
        if !self.signs_match() {
            return Err(invalid("latent signs disagree with labels"));
        }
        Ok(())
    }

    pub fn set_forest(&mut self, forest: Forest) -> Result<()> {
        self.state.g = forest.evaluate(&self.data.x)?;
        self.state.mean = MeanState::Trees(forest);
        Ok(())
    }

    pub fn signs_match(&self) -> bool {
        let (n, q) = self.state.z.shape();
        (0..n).all(|i| (0..q).all(|k| Side::from_label(self.data.y[(i, k)]).contains(self.state.z[(i, k)])))
    }

    /// Step 1: systematic scan over labels within each row.
    pub fn sample_latents(&mut self) -> Result<()> {
        let (n, q) = self.state.z.shape();
        let mut zi = vec![0.0; q];
        let mut gi = vec![0.0; q];
        let sd: Vec<f64> = (0..q).map(|k| self.weights.phi(k).sqrt()).collect();
        for i in 0..n {
            for k in 0..q {
                zi[k] = self.state.z[(i, k)];
                gi[k] = self.state.g[(i, k)];
            }
            for k in 0..q {
                let m = gi[k] + self.weights.correction(k, &zi, &gi);
                zi[k] = sample_truncated_normal(m, sd[k], Side::from_label(self.data.y[(i, k)]), &mut self.rng)?;
            }
            for k in 0..q {
                self.state.z[(i, k)] = zi[k];
            }
        }
        Ok(())
    }

    /// `z_ik` minus the cross-label conditional-mean correction. In
    /// fixed-identity mode there is no correction term at all.
    fn label_offsets(&self, k: usize) -> Vec<f64> {
        let (n, q) = self.state.z.shape();
        if self.config.mode == Mode::FixedIdentityR {
            return self.state.z.column(k).iter().copied().collect();
        }
        let mut zi = vec![0.0; q];
        let mut gi = vec![0.0; q];
        (0..n)
            .map(|i| {
                for l in 0..q {
                    zi[l] = self.state.z[(i, l)];
                    gi[l] = self.state.g[(i, l)];
                }
                zi[k] - self.weights.correction(k, &zi, &gi)
            })
            .collect()
    }

    fn tree_fit(&self, k: usize, j: usize) -> Result<Vec<f64>> {
        let MeanState::Trees(forest) = &self.state.mean else {
            return Err(invalid("pseudo-responses need a sum-of-trees mean"));
        };
        let t = &forest.trees[k][j];
        let x = &self.data.x;
        Ok((0..x.nrows()).map(|i| t.value_at(|v| x[(i, v)])).collect())
    }

    /// Backfitting target for tree `j` of label `k`:
    /// `z_ik − Σ_{l≠j} g(x_i; T_kl, M_kl) − R_{k,−k}R_{−k,−k}⁻¹(Z_{i,−k} − G_{−k}(x_i))`.
    pub fn pseudo_response(&self, k: usize, j: usize) -> Result<Vec<f64>> {
        let offsets = self.label_offsets(k);
        let fit = self.tree_fit(k, j)?;
        Ok(offsets
            .iter()
            .zip(&fit)
            .enumerate()
            .map(|(i, (o, f))| o - (self.state.g[(i, k)] - f))
            .collect())
    }

    fn update_tree_with(&mut self, k: usize, j: usize, offsets: &[f64]) -> Result<bool> {
        let phi = self.weights.phi(k);
        let sigma_mu2 = self.config.tree_prior.sigma_mu2();
        let x = &self.data.x;
        let MeanState::Trees(forest) = &mut self.state.mean else {
            return Err(invalid("tree update needs a sum-of-trees mean"));
        };
        let tree = &forest.trees[k][j];
        let rows = tree.partition(x);
        let old_fit: Vec<f64> = rows
            .leaf_of_row
            .iter()
            .map(|&leaf| tree.leaf_value(leaf).unwrap_or(0.0))
            .collect();
        let resid: Vec<f64> = (0..x.nrows())
            .map(|i| offsets[i] - (self.state.g[(i, k)] - old_fit[i]))
            .collect();
        let stats = LeafStats::per_node(&rows, &resid);

        let proposal = propose_move(tree, x, &rows, &self.config.tree_prior, &mut self.rng)?;
        let mut accepted = false;
        let (structure, rows, stats) = match proposal {
            Some(p) => {
                self.tree_proposals += 1;
                let new_stats = LeafStats::per_node(&p.rows, &resid);
                let log_alpha = tree_log_acceptance(&stats, &p, &new_stats, phi, sigma_mu2)?;
                if self.rng.uniform().ln() < log_alpha {
                    self.tree_accepts += 1;
                    accepted = true;
                    (p.tree, p.rows, new_stats)
                } else {
                    (tree.clone(), rows, stats)
                }
            }
            None => (tree.clone(), rows, stats),
        };
        let new_tree = draw_leaf_values(&structure, &stats, phi, sigma_mu2, &mut self.rng)?;
        for (i, &leaf) in rows.leaf_of_row.iter().enumerate() {
            let v = new_tree.leaf_value(leaf).unwrap_or(0.0);
            self.state.g[(i, k)] += v - old_fit[i];
        }
        forest.trees[k][j] = new_tree;
        Ok(accepted)
    }

    /// Metropolis-Hastings update of tree `j` of label `k`, followed by a
    /// refresh of its leaf values. Returns whether the structural move was
    /// accepted.
    pub fn update_tree(&mut self, k: usize, j: usize) -> Result<bool> {
        let offsets = self.label_offsets(k);
        self.update_tree_with(k, j, &offsets)
    }

    /// Step 2.
    pub fn update_mean(&mut self) -> Result<()> {
        let q = self.data.n_labels();
        match &self.state.mean {
            MeanState::Trees(_) => {
                let b = self.config.trees_per_label();
                for k in 0..q {
                    let offsets = self.label_offsets(k);
                    for j in 0..b {
                        self.update_tree_with(k, j, &offsets)?;
                    }
                }
            }
            MeanState::Linear { basis, design, .. } => {
                let coefficients =
                    draw_linear_coefficients(design, &self.state.z, &self.state.dec.r, basis.tau2, &mut self.rng)?;
                self.state.g = design * &coefficients;
                if let MeanState::Linear { coefficients: c, .. } = &mut self.state.mean {
                    *c = coefficients;
                }
            }
        }
        Ok(())
    }

    /// Step 3. A failed proposal decomposition counts as a rejection.
    pub fn update_correlation(&mut self) -> Result<bool> {
        let q = self.data.n_labels();
        if self.config.mode == Mode::FixedIdentityR || q < 2 {
            return Ok(false);
        }
        self.r_proposals += 1;
        let prior = &self.config.correlation_prior;
        let scale = self.state.dec.sigma() * prior.wp;
        let proposed = match sample_inverse_wishart(prior.wp, &scale, &mut self.rng).and_then(|s| decompose_to_correlation(&s)) {
            Ok(d) => d,
            Err(_) => return Ok(false),
        };
        let log_alpha = match correlation_log_acceptance(&self.state.z, &self.state.g, &self.state.dec, &proposed, prior) {
            Ok(v) => v,
            Err(_) => return Ok(false),
        };
        if self.rng.uniform().ln() < log_alpha {
            self.set_decomposition(proposed)?;
            self.r_accepts += 1;
            return Ok(true);
        }
        Ok(false)
    }

    /// One full iteration.
    pub fn step(&mut self) -> Result<()> {
        self.sample_latents()?;
        self.update_mean()?;
        self.update_correlation()?;
        debug_assert!(self.signs_match());
        self.loglik_trace
            .push(log_residual_loglik(&self.state.z, &self.state.g, &self.state.dec.r)?);
        self.state.iteration += 1;
        Ok(())
    }

    fn snapshot(&self) -> Draw {
        let mean = match &self.state.mean {
            MeanState::Trees(f) => MeanDraw::Forest(f.clone()),
            MeanState::Linear { coefficients, .. } => MeanDraw::Linear(coefficients.clone()),
        };
        Draw {
            mean,
            r: self.state.dec.r.clone(),
        }
    }

    pub fn run(mut self) -> Result<PosteriorDraws> {
        let q = self.data.n_labels();
        let mut draws = Vec::with_capacity(self.config.kept_draws());
        let mut depth = vec![0.0; q];
        for t in 0..self.config.iterations {
            self.step()?;
            if t >= self.config.burn_in && (t - self.config.burn_in + 1) % self.config.thin == 0 {
                if let MeanState::Trees(f) = &self.state.mean {
                    for (acc, d) in depth.iter_mut().zip(f.mean_depth()) {
                        *acc += d;
                    }
                }
                draws.push(self.snapshot());
            }
        }
        let kept = draws.len().max(1) as f64;
        let rate = |acc: u64, n: u64| (n > 0).then(|| acc as f64 / n as f64);
        Ok(PosteriorDraws {
            n_features: self.data.n_features(),
            n_labels: q,
            diagnostics: Diagnostics {
                correlation_acceptance_rate: rate(self.r_accepts, self.r_proposals),
                tree_acceptance_rate: rate(self.tree_accepts, self.tree_proposals),
                mean_tree_depth: depth.into_iter().map(|d| d / kept).collect(),
                loglik_trace: self.loglik_trace,
            },
            config: self.config,
            draws,
        })
    }
}

/// Run a full chain and keep every `thin`-th post-burn-in snapshot.
pub fn run_chain(data: &Dataset, config: &ModelConfig, rng: RngStream) -> Result<PosteriorDraws> {
    Sampler::new(data, config.clone(), rng)?.run()
}
